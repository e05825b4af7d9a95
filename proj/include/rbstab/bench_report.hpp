#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rbstab/greedy.hpp"

namespace rbstab {

struct ExperimentGrid {
  ProblemKind problem = ProblemKind::Diffusion;
  std::vector<int> nc{3, 4};
  std::vector<int> n_subdomains{3};  // ignored for Graetz
  std::vector<Formulation> formulations{Formulation::Galerkin, Formulation::PetrovGalerkin};
  std::vector<StabilizationKind> stabilizations{StabilizationKind::Supremizer, StabilizationKind::Aggregation};
  double beta = 1e-2;
  GreedyConfig greedy;  // tol, sizes, seed, threads; formulation/stabilization overridden per cell
  int cell_jobs = 1;    // cells run concurrently when > 1

  static ExperimentGrid defaults_for(ProblemKind problem);
  void validate() const;
};

struct ReportRow {
  ProblemKind problem = ProblemKind::Diffusion;
  int nc = 0;
  int n_subdomains = 0;
  Formulation formulation = Formulation::Galerkin;
  StabilizationKind stabilization = StabilizationKind::Aggregation;
  Index n_snapshots = 0;
  Index columns = 0;
  double max_verification_eta = 0.0;  // NaN ("-") when the greedy did not converge
  double max_cond = 0.0;
  GreedyOutcome outcome = GreedyOutcome::Converged;
  double best_train_eta = 0.0;
  std::uint64_t seed = 0;

  /// Field-wise equality with NaN == NaN.
  bool operator==(const ReportRow& other) const;
};

struct CellResult {
  ReportRow row;
  GreedyTrace trace;
  double seconds = 0.0;
  std::string error;  // non-empty when the cell threw
};

/// Deterministic cell name `<problem>_<nc>_<ND>_<form>_<stab>`.
std::string cell_name(const ReportRow& row);

std::vector<CellResult> run_grid(const ExperimentGrid& grid);

/// Runs one greedy + verification and fills the corresponding row.
CellResult run_cell(const Problem& problem, const GreedyConfig& config);

void write_table_csv(std::ostream& os, const std::vector<ReportRow>& rows);
std::vector<ReportRow> parse_table_csv(std::istream& is);

/// Writes table.csv, trace_<cell>.csv per cell and summary.json into out_dir.
void emit_reports(const std::vector<CellResult>& cells, const ExperimentGrid& grid,
                  const std::filesystem::path& out_dir);

std::string software_fingerprint();

}  // namespace rbstab
