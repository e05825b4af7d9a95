#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include "rbstab/reduced_basis.hpp"
#include "rbstab/stabilization.hpp"

namespace rbstab {

struct GreedyConfig {
  Index n_train = 2000;
  double tol = 1e-7;
  Index max_basis = 200;
  std::uint64_t seed = 1;
  Formulation formulation = Formulation::Galerkin;
  StabilizationKind stabilization = StabilizationKind::Aggregation;
  PgSolver pg_solver = PgSolver::NormalEquations;
  Index verification_size = 500;
  std::uint64_t verification_seed = 0;  // 0: derive from seed
  int threads = 1;
  double drop_tol = 0.0;  // Gram-Schmidt dependence threshold; 0 keeps every nonzero remainder

  void validate() const;
  std::uint64_t effective_verification_seed() const;
};

/// Greedy sweep state after N snapshots. Record 0 describes the empty basis
/// before the first snapshot (eta = 1 everywhere, mu^(1) = first sample).
struct IterationRecord {
  Index iteration = 0;
  Index n_snapshots = 0;
  Index columns = 0;
  double eta_max = 1.0;
  double cond_max = std::numeric_limits<double>::quiet_NaN();
  double cond_at_argmax = std::numeric_limits<double>::quiet_NaN();
  Index argmax = 0;
  ParameterVector chosen;
  Index failed_solves = 0;
  bool added = false;  // chosen parameter was solved and added to the basis
  double wall_seconds = 0.0;
};

enum class GreedyOutcome { Converged, FailedToConverge };
std::string_view to_string(GreedyOutcome outcome);

struct GreedyTrace {
  std::vector<IterationRecord> records;
  GreedyOutcome outcome = GreedyOutcome::FailedToConverge;
  double best_eta = std::numeric_limits<double>::infinity();
  double max_cond = 0.0;  // over training set and all iterations
  Index iterations() const { return Index(records.size()) - 1; }
};

struct GreedyResult {
  ReducedBasis basis;
  GreedyTrace trace;
  std::vector<ParameterVector> training;
};

std::vector<ParameterVector> sample_training_set(const ParameterBox& box, Index n_max, std::uint64_t seed);

/// Evaluates the reduced model at every parameter. Results are written into
/// index order regardless of the thread count.
std::vector<OnlineSolver::Result> sweep(const OnlineSolver& solver, const std::vector<ParameterVector>& params,
                                        int threads);

/// Index of the largest eta; ties go to the lowest index. +inf counts as largest.
Index argmax_eta(const std::vector<OnlineSolver::Result>& results);

/// Optional progress callback invoked after every record.
using GreedyObserver = std::function<void(const IterationRecord&)>;

GreedyResult greedy_train(const Problem& problem, const GreedyConfig& config, const GreedyObserver& observer = {});

struct VerificationReport {
  std::vector<ParameterVector> params;
  std::vector<double> eta;
  double max_eta = 0.0;
  double median_eta = 0.0;
  Index failed = 0;
};

/// Evaluates the basis on fresh uniform samples not contained in `exclude`.
VerificationReport verify(const Problem& problem, const ReducedBasis& basis, Formulation formulation,
                          Index size, std::uint64_t seed, const std::vector<ParameterVector>& exclude = {},
                          int threads = 1, PgSolver pg_solver = PgSolver::NormalEquations);

/// Trace CSV: one header row plus one row per record. Deterministic; no
/// wall-clock fields.
void write_trace_csv(std::ostream& os, const GreedyTrace& trace, Index param_dim);

}  // namespace rbstab
