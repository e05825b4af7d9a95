#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "rbstab/bench_report.hpp"

using namespace rbstab;
namespace fs = std::filesystem;

namespace {

ExperimentGrid quick_grid() {
  ExperimentGrid g = ExperimentGrid::defaults_for(ProblemKind::Diffusion);
  g.nc = {1, 2};
  g.greedy.n_train = 40;
  g.greedy.max_basis = 4;
  g.greedy.verification_size = 10;
  return g;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rbstab_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::size_t line_count(const fs::path& file) {
  std::ifstream is(file);
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("grid defaults per problem") {
  const ExperimentGrid d = ExperimentGrid::defaults_for(ProblemKind::Diffusion);
  CHECK(d.greedy.tol == 1e-7);
  CHECK(d.nc == std::vector<int>{3, 4});
  const ExperimentGrid g = ExperimentGrid::defaults_for(ProblemKind::Graetz);
  CHECK(g.greedy.tol == 1e-4);

  ExperimentGrid bad = d;
  bad.formulations.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = d;
  bad.cell_jobs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cell names are deterministic") {
  ReportRow r;
  r.problem = ProblemKind::Graetz;
  r.nc = 4;
  r.n_subdomains = 2;
  r.formulation = Formulation::PetrovGalerkin;
  r.stabilization = StabilizationKind::Supremizer;
  CHECK(cell_name(r) == "graetz_4_2_pg_supremizer");
}

TEST_CASE("a two-mesh grid produces eight rows and consistent reports") {
  const ExperimentGrid g = quick_grid();
  const auto cells = run_grid(g);
  REQUIRE(cells.size() == 8);
  std::set<std::string> names;
  for (const auto& c : cells) {
    CHECK(c.error.empty());
    names.insert(cell_name(c.row));
    CHECK(Index(c.trace.records.size()) == c.trace.iterations() + 1);
    if (c.row.outcome == GreedyOutcome::Converged) {
      CHECK(c.row.max_verification_eta <= g.greedy.tol);
    } else {
      CHECK(std::isnan(c.row.max_verification_eta));
      CHECK(c.row.n_snapshots == g.greedy.max_basis);
    }
  }
  CHECK(names.size() == 8);

  const fs::path dir = scratch_dir("grid");
  emit_reports(cells, g, dir);
  std::ifstream table(dir / "table.csv");
  const auto rows = parse_table_csv(table);
  REQUIRE(rows.size() == 8);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i] == cells[i].row);
  for (const auto& c : cells)
    CHECK(line_count(dir / ("trace_" + cell_name(c.row) + ".csv")) == c.trace.records.size() + 1);

  std::ifstream js(dir / "summary.json");
  const auto summary = nlohmann::json::parse(js);
  CHECK(summary["cells"].size() == 8);
  CHECK(summary["config"]["seed"] == g.greedy.seed);
  CHECK(summary["software"].get<std::string>() == software_fingerprint());

  // Reports are reproducible apart from timing.
  const auto again = run_grid(g);
  for (std::size_t i = 0; i < cells.size(); ++i) CHECK(again[i].row == cells[i].row);
  fs::remove_all(dir);
}

TEST_CASE("parallel cells give the same rows") {
  ExperimentGrid g = quick_grid();
  g.nc = {2};
  const auto serial = run_grid(g);
  g.cell_jobs = 3;
  const auto parallel = run_grid(g);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i].row == parallel[i].row);
}

TEST_CASE("table CSV round-trips including missing verification values") {
  ReportRow a;
  a.problem = ProblemKind::Diffusion;
  a.nc = 3;
  a.n_subdomains = 3;
  a.n_snapshots = 8;
  a.columns = 40;
  a.max_verification_eta = 4.2e-14;
  a.max_cond = 4.7e4;
  a.best_train_eta = 1e-9;
  a.seed = 1;
  ReportRow b = a;
  b.formulation = Formulation::PetrovGalerkin;
  b.outcome = GreedyOutcome::FailedToConverge;
  b.max_verification_eta = std::numeric_limits<double>::quiet_NaN();

  std::stringstream ss;
  write_table_csv(ss, {a, b});
  CHECK(ss.str().find(",-,") != std::string::npos);
  const auto back = parse_table_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == a);
  CHECK(back[1] == b);
}

TEST_CASE("an empty table is just the header") {
  std::stringstream ss;
  write_table_csv(ss, {});
  std::string header;
  std::getline(ss, header);
  CHECK(header.rfind("problem,nc,", 0) == 0);
  std::string rest;
  CHECK_FALSE(std::getline(ss, rest));
  std::stringstream again;
  write_table_csv(again, {});
  CHECK(parse_table_csv(again).empty());
}

TEST_CASE("malformed tables are rejected") {
  std::stringstream wrong_header("a,b,c\n");
  CHECK_THROWS_AS(parse_table_csv(wrong_header), IoError);

  std::stringstream ss;
  write_table_csv(ss, {});
  std::stringstream short_row(ss.str() + "diffusion,3,3\n");
  CHECK_THROWS_AS(parse_table_csv(short_row), IoError);
  std::stringstream bad_value(ss.str() + "diffusion,x,3,galerkin,aggregation,1,5,-,1,Converged,1,1\n");
  CHECK_THROWS_AS(parse_table_csv(bad_value), IoError);
}
