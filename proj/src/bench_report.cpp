#include "rbstab/bench_report.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace rbstab {

namespace {

using json = nlohmann::json;

constexpr const char* kTableHeader =
    "problem,nc,n_subdomains,formulation,stabilization,N,columns,max_verification_eta,max_cond,outcome,"
    "best_train_eta,seed";

std::string fmt(double x) {
  if (std::isnan(x)) return "-";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "-" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw IoError("bad number '" + s + "' in table");
  return v;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace

bool ReportRow::operator==(const ReportRow& o) const {
  return problem == o.problem && nc == o.nc && n_subdomains == o.n_subdomains && formulation == o.formulation &&
         stabilization == o.stabilization && n_snapshots == o.n_snapshots && columns == o.columns &&
         same(max_verification_eta, o.max_verification_eta) && same(max_cond, o.max_cond) &&
         outcome == o.outcome && same(best_train_eta, o.best_train_eta) && seed == o.seed;
}

ExperimentGrid ExperimentGrid::defaults_for(ProblemKind problem) {
  ExperimentGrid grid;
  grid.problem = problem;
  if (problem == ProblemKind::Graetz) {
    grid.n_subdomains = {2};
    grid.greedy.tol = 1e-4;
  } else {
    grid.greedy.tol = 1e-7;
  }
  return grid;
}

void ExperimentGrid::validate() const {
  if (nc.empty() || formulations.empty() || stabilizations.empty())
    throw ConfigError("experiment grid has an empty axis");
  if (problem == ProblemKind::Diffusion && n_subdomains.empty()) throw ConfigError("n_subdomains list is empty");
  if (cell_jobs < 1) throw ConfigError("cell_jobs must be >= 1");
  greedy.validate();
  for (int level : nc) MeshSpec::make(problem, level, problem == ProblemKind::Graetz ? 2 : 1).validate();
}

std::string cell_name(const ReportRow& row) {
  std::ostringstream os;
  os << to_string(row.problem) << '_' << row.nc << '_' << row.n_subdomains << '_' << to_string(row.formulation)
     << '_' << to_string(row.stabilization);
  return os.str();
}

CellResult run_cell(const Problem& problem, const GreedyConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  CellResult cell;
  ReportRow& row = cell.row;
  row.problem = problem.config.kind;
  row.nc = problem.config.nc;
  row.n_subdomains = problem.mesh.spec.n_subdomains;
  row.formulation = config.formulation;
  row.stabilization = config.stabilization;
  row.seed = config.seed;
  row.max_verification_eta = std::numeric_limits<double>::quiet_NaN();
  try {
    GreedyResult gr = greedy_train(problem, config);
    row.n_snapshots = gr.basis.snapshot_count();
    row.columns = gr.basis.total_columns();
    row.max_cond = gr.trace.max_cond;
    row.outcome = gr.trace.outcome;
    row.best_train_eta = gr.trace.best_eta;
    if (gr.trace.outcome == GreedyOutcome::Converged && config.verification_size > 0) {
      const VerificationReport vr = verify(problem, gr.basis, config.formulation, config.verification_size,
                                           config.effective_verification_seed(), gr.training, config.threads,
                                           config.pg_solver);
      row.max_verification_eta = vr.max_eta;
    }
    cell.trace = std::move(gr.trace);
  } catch (const std::exception& e) {
    row.outcome = GreedyOutcome::FailedToConverge;
    row.best_train_eta = std::numeric_limits<double>::quiet_NaN();
    row.max_cond = std::numeric_limits<double>::quiet_NaN();
    cell.error = e.what();
  }
  cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cell;
}

std::vector<CellResult> run_grid(const ExperimentGrid& grid) {
  grid.validate();
  struct Job {
    int nc;
    int nd;
    Formulation form;
    StabilizationKind stab;
  };
  std::vector<Job> jobs;
  const std::vector<int> nds = grid.problem == ProblemKind::Graetz ? std::vector<int>{2} : grid.n_subdomains;
  for (int nc : grid.nc)
    for (int nd : nds)
      for (Formulation f : grid.formulations)
        for (StabilizationKind s : grid.stabilizations) jobs.push_back({nc, nd, f, s});

  // Problems are immutable after construction and shared by all cells on the same mesh.
  std::map<std::pair<int, int>, Problem> problems;
  for (const Job& j : jobs) {
    const auto key = std::make_pair(j.nc, j.nd);
    if (!problems.count(key)) problems.emplace(key, make_problem({grid.problem, j.nc, j.nd, grid.beta}));
  }

  std::vector<CellResult> out(jobs.size());
  auto run = [&](std::size_t i) {
    GreedyConfig cfg = grid.greedy;
    cfg.formulation = jobs[i].form;
    cfg.stabilization = jobs[i].stab;
    out[i] = run_cell(problems.at({jobs[i].nc, jobs[i].nd}), cfg);
  };
  if (grid.cell_jobs <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < grid.cell_jobs; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) run(i);
      });
    }
  }
  return out;
}

void write_table_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << kTableHeader << '\n';
  for (const auto& r : rows) {
    os << to_string(r.problem) << ',' << r.nc << ',' << r.n_subdomains << ',' << to_string(r.formulation) << ','
       << to_string(r.stabilization) << ',' << r.n_snapshots << ',' << r.columns << ','
       << fmt(r.max_verification_eta) << ',' << fmt(r.max_cond) << ',' << to_string(r.outcome) << ','
       << fmt(r.best_train_eta) << ',' << r.seed << '\n';
  }
}

std::vector<ReportRow> parse_table_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTableHeader) throw IoError("table CSV has an unexpected header");
  std::vector<ReportRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 12) throw IoError("table CSV row has " + std::to_string(f.size()) + " fields");
    try {
      ReportRow r;
      r.problem = parse_problem(f[0]);
      r.nc = std::stoi(f[1]);
      r.n_subdomains = std::stoi(f[2]);
      r.formulation = parse_formulation(f[3]);
      r.stabilization = parse_stabilization(f[4]);
      r.n_snapshots = std::stoll(f[5]);
      r.columns = std::stoll(f[6]);
      r.max_verification_eta = parse_double(f[7]);
      r.max_cond = parse_double(f[8]);
      if (f[9] == "Converged") {
        r.outcome = GreedyOutcome::Converged;
      } else if (f[9] == "FailedToConverge") {
        r.outcome = GreedyOutcome::FailedToConverge;
      } else {
        throw IoError("bad outcome '" + f[9] + "'");
      }
      r.best_train_eta = parse_double(f[10]);
      r.seed = std::stoull(f[11]);
      rows.push_back(r);
    } catch (const std::logic_error& e) {
      throw IoError(std::string("malformed table row: ") + e.what());
    } catch (const ConfigError& e) {
      throw IoError(std::string("malformed table row: ") + e.what());
    }
  }
  return rows;
}

std::string software_fingerprint() {
  std::ostringstream os;
  os << "rbstab 1.0; eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION
     << "; " <<
#if defined(__clang__)
      "clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
      "gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#else
      "unknown compiler";
#endif
  return os.str();
}

void emit_reports(const std::vector<CellResult>& cells, const ExperimentGrid& grid,
                  const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<ReportRow> rows;
  for (const auto& c : cells) rows.push_back(c.row);
  std::ostringstream table;
  write_table_csv(table, rows);
  write_file(out_dir / "table.csv", table.str());

  json summary;
  summary["software"] = software_fingerprint();
  summary["problem"] = std::string(to_string(grid.problem));
  summary["config"] = {{"nc", grid.nc},
                       {"n_subdomains", grid.n_subdomains},
                       {"beta", grid.beta},
                       {"tol", grid.greedy.tol},
                       {"n_train", grid.greedy.n_train},
                       {"max_basis", grid.greedy.max_basis},
                       {"verification_size", grid.greedy.verification_size},
                       {"seed", grid.greedy.seed},
                       {"verification_seed", grid.greedy.effective_verification_seed()},
                       {"threads", grid.greedy.threads}};
  json jcells = json::array();
  for (const auto& c : cells) {
    const std::string name = cell_name(c.row);
    const Index dim = c.row.problem == ProblemKind::Graetz ? 3 : c.row.n_subdomains;
    if (!c.trace.records.empty()) {
      std::ostringstream trace;
      write_trace_csv(trace, c.trace, dim);
      write_file(out_dir / ("trace_" + name + ".csv"), trace.str());
    }
    json jc = {{"cell", name},
               {"outcome", std::string(to_string(c.row.outcome))},
               {"iterations", c.trace.records.empty() ? 0 : c.trace.iterations()},
               {"seconds", c.seconds},
               {"seed", c.row.seed}};
    if (!c.error.empty()) jc["error"] = c.error;
    jcells.push_back(std::move(jc));
  }
  summary["cells"] = std::move(jcells);
  write_file(out_dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace rbstab
