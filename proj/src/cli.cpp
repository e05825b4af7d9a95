#include "rbstab/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rbstab/bench_report.hpp"
#include "rbstab/greedy.hpp"

namespace rbstab {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct RunConfig {
  std::string problem = "diffusion";
  int nc = 3;
  int nd = 3;
  double beta = 1e-2;
  Index n_train = 2000;
  double tol = 0.0;  // 0: per-problem default
  Index max_basis = 200;
  std::uint64_t seed = 1;
  std::uint64_t verification_seed = 0;
  Index verification_size = 500;
  std::string formulation = "galerkin";
  std::string stabilization = "aggregation";
  std::string pg_solver = "normal";
  int threads = 1;
  double drop_tol = 0.0;
  std::string out;
  std::string basis;
  Index infsup_samples = 10;
  std::vector<int> bench_nc{3, 4};
  std::vector<int> bench_nd{3};
  std::vector<std::string> bench_formulations{"galerkin", "pg"};
  std::vector<std::string> bench_stabilizations{"supremizer", "aggregation"};
  int cell_jobs = 1;
  bool quiet = false;
};

// Fully parsed and validated view of RunConfig.
struct Resolved {
  ProblemConfig problem;
  GreedyConfig greedy;
  fs::path out_dir;
  fs::path basis_path;
  Index infsup_samples = 0;
  ExperimentGrid grid;
  bool quiet = false;
};

PgSolver parse_pg_solver(const std::string& s) {
  if (s == "normal" || s == "normal-equations") return PgSolver::NormalEquations;
  if (s == "qr") return PgSolver::QR;
  throw ConfigError("pg_solver: expected 'normal' or 'qr', got '" + s + "'");
}

template <typename F>
auto keyed(const char* key, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

fs::path default_out_dir() {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "rbstab-out";
}

Resolved resolve(const RunConfig& c, bool tol_given) {
  Resolved r;
  const ProblemKind kind = keyed("problem", [&] { return parse_problem(c.problem); });
  r.problem = {kind, c.nc, kind == ProblemKind::Graetz ? 2 : c.nd, c.beta};
  if (!(c.beta > 0.0)) throw ConfigError("beta: must be positive");
  keyed("nc", [&] {
    MeshSpec::make(kind, c.nc, r.problem.n_subdomains).validate();
    return 0;
  });

  GreedyConfig& g = r.greedy;
  g.n_train = c.n_train;
  g.tol = tol_given ? c.tol : (kind == ProblemKind::Graetz ? 1e-4 : 1e-7);
  g.max_basis = c.max_basis;
  g.seed = c.seed;
  g.verification_seed = c.verification_seed;
  g.verification_size = c.verification_size;
  g.formulation = keyed("formulation", [&] { return parse_formulation(c.formulation); });
  g.stabilization = keyed("stabilization", [&] { return parse_stabilization(c.stabilization); });
  g.pg_solver = parse_pg_solver(c.pg_solver);
  g.threads = c.threads;
  g.drop_tol = c.drop_tol;
  g.validate();

  r.out_dir = c.out.empty() ? default_out_dir() : fs::path(c.out);
  r.basis_path = c.basis.empty() ? r.out_dir / "basis.json" : fs::path(c.basis);
  if (c.infsup_samples < 1) throw ConfigError("infsup_samples: must be >= 1");
  r.infsup_samples = c.infsup_samples;

  ExperimentGrid& grid = r.grid;
  grid.problem = kind;
  grid.nc = c.bench_nc;
  grid.n_subdomains = c.bench_nd;
  grid.formulations.clear();
  for (const auto& f : c.bench_formulations)
    grid.formulations.push_back(keyed("bench_formulations", [&] { return parse_formulation(f); }));
  grid.stabilizations.clear();
  for (const auto& s : c.bench_stabilizations)
    grid.stabilizations.push_back(keyed("bench_stabilizations", [&] { return parse_stabilization(s); }));
  grid.beta = c.beta;
  grid.greedy = g;
  grid.cell_jobs = c.cell_jobs;
  grid.validate();
  r.quiet = c.quiet;
  return r;
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

ReducedBasis load_basis(const fs::path& path, std::string& fingerprint) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open basis file " + path.string());
  return read_basis(is, &fingerprint);
}

class FingerprintMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void check_fingerprint(const std::string& stored, const Problem& problem) {
  if (stored != problem.fingerprint())
    throw FingerprintMismatch("basis was built for '" + stored + "' but the configuration describes '" +
                              problem.fingerprint() + "'");
}

int cmd_train(const Resolved& r, std::ostream& out) {
  const Problem problem = make_problem(r.problem);
  ensure_dir(r.out_dir);
  GreedyObserver observer;
  if (!r.quiet) {
    observer = [&](const IterationRecord& rec) {
      out << "iteration " << rec.iteration << "  N=" << rec.n_snapshots << "  eta_max=" << fmt(rec.eta_max) << '\n';
    };
  }
  const GreedyResult result = greedy_train(problem, r.greedy, observer);

  std::ostringstream basis;
  write_basis(basis, result.basis, problem.fingerprint());
  write_text(r.out_dir / "basis.json", basis.str());
  std::ostringstream trace;
  write_trace_csv(trace, result.trace, problem.box.dim());
  write_text(r.out_dir / "trace.csv", trace.str());

  out << to_string(result.trace.outcome) << ": N=" << result.basis.snapshot_count()
      << " columns=" << result.basis.total_columns() << " best_eta=" << fmt(result.trace.best_eta) << '\n';
  return result.trace.outcome == GreedyOutcome::Converged ? exit_code::kOk : exit_code::kNotConverged;
}

int cmd_verify(const Resolved& r, std::ostream& out) {
  const Problem problem = make_problem(r.problem);
  std::string fingerprint;
  const ReducedBasis basis = load_basis(r.basis_path, fingerprint);
  check_fingerprint(fingerprint, problem);
  if (basis.n != problem.n()) throw FingerprintMismatch("basis row count does not match the mesh");

  const auto training = sample_training_set(problem.box, r.greedy.n_train, r.greedy.seed);
  const VerificationReport rep =
      verify(problem, basis, r.greedy.formulation, r.greedy.verification_size,
             r.greedy.effective_verification_seed(), training, r.greedy.threads, r.greedy.pg_solver);

  json j = {{"fingerprint", fingerprint},
            {"stabilization", std::string(to_string(basis.kind))},
            {"formulation", std::string(to_string(r.greedy.formulation))},
            {"snapshots", basis.snapshot_count()},
            {"columns", basis.total_columns()},
            {"samples", rep.eta.size()},
            {"seed", r.greedy.effective_verification_seed()},
            {"max_eta", rep.max_eta},
            {"median_eta", rep.median_eta},
            {"failed_solves", rep.failed},
            {"tol", r.greedy.tol},
            {"passed", rep.max_eta <= r.greedy.tol}};
  ensure_dir(r.out_dir);
  write_text(r.out_dir / "verify.json", j.dump(2) + "\n");
  out << "verification: samples=" << rep.eta.size() << " max_eta=" << fmt(rep.max_eta)
      << " median_eta=" << fmt(rep.median_eta) << '\n';
  return exit_code::kOk;
}

int cmd_infsup(const Resolved& r, std::ostream& out) {
  const Problem problem = make_problem(r.problem);
  ReducedBasis basis;
  bool have_basis = false;
  if (fs::exists(r.basis_path)) {
    std::string fingerprint;
    basis = load_basis(r.basis_path, fingerprint);
    check_fingerprint(fingerprint, problem);
    have_basis = true;
  }

  struct Row {
    std::string kind;
    Index index;
    ParameterVector mu;
  };
  std::vector<Row> rows;
  const auto samples = sample_parameters(problem.box, r.infsup_samples, r.greedy.seed);
  for (std::size_t i = 0; i < samples.size(); ++i) rows.push_back({"sample", Index(i), samples[i]});
  if (have_basis)
    for (std::size_t i = 0; i < basis.snapshot_params.size(); ++i)
      rows.push_back({"snapshot", Index(i), basis.snapshot_params[i]});

  std::ostringstream csv;
  csv << "kind,index,beta_full,beta_reduced";
  for (Index i = 0; i < problem.box.dim(); ++i) csv << ",mu_" << (i + 1);
  csv << '\n';
  double min_full = std::numeric_limits<double>::infinity();
  double min_reduced = std::numeric_limits<double>::infinity();
  for (const auto& row : rows) {
    const double full = inf_sup_full(problem, row.mu, problem.norms);
    const double red = have_basis ? reduced_inf_sup(problem, basis, row.mu) : std::numeric_limits<double>::quiet_NaN();
    min_full = std::min(min_full, full);
    if (have_basis) min_reduced = std::min(min_reduced, red);
    csv << row.kind << ',' << row.index << ',' << fmt(full) << ',' << fmt(red);
    for (Index i = 0; i < row.mu.size(); ++i) csv << ',' << fmt(row.mu[i]);
    csv << '\n';
  }
  ensure_dir(r.out_dir);
  write_text(r.out_dir / "infsup.csv", csv.str());
  out << "inf-sup: rows=" << rows.size() << " min_full=" << fmt(min_full);
  if (have_basis) out << " min_reduced=" << fmt(min_reduced);
  out << '\n';
  return exit_code::kOk;
}

int cmd_bench(const Resolved& r, std::ostream& out) {
  const auto cells = run_grid(r.grid);
  emit_reports(cells, r.grid, r.out_dir);
  bool all_converged = true;
  for (const auto& c : cells) {
    out << cell_name(c.row) << ": " << to_string(c.row.outcome) << " N=" << c.row.n_snapshots
        << " columns=" << c.row.columns;
    if (!c.error.empty()) out << " error=" << c.error;
    out << '\n';
    if (c.row.outcome != GreedyOutcome::Converged) all_converged = false;
  }
  return all_converged ? exit_code::kOk : exit_code::kNotConverged;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Reduced-basis stabilization for parametrized optimal control", "rbstab"};
  app.set_config("--config", "", "Key-value configuration file (TOML/INI)");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  app.add_option("--problem", cfg.problem, "diffusion | graetz");
  app.add_option("--nc", cfg.nc, "Mesh level; 2^nc + 1 elements per side");
  app.add_option("--nd", cfg.nd, "Number of diffusion subdomains");
  app.add_option("--beta", cfg.beta, "Control regularization");
  app.add_option("--n_train", cfg.n_train, "Training set size");
  auto* tol_opt = app.add_option("--tol", cfg.tol, "Greedy tolerance");
  app.add_option("--max_basis", cfg.max_basis, "Maximum number of snapshots");
  app.add_option("--seed", cfg.seed, "Training seed");
  app.add_option("--verification_seed", cfg.verification_seed, "Verification seed (0 derives from --seed)");
  app.add_option("--verification_size", cfg.verification_size, "Verification set size");
  app.add_option("--formulation", cfg.formulation, "galerkin | pg");
  app.add_option("--stabilization", cfg.stabilization, "naive | supremizer | aggregation");
  app.add_option("--pg_solver", cfg.pg_solver, "normal | qr");
  app.add_option("--threads", cfg.threads, "Sweep threads; 1 is the reproducible reference");
  app.add_option("--drop_tol", cfg.drop_tol, "Gram-Schmidt dependence threshold (0 keeps every vector)");
  app.add_option("--out", cfg.out, std::string("Output directory (default $") + kOutDirEnv + " or rbstab-out)");
  app.add_option("--basis", cfg.basis, "Basis file (default <out>/basis.json)");
  app.add_option("--infsup_samples", cfg.infsup_samples, "Random parameters for infsup");
  app.add_option("--bench_nc", cfg.bench_nc, "Mesh levels for bench");
  app.add_option("--bench_nd", cfg.bench_nd, "Subdomain counts for bench");
  app.add_option("--bench_formulations", cfg.bench_formulations, "Formulations for bench");
  app.add_option("--bench_stabilizations", cfg.bench_stabilizations, "Stabilizations for bench");
  app.add_option("--cell_jobs", cfg.cell_jobs, "Bench cells run concurrently");
  app.add_flag("--quiet", cfg.quiet, "Suppress per-iteration progress");

  auto* train = app.add_subcommand("train", "Run the greedy and save basis.json and trace.csv");
  auto* verify_cmd = app.add_subcommand("verify", "Evaluate a saved basis on a fresh verification set");
  auto* infsup = app.add_subcommand("infsup", "Full and reduced inf-sup constants over sampled parameters");
  auto* bench = app.add_subcommand("bench", "Run an experiment grid and write the report");
  for (auto* sub : {train, verify_cmd, infsup, bench}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return exit_code::kUsage;
  }

  try {
    const Resolved r = resolve(cfg, tol_opt->count() > 0);
    if (train->parsed()) return cmd_train(r, out);
    if (verify_cmd->parsed()) return cmd_verify(r, out);
    if (infsup->parsed()) return cmd_infsup(r, out);
    return cmd_bench(r, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const DomainError& e) {
    err << "parameter error: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const FingerprintMismatch& e) {
    err << "fingerprint mismatch: " << e.what() << '\n';
    return exit_code::kFingerprint;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return exit_code::kIo;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_code::kNumerical;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return exit_code::kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kNumerical;
  }
}

}  // namespace rbstab
