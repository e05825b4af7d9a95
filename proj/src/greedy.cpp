#include "rbstab/greedy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>

namespace rbstab {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void summarize(IterationRecord& rec, const std::vector<OnlineSolver::Result>& results,
               const std::vector<ParameterVector>& training, Index k) {
  rec.argmax = k;
  rec.chosen = training[std::size_t(k)];
  rec.eta_max = results[std::size_t(k)].eta;
  rec.cond_at_argmax = results[std::size_t(k)].cond;
  rec.cond_max = 0.0;
  rec.failed_solves = 0;
  for (const auto& r : results) {
    if (!std::isnan(r.cond)) rec.cond_max = std::max(rec.cond_max, r.cond);
    if (r.failed) ++rec.failed_solves;
  }
}

}  // namespace

std::string_view to_string(GreedyOutcome outcome) {
  return outcome == GreedyOutcome::Converged ? "Converged" : "FailedToConverge";
}

void GreedyConfig::validate() const {
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (n_train < 1) throw ConfigError("n_train must be >= 1");
  if (max_basis < 1) throw ConfigError("max_basis must be >= 1");
  if (verification_size < 0) throw ConfigError("verification_size must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (!(drop_tol >= 0.0 && drop_tol < 1.0)) throw ConfigError("drop_tol must lie in [0, 1)");
}

std::uint64_t GreedyConfig::effective_verification_seed() const {
  return verification_seed != 0 ? verification_seed : seed + 0x9E3779B97F4A7C15ULL;
}

std::vector<ParameterVector> sample_training_set(const ParameterBox& box, Index n_max, std::uint64_t seed) {
  return sample_parameters(box, n_max, seed);
}

std::vector<OnlineSolver::Result> sweep(const OnlineSolver& solver, const std::vector<ParameterVector>& params,
                                        int threads) {
  std::vector<OnlineSolver::Result> out(params.size());
  const std::size_t count = params.size();
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = solver.evaluate(params[i]);
    return out;
  }
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < count; i += workers) out[i] = solver.evaluate(params[i]);
      });
    }
  }
  return out;
}

Index argmax_eta(const std::vector<OnlineSolver::Result>& results) {
  Index best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].eta > results[std::size_t(best)].eta) best = Index(i);
  }
  return best;
}

GreedyResult greedy_train(const Problem& problem, const GreedyConfig& config, const GreedyObserver& observer) {
  config.validate();
  const auto t0 = Clock::now();
  GreedyResult result;
  result.training = sample_training_set(problem.box, config.n_train, config.seed);
  result.basis = ReducedBasis::empty(config.stabilization, problem.n());
  GreedyTrace& trace = result.trace;
  const auto& training = result.training;

  IterationRecord first;
  first.chosen = training.front();
  first.added = true;
  first.failed_solves = 0;
  {
    const Snapshot snap = solve_full(problem, training.front());
    apply_update(result.basis, make_update(config.stabilization, snap, problem), config.drop_tol);
  }
  first.wall_seconds = seconds_since(t0);
  trace.records.push_back(first);
  if (observer) observer(first);

  std::vector<bool> unusable(training.size(), false);
  for (;;) {
    const OnlineSolver solver(problem, result.basis, config.formulation, config.pg_solver);
    std::vector<OnlineSolver::Result> results = sweep(solver, training, config.threads);

    IterationRecord rec;
    rec.iteration = Index(trace.records.size());
    rec.n_snapshots = result.basis.snapshot_count();
    rec.columns = result.basis.total_columns();
    for (std::size_t i = 0; i < results.size(); ++i)
      if (unusable[i]) results[i].eta = -1.0;
    Index k = argmax_eta(results);
    summarize(rec, results, training, k);
    trace.max_cond = std::max(trace.max_cond, rec.cond_max);
    trace.best_eta = std::min(trace.best_eta, rec.eta_max);

    if (rec.eta_max <= config.tol) {
      trace.outcome = GreedyOutcome::Converged;
    } else if (result.basis.snapshot_count() >= config.max_basis) {
      trace.outcome = GreedyOutcome::FailedToConverge;
    } else {
      // A full solve that fails removes that training point and the next
      // worst parameter is tried instead.
      for (;;) {
        try {
          const Snapshot snap = solve_full(problem, training[std::size_t(k)]);
          apply_update(result.basis, make_update(config.stabilization, snap, problem), config.drop_tol);
          rec.added = true;
          break;
        } catch (const NumericalError&) {
          unusable[std::size_t(k)] = true;
          results[std::size_t(k)].eta = -1.0;
          k = argmax_eta(results);
          if (results[std::size_t(k)].eta < 0.0) throw;
          rec.argmax = k;
          rec.chosen = training[std::size_t(k)];
        }
      }
    }
    rec.wall_seconds = seconds_since(t0);
    trace.records.push_back(rec);
    if (observer) observer(rec);
    if (!rec.added) break;
  }
  return result;
}

VerificationReport verify(const Problem& problem, const ReducedBasis& basis, Formulation formulation, Index size,
                          std::uint64_t seed, const std::vector<ParameterVector>& exclude, int threads,
                          PgSolver pg_solver) {
  VerificationReport report;
  std::set<std::vector<double>> taken;
  for (const auto& mu : exclude) taken.emplace(mu.values.data(), mu.values.data() + mu.size());

  std::mt19937_64 rng(seed);
  const ParameterBox& box = problem.box;
  std::vector<std::uniform_real_distribution<double>> dists;
  for (Index i = 0; i < box.dim(); ++i) dists.emplace_back(box.lower[i], box.upper[i]);
  while (Index(report.params.size()) < size) {
    ParameterVector mu;
    mu.values.resize(box.dim());
    for (Index i = 0; i < box.dim(); ++i) mu.values[i] = dists[std::size_t(i)](rng);
    std::vector<double> key(mu.values.data(), mu.values.data() + mu.size());
    if (!taken.insert(std::move(key)).second) continue;
    report.params.push_back(std::move(mu));
  }

  const OnlineSolver solver(problem, basis, formulation, pg_solver);
  const auto results = sweep(solver, report.params, threads);
  for (const auto& r : results) {
    report.eta.push_back(r.eta);
    if (r.failed) ++report.failed;
  }
  if (!report.eta.empty()) {
    report.max_eta = *std::max_element(report.eta.begin(), report.eta.end());
    std::vector<double> sorted = report.eta;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    report.median_eta = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  }
  return report;
}

void write_trace_csv(std::ostream& os, const GreedyTrace& trace, Index param_dim) {
  os << "iteration,N,columns,eta_max,cond_max,cond_at_argmax,failed_solves,added,argmax";
  for (Index i = 0; i < param_dim; ++i) os << ",mu_" << (i + 1);
  os << '\n';
  for (const auto& r : trace.records) {
    os << r.iteration << ',' << r.n_snapshots << ',' << r.columns << ',' << fmt(r.eta_max) << ','
       << fmt(r.cond_max) << ',' << fmt(r.cond_at_argmax) << ',' << r.failed_solves << ',' << (r.added ? 1 : 0)
       << ',' << r.argmax;
    for (Index i = 0; i < param_dim; ++i) os << ',' << (i < r.chosen.size() ? fmt(r.chosen[i]) : std::string("nan"));
    os << '\n';
  }
}

}  // namespace rbstab
