#include <random>

#include "doctest.h"
#include "rbstab/linalg.hpp"
#include "rbstab/stabilization.hpp"

using namespace rbstab;

namespace {

Vec apply_x_norm(const Problem& p, const Vec& x) {
  const Index n = p.n();
  Vec out(2 * n);
  out.head(n) = p.norms.control_block * x.head(n);
  out.tail(n) = p.norms.state_block * x.tail(n);
  return out;
}

Vec apply_bt(const Problem& p, const ParameterVector& mu, const Vec& q) {
  const Index n = p.n();
  Vec out(2 * n);
  out.head(n) = -(p.ops.mass * q);
  out.tail(n) = stiffness_operator(p.ops, mu).transpose() * q;
  return out;
}

}  // namespace

TEST_CASE("supremizer of the zero adjoint is zero") {
  const Problem p = make_problem({ProblemKind::Diffusion, 2, 3, 1e-2});
  CHECK(supremizer(p, ParameterVector{p.box.midpoint()}, Vec::Zero(p.n())).norm() == 0.0);
  CHECK_THROWS_AS(supremizer(p, ParameterVector{p.box.midpoint()}, Vec::Zero(p.n() + 1)), ShapeError);
}

TEST_CASE("supremizer solves A r = B^T lambda and maximizes the quotient") {
  for (ProblemKind kind : {ProblemKind::Diffusion, ProblemKind::Graetz}) {
    const Problem p = make_problem({kind, 3, kind == ProblemKind::Graetz ? 2 : 3, 1e-2});
    const auto mu = sample_parameters(p.box, 1, 4).front();
    const Snapshot s = solve_full(p, mu);
    const Vec r = supremizer(p, mu, s.lambda);
    const Vec btl = apply_bt(p, mu, s.lambda);
    CHECK((apply_x_norm(p, r) - btl).norm() <= 1e-12 * btl.norm());

    auto quotient = [&](const Vec& x) { return btl.dot(x) / std::sqrt(x.dot(apply_x_norm(p, x))); };
    const double best = quotient(r);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 30; ++t) {
      Vec x(2 * p.n());
      for (Index i = 0; i < x.size(); ++i) x[i] = nd(rng);
      CHECK(quotient(x) <= best * (1.0 + 1e-12));
      CHECK(quotient(r + 1e-3 * x) <= best * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("column laws per stabilization") {
  const Problem p = make_problem({ProblemKind::Graetz, 3, 2, 1e-2});
  const auto mus = sample_parameters(p.box, 4, 6);
  for (StabilizationKind kind : {StabilizationKind::Naive, StabilizationKind::Supremizer, StabilizationKind::Aggregation}) {
    ReducedBasis b = ReducedBasis::empty(kind, p.n());
    Index n = 0;
    for (const auto& mu : mus) {
      apply_update(b, make_update(kind, solve_full(p, mu), p), 0.0);
      ++n;
      const Index per = kind == StabilizationKind::Naive ? 2 : kind == StabilizationKind::Supremizer ? 3 : 5;
      CHECK(b.total_columns() == per * n);
      CHECK(b.snapshot_count() == n);
      for (Index k = 0; k < b.block_count(); ++k)
        CHECK(linalg::orthonormality_error(b.blocks[std::size_t(k)]) <= 1e-12);
      if (kind == StabilizationKind::Aggregation) CHECK(b.blocks[1] == b.blocks[2]);
    }
  }
}

TEST_CASE("update kind must match the basis") {
  const Problem p = make_problem({ProblemKind::Diffusion, 2, 3, 1e-2});
  ReducedBasis b = ReducedBasis::empty(StabilizationKind::Aggregation, p.n());
  const Snapshot s = solve_full(p, ParameterVector{p.box.midpoint()});
  CHECK_THROWS_AS(apply_update(b, naive_update(s)), ConfigError);
}

TEST_CASE("degenerate snapshot with identical state and adjoint") {
  const Problem p = make_problem({ProblemKind::Diffusion, 2, 3, 1e-2});
  Snapshot s = solve_full(p, ParameterVector{p.box.midpoint()});
  s.lambda = s.u;
  ReducedBasis b = ReducedBasis::empty(StabilizationKind::Aggregation, p.n());
  const ApplyReport r = apply_update(b, aggregation_update(s));
  CHECK(b.block_columns(1) == 1);
  CHECK(b.block_columns(2) == 1);
  CHECK(b.total_columns() == 3);
  CHECK(r.dropped == 2);
  REQUIRE(b.drops.size() == 1);
  CHECK(b.drops[0].block == "Q_u");
  CHECK(b.drops[0].snapshot == 1);
}

TEST_CASE("naive basis has a singular constraint block at snapshot parameters") {
  const Problem p = make_problem({ProblemKind::Diffusion, 3, 3, 1e-2});
  const auto mus = sample_parameters(p.box, 3, 17);
  ReducedBasis b = ReducedBasis::empty(StabilizationKind::Naive, p.n());
  for (const auto& mu : mus) apply_update(b, naive_update(solve_full(p, mu)));
  for (const auto& mu : mus) {
    const auto [smin, smax] = linalg::singular_range(reduced_constraint_block(b, assemble_kkt(p, mu)));
    CHECK(smin <= 1e-10 * smax);
    CHECK(reduced_inf_sup(p, b, mu) <= 1e-10);
  }
}

TEST_CASE("exact supremizer enrichment meets the full inf-sup bound") {
  const Problem p = make_problem({ProblemKind::Diffusion, 2, 3, 1e-2});
  const auto mus = sample_parameters(p.box, 3, 40);
  ReducedBasis b = ReducedBasis::empty(StabilizationKind::Aggregation, p.n());
  for (const auto& mu : mus) apply_update(b, aggregation_update(solve_full(p, mu)), 0.0);
  for (const auto& mu : sample_parameters(p.box, 4, 41)) {
    const EnrichedSpaces e = exact_supremizer_basis(p, b, mu);
    CHECK(e.q_columns.cols() == b.block_columns(2));
    CHECK(linalg::orthonormality_error(e.x_columns) <= 1e-12);
    CHECK(reduced_inf_sup(p, e.x_columns, e.q_columns, mu) >= inf_sup_full(p, mu, p.norms) - 1e-8);
  }
}

TEST_CASE("dense inf-sup constant matches the Schur eigenvalue route") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  auto random = [&](Index r, Index c) {
    Mat m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
  };
  const Mat b = random(4, 7);
  const Mat gx = random(7, 7), gq = random(4, 4);
  const Mat x = gx * gx.transpose() + Mat::Identity(7, 7);
  const Mat q = gq * gq.transpose() + Mat::Identity(4, 4);
  const Mat s = b * x.inverse() * b.transpose();
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(0.5 * (s + s.transpose()), q);
  CHECK(linalg::inf_sup_constant(b, x, q) == doctest::Approx(std::sqrt(ges.eigenvalues().minCoeff())).epsilon(1e-10));
  CHECK(linalg::inf_sup_constant(Mat(b.transpose()), q, x) == 0.0);
}

TEST_CASE("stabilized bases keep a positive reduced inf-sup constant") {
  const Problem p = make_problem({ProblemKind::Diffusion, 2, 3, 1e-2});
  const auto mus = sample_parameters(p.box, 3, 12);
  for (StabilizationKind kind : {StabilizationKind::Supremizer, StabilizationKind::Aggregation}) {
    ReducedBasis b = ReducedBasis::empty(kind, p.n());
    for (const auto& mu : mus) apply_update(b, make_update(kind, solve_full(p, mu), p), 0.0);
    for (const auto& mu : sample_parameters(p.box, 6, 13)) CHECK(reduced_inf_sup(p, b, mu) >= 1e-8);
  }
}
