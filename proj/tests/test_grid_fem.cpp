#include <cmath>
#include <random>

#include "doctest.h"
#include "rbstab/full_model.hpp"

using namespace rbstab;

namespace {

Mesh mesh_for(ProblemKind kind, int nc, int nd) {
  return build_mesh(MeshSpec::make(kind, nc, nd), BoundarySpec::for_problem(kind));
}

// Reference Q1 element matrices on a square of side h, nodes counter-clockwise
// from the lower-left corner.
Eigen::Matrix4d q1_stiffness() {
  Eigen::Matrix4d k;
  k << 4, -1, -2, -1,
      -1, 4, -1, -2,
      -2, -1, 4, -1,
      -1, -2, -1, 4;
  return k / 6.0;
}

Eigen::Matrix4d q1_mass(double h) {
  Eigen::Matrix4d m;
  m << 4, 2, 1, 2,
       2, 4, 2, 1,
       1, 2, 4, 2,
       2, 1, 2, 4;
  return m * h * h / 36.0;
}

// Dense full-node assembly with a per-element coefficient.
Mat assemble_dense(const Mesh& mesh, const Eigen::Matrix4d& local, const std::vector<double>& coeff) {
  const Index nn = mesh.nodes.rows();
  Mat a = Mat::Zero(nn, nn);
  for (Index e = 0; e < mesh.elements.rows(); ++e)
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) a(mesh.elements(e, r), mesh.elements(e, c)) += coeff[std::size_t(e)] * local(r, c);
  return a;
}

Mat interior_block(const Mat& full, const FemOperators& ops) {
  const Index n = ops.n_interior;
  Mat out(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) out(i, j) = full(ops.interior_nodes[std::size_t(i)], ops.interior_nodes[std::size_t(j)]);
  return out;
}

double rel_max(const Mat& a, const Mat& b) { return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("mesh counts follow the refinement formulas") {
  for (int nc = 1; nc <= 5; ++nc) {
    const Index e = (Index(1) << nc) + 1;
    const Mesh d = mesh_for(ProblemKind::Diffusion, nc, 3 > e ? 1 : 3);
    CHECK(d.elements.rows() == e * e);
    CHECK(d.nodes.rows() == (e + 1) * (e + 1));
    const auto dir = std::count(d.node_is_dirichlet.begin(), d.node_is_dirichlet.end(), true);
    CHECK(dir == e + 1);

    const Mesh g = mesh_for(ProblemKind::Graetz, nc, 2);
    const auto gdir = std::count(g.node_is_dirichlet.begin(), g.node_is_dirichlet.end(), true);
    CHECK(gdir == 2 * (e + 1));
  }
  const Mesh m = mesh_for(ProblemKind::Diffusion, 3, 3);
  CHECK(m.elements.rows() == 81);
  CHECK(m.nodes.rows() == 100);
}

TEST_CASE("top edge is the only Dirichlet edge for diffusion") {
  const Mesh m = mesh_for(ProblemKind::Diffusion, 3, 3);
  for (Index k = 0; k < m.nodes.rows(); ++k) {
    CHECK(m.node_is_dirichlet[std::size_t(k)] == (m.nodes(k, 1) == 1.0));
    if (m.node_is_dirichlet[std::size_t(k)]) CHECK(m.node_dirichlet_value[k] == 0.0);
  }
}

TEST_CASE("graetz boundary data is 1 on the left edge and 2 on the right edge") {
  const Mesh m = mesh_for(ProblemKind::Graetz, 2, 2);
  for (Index k = 0; k < m.nodes.rows(); ++k) {
    const double x = m.nodes(k, 0);
    if (x == 0.0) {
      CHECK(m.node_is_dirichlet[std::size_t(k)]);
      CHECK(m.node_dirichlet_value[k] == 1.0);
    } else if (x == 1.0) {
      CHECK(m.node_is_dirichlet[std::size_t(k)]);
      CHECK(m.node_dirichlet_value[k] == 2.0);
    } else {
      CHECK_FALSE(m.node_is_dirichlet[std::size_t(k)]);
    }
  }
}

TEST_CASE("subdomain labels follow the element centroid") {
  SUBCASE("nine rows in three strips") {
    const Mesh m = mesh_for(ProblemKind::Diffusion, 3, 3);
    for (Index e = 0; e < 81; ++e) {
      const Index row = e / 9 + 1;  // 1-based element row from the bottom
      CHECK(m.element_subdomain[std::size_t(e)] == int((row - 1) / 3 + 1));
    }
  }
  SUBCASE("uneven split uses floor of the centroid height") {
    const Mesh m = mesh_for(ProblemKind::Diffusion, 5, 10);
    for (Index e = 0; e < m.elements.rows(); ++e) {
      const double yc = (double(e / 33) + 0.5) / 33.0;
      const int expect = std::min(int(std::floor(yc * 10)), 9) + 1;
      CHECK(m.element_subdomain[std::size_t(e)] == expect);
    }
  }
  SUBCASE("single subdomain") {
    const Mesh m = mesh_for(ProblemKind::Diffusion, 2, 1);
    for (int s : m.element_subdomain) CHECK(s == 1);
  }
  SUBCASE("graetz split at 0.3") {
    const Mesh m = mesh_for(ProblemKind::Graetz, 3, 2);
    for (Index e = 0; e < m.elements.rows(); ++e) {
      const double yc = (double(e / 9) + 0.5) / 9.0;
      CHECK(m.element_subdomain[std::size_t(e)] == (yc < 0.3 ? 1 : 2));
    }
  }
}

TEST_CASE("invalid mesh specifications are rejected") {
  CHECK_THROWS_AS(MeshSpec::make(ProblemKind::Diffusion, 1, 4).validate(), ConfigError);
  CHECK_THROWS_AS(MeshSpec::make(ProblemKind::Diffusion, -1, 1).validate(), ConfigError);
  CHECK_THROWS_AS(MeshSpec::make(ProblemKind::Diffusion, 3, 0).validate(), ConfigError);
  BoundarySpec bad = BoundarySpec::for_problem(ProblemKind::Diffusion);
  bad.neumann_segments.pop_back();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("mass matrix integrates the constant function") {
  for (ProblemKind kind : {ProblemKind::Diffusion, ProblemKind::Graetz}) {
    const Mesh m = mesh_for(kind, 3, kind == ProblemKind::Graetz ? 2 : 3);
    const FemOperators ops = assemble_operators(m);
    const Vec ones = Vec::Ones(ops.n_nodes);
    CHECK(ones.dot(ops.mass_full * ones) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("stiffness annihilates constants once the lift columns are included") {
  const FemOperators ops = assemble_operators(mesh_for(ProblemKind::Diffusion, 3, 3));
  Vec r = Vec::Zero(ops.n_interior);
  for (std::size_t q = 0; q < ops.stiffness.size(); ++q) {
    r += ops.stiffness[q] * Vec::Ones(ops.n_interior);
    r += ops.stiffness_lift[q] * Vec::Ones(Index(ops.dirichlet_nodes.size()));
  }
  CHECK(r.cwiseAbs().maxCoeff() < 1e-13);

  const FemOperators g = assemble_operators(mesh_for(ProblemKind::Graetz, 3, 2));
  const Vec conv = g.convection * Vec::Ones(g.n_interior) + g.convection_lift * Vec::Ones(Index(g.dirichlet_nodes.size()));
  CHECK(conv.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("assembled matrices match an independent element-by-element assembly") {
  const Mesh m = mesh_for(ProblemKind::Diffusion, 3, 3);
  const FemOperators ops = assemble_operators(m);
  const std::vector<double> one(std::size_t(m.elements.rows()), 1.0);

  CHECK(rel_max(Mat(ops.mass), interior_block(assemble_dense(m, q1_mass(m.h), one), ops)) < 1e-14);
  CHECK(rel_max(Mat(ops.stiffness_ref), interior_block(assemble_dense(m, q1_stiffness(), one), ops)) < 1e-14);

  for (int q = 1; q <= 3; ++q) {
    std::vector<double> mask(one.size());
    for (std::size_t e = 0; e < mask.size(); ++e) mask[e] = m.element_subdomain[e] == q ? 1.0 : 0.0;
    const Mat oracle = interior_block(assemble_dense(m, q1_stiffness(), mask), ops);
    CHECK(rel_max(Mat(ops.stiffness[std::size_t(q - 1)]), oracle) < 1e-14);
  }
  // K_1 + K_2 + K_3 = K_ref
  SpMat sum = ops.stiffness[0] + ops.stiffness[1] + ops.stiffness[2];
  CHECK(rel_max(Mat(sum), Mat(ops.stiffness_ref)) < 1e-15);
}

TEST_CASE("interior stiffness stencil is 8/3 and -1/3") {
  const Mesh m = mesh_for(ProblemKind::Diffusion, 3, 3);
  const FemOperators ops = assemble_operators(m);
  const Index np = 10;
  const Index node = 4 * np + 4;
  const Index i = ops.interior_of_node[std::size_t(node)];
  REQUIRE(i >= 0);
  CHECK(ops.stiffness_ref.coeff(i, i) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
  for (Index dj = -1; dj <= 1; ++dj)
    for (Index di = -1; di <= 1; ++di) {
      if (di == 0 && dj == 0) continue;
      const Index j = ops.interior_of_node[std::size_t(node + dj * np + di)];
      CHECK(ops.stiffness_ref.coeff(i, j) == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
    }
}

TEST_CASE("matrices have the expected symmetry and definiteness") {
  const FemOperators ops = assemble_operators(mesh_for(ProblemKind::Diffusion, 2, 3));
  const Mat m = ops.mass;
  const Mat k = ops.stiffness_ref;
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Mat>(m).eigenvalues().minCoeff() > 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Mat>(k).eigenvalues().minCoeff() > 0.0);
  for (const auto& kq : ops.stiffness)
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(Mat(kq)).eigenvalues().minCoeff() > -1e-13);
}

TEST_CASE("diffusion target load is the lumped mass of the constant target") {
  const FemOperators ops = assemble_operators(mesh_for(ProblemKind::Diffusion, 3, 3));
  const Vec full = ops.mass_full * Vec::Ones(ops.n_nodes);
  ParameterVector mu{Vec::Constant(3, 0.5)};
  const Vec b = assemble_target_rhs(ops, mu);
  for (Index i = 0; i < ops.n_interior; ++i)
    CHECK(b[i] == doctest::Approx(full[ops.interior_nodes[std::size_t(i)]]).epsilon(1e-14));
  CHECK(lift_rhs(ops, mu).norm() == 0.0);
}

TEST_CASE("graetz target load integrates the piecewise target") {
  const Mesh m = mesh_for(ProblemKind::Graetz, 3, 2);
  const FemOperators ops = assemble_operators(m);
  SUBCASE("constant target") {
    ParameterVector mu{Vec(Eigen::Vector3d(0.1, 1.5, 1.5))};
    const Vec full = 1.5 * (ops.mass_full * Vec::Ones(ops.n_nodes));
    const Vec b = assemble_target_rhs(ops, mu);
    for (Index i = 0; i < ops.n_interior; ++i)
      CHECK(b[i] == doctest::Approx(full[ops.interior_nodes[std::size_t(i)]]).epsilon(1e-14));
  }
  SUBCASE("two values") {
    ParameterVector mu{Vec(Eigen::Vector3d(0.1, 0.7, 2.1))};
    // The integral of a Q1 basis function over one element is h^2 / 4.
    Vec oracle = Vec::Zero(ops.n_nodes);
    for (Index e = 0; e < m.elements.rows(); ++e) {
      const double v = m.element_subdomain[std::size_t(e)] == 1 ? 0.7 : 2.1;
      for (int c = 0; c < 4; ++c) oracle[m.elements(e, c)] += v * m.h * m.h / 4.0;
    }
    const Vec b = assemble_target_rhs(ops, mu);
    double sum_b = 0.0, sum_o = 0.0;
    for (Index i = 0; i < ops.n_interior; ++i) {
      CHECK(b[i] == doctest::Approx(oracle[ops.interior_nodes[std::size_t(i)]]).epsilon(1e-13));
      sum_b += b[i];
      sum_o += oracle[ops.interior_nodes[std::size_t(i)]];
    }
    CHECK(sum_b == doctest::Approx(sum_o).epsilon(1e-14));
  }
}

TEST_CASE("graetz lift carries the Dirichlet data") {
  const FemOperators ops = assemble_operators(mesh_for(ProblemKind::Graetz, 2, 2));
  ParameterVector mu{Vec(Eigen::Vector3d(0.2, 1.0, 2.0))};
  Vec expect = -(ops.convection_lift * ops.dirichlet_values);
  for (const auto& lift : ops.stiffness_lift) expect -= 0.2 * (lift * ops.dirichlet_values);
  CHECK((lift_rhs(ops, mu) - expect).norm() <= 1e-14 * expect.norm());
  CHECK(expect.norm() > 0.0);
}

TEST_CASE("affine stiffness expansion is consistent") {
  const Mesh m = mesh_for(ProblemKind::Diffusion, 3, 3);
  const FemOperators ops = assemble_operators(m);
  const ParameterBox box = parameter_box(m.spec);
  const auto samples = sample_parameters(box, 100, 7);
  for (const auto& mu : samples) {
    const SpMat k = stiffness_operator(ops, mu);
    SpMat sum = mu[0] * ops.stiffness[0] + mu[1] * ops.stiffness[1] + mu[2] * ops.stiffness[2];
    CHECK(Mat(k - sum).cwiseAbs().maxCoeff() == 0.0);
  }
  // Direct assembly with the coefficient field evaluated per element.
  const auto& mu = samples.front();
  std::vector<double> sigma(std::size_t(m.elements.rows()));
  for (std::size_t e = 0; e < sigma.size(); ++e) sigma[e] = mu[m.element_subdomain[e] - 1];
  const Mat direct = interior_block(assemble_dense(m, q1_stiffness(), sigma), ops);
  CHECK(rel_max(Mat(stiffness_operator(ops, mu)), direct) < 1e-14);
}

TEST_CASE("parameters outside the box are rejected") {
  const FemOperators ops = assemble_operators(mesh_for(ProblemKind::Diffusion, 2, 3));
  CHECK_THROWS_AS(assemble_target_rhs(ops, ParameterVector{Vec::Constant(3, 2.0)}), DomainError);
  CHECK_THROWS_AS(assemble_target_rhs(ops, ParameterVector{Vec::Constant(2, 0.5)}), DomainError);
}
