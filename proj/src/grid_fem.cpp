#include "rbstab/grid_fem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

namespace rbstab {

namespace {

constexpr double kGraetzSplit = 0.3;

// 2x2 Gauss-Legendre on [-1, 1].
constexpr double kGauss = 0.57735026918962576451;
constexpr std::array<double, 2> kGaussPoints{-kGauss, kGauss};

constexpr std::array<double, 4> kXiNode{-1.0, 1.0, 1.0, -1.0};
constexpr std::array<double, 4> kEtaNode{-1.0, -1.0, 1.0, 1.0};

struct ElementMatrices {
  Eigen::Matrix4d mass;
  Eigen::Matrix4d stiffness;
  Eigen::Matrix4d convection;
  Eigen::Vector4d load;
};

// Exact integration for the square [x0, x0+h] x [y0, y0+h] (convection to
// Gauss accuracy, the advection profile being quadratic in y).
ElementMatrices element_matrices(double y0, double h, bool with_convection) {
  ElementMatrices em;
  em.mass.setZero();
  em.stiffness.setZero();
  em.convection.setZero();
  em.load.setZero();
  const double det = 0.25 * h * h;
  const double scale = 2.0 / h;
  for (double xi : kGaussPoints) {
    for (double eta : kGaussPoints) {
      Eigen::Vector4d phi, dx, dy;
      for (int a = 0; a < 4; ++a) {
        phi[a] = 0.25 * (1.0 + kXiNode[a] * xi) * (1.0 + kEtaNode[a] * eta);
        dx[a] = scale * 0.25 * kXiNode[a] * (1.0 + kEtaNode[a] * eta);
        dy[a] = scale * 0.25 * kEtaNode[a] * (1.0 + kXiNode[a] * xi);
      }
      em.mass += det * phi * phi.transpose();
      em.stiffness += det * (dx * dx.transpose() + dy * dy.transpose());
      em.load += det * phi;
      if (with_convection) {
        const double y = y0 + 0.5 * h * (1.0 + eta);
        const double wx = y * (1.0 - y);
        // row i: test phi_i, column j: w . grad(phi_j)
        em.convection += det * wx * phi * dx.transpose();
      }
    }
  }
  return em;
}

bool on_edge(Edge edge, Index i, Index j, Index last) {
  switch (edge) {
    case Edge::Bottom: return j == 0;
    case Edge::Top: return j == last;
    case Edge::Left: return i == 0;
    case Edge::Right: return i == last;
  }
  return false;
}

SpMat from_triplets(Index rows, Index cols, const std::vector<Triplet>& trips) {
  SpMat m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

}  // namespace

MeshSpec MeshSpec::make(ProblemKind problem, int nc, int n_subdomains) {
  MeshSpec spec;
  spec.nc = nc;
  spec.elements_per_side = (nc >= 0 && nc < 16) ? (1 << nc) + 1 : 0;
  spec.problem = problem;
  spec.n_subdomains = problem == ProblemKind::Graetz ? 2 : n_subdomains;
  return spec;
}

void MeshSpec::validate() const {
  if (nc < 0 || nc > 12) throw ConfigError("nc must lie in [0, 12], got " + std::to_string(nc));
  if (elements_per_side < 2)
    throw ConfigError("elements_per_side must be >= 2, got " + std::to_string(elements_per_side));
  if (problem == ProblemKind::Graetz && n_subdomains != 2)
    throw ConfigError("the Graetz problem uses exactly 2 subdomains");
  if (n_subdomains < 1 || n_subdomains > elements_per_side)
    throw ConfigError("n_subdomains=" + std::to_string(n_subdomains) +
                      " must lie in [1, elements_per_side=" +
                      std::to_string(elements_per_side) + "]");
}

BoundarySpec BoundarySpec::for_problem(ProblemKind problem) {
  BoundarySpec bc;
  if (problem == ProblemKind::Diffusion) {
    bc.dirichlet_segments = {{Edge::Top, 0.0}};
    bc.neumann_segments = {Edge::Bottom, Edge::Right, Edge::Left};
  } else {
    // Inlet on the left (g = 1), outlet on the right (g = 2).
    bc.dirichlet_segments = {{Edge::Left, 1.0}, {Edge::Right, 2.0}};
    bc.neumann_segments = {Edge::Bottom, Edge::Top};
  }
  return bc;
}

void BoundarySpec::validate() const {
  std::array<int, 4> count{};
  for (const auto& seg : dirichlet_segments) ++count[static_cast<int>(seg.edge)];
  for (Edge e : neumann_segments) ++count[static_cast<int>(e)];
  for (int c : count) {
    if (c != 1) throw ConfigError("Dirichlet and Neumann segments must partition the boundary");
  }
  if (dirichlet_segments.empty()) throw ConfigError("at least one Dirichlet segment is required");
}

Mesh build_mesh(const MeshSpec& spec, const BoundarySpec& bc) {
  spec.validate();
  bc.validate();

  Mesh mesh;
  mesh.spec = spec;
  mesh.boundary = bc;
  const Index ne = spec.elements_per_side;
  const Index np = ne + 1;
  mesh.h = 1.0 / static_cast<double>(ne);

  mesh.nodes.resize(np * np, 2);
  mesh.node_is_dirichlet.assign(np * np, false);
  mesh.node_dirichlet_value = Vec::Zero(np * np);
  for (Index j = 0; j < np; ++j) {
    for (Index i = 0; i < np; ++i) {
      const Index k = j * np + i;
      mesh.nodes(k, 0) = static_cast<double>(i) * mesh.h;
      mesh.nodes(k, 1) = static_cast<double>(j) * mesh.h;
      for (const auto& seg : bc.dirichlet_segments) {
        if (on_edge(seg.edge, i, j, ne)) {
          mesh.node_is_dirichlet[k] = true;
          mesh.node_dirichlet_value[k] = seg.value;
          break;
        }
      }
    }
  }

  mesh.elements.resize(ne * ne, 4);
  mesh.element_subdomain.resize(ne * ne);
  for (Index j = 0; j < ne; ++j) {
    const double yc = (static_cast<double>(j) + 0.5) * mesh.h;
    int label;
    if (spec.problem == ProblemKind::Graetz) {
      label = yc < kGraetzSplit ? 1 : 2;
    } else {
      const int strip = static_cast<int>(std::floor(yc * spec.n_subdomains));
      label = std::min(strip, spec.n_subdomains - 1) + 1;
    }
    for (Index i = 0; i < ne; ++i) {
      const Index e = j * ne + i;
      const Index ll = j * np + i;
      mesh.elements.row(e) << ll, ll + 1, ll + 1 + np, ll + np;
      mesh.element_subdomain[e] = label;
    }
  }
  return mesh;
}

FemOperators assemble_operators(const Mesh& mesh) {
  FemOperators ops;
  ops.spec = mesh.spec;
  const Index nn = mesh.nodes.rows();
  const int nsub = mesh.spec.n_subdomains;
  const bool graetz = mesh.spec.problem == ProblemKind::Graetz;
  ops.n_nodes = nn;

  ops.interior_of_node.assign(nn, -1);
  for (Index k = 0; k < nn; ++k) {
    if (mesh.node_is_dirichlet[k]) {
      ops.dirichlet_nodes.push_back(k);
    } else {
      ops.interior_of_node[k] = static_cast<Index>(ops.interior_nodes.size());
      ops.interior_nodes.push_back(k);
    }
  }
  const Index ni = static_cast<Index>(ops.interior_nodes.size());
  const Index nd = static_cast<Index>(ops.dirichlet_nodes.size());
  ops.n_interior = ni;
  ops.dirichlet_values.resize(nd);
  std::vector<Index> dirichlet_of_node(nn, -1);
  for (Index d = 0; d < nd; ++d) {
    dirichlet_of_node[ops.dirichlet_nodes[d]] = d;
    ops.dirichlet_values[d] = mesh.node_dirichlet_value[ops.dirichlet_nodes[d]];
  }

  std::vector<Triplet> mass_full, mass_int, conv_full, conv_int, conv_lift;
  std::vector<std::vector<Triplet>> stiff_int(nsub), stiff_lift(nsub);
  std::vector<Vec> loads(nsub, Vec::Zero(ni));

  const Index ne = mesh.spec.elements_per_side;
  for (Index j = 0; j < ne; ++j) {
    const double y0 = static_cast<double>(j) * mesh.h;
    const ElementMatrices em = element_matrices(y0, mesh.h, graetz);
    for (Index i = 0; i < ne; ++i) {
      const Index e = j * ne + i;
      const int q = mesh.element_subdomain[e] - 1;
      for (int a = 0; a < 4; ++a) {
        const Index ga = mesh.elements(e, a);
        const Index ia = ops.interior_of_node[ga];
        if (ia >= 0) loads[q][ia] += em.load[a];
        for (int b = 0; b < 4; ++b) {
          const Index gb = mesh.elements(e, b);
          const Index ib = ops.interior_of_node[gb];
          mass_full.emplace_back(ga, gb, em.mass(a, b));
          if (graetz) conv_full.emplace_back(ga, gb, em.convection(a, b));
          if (ia < 0) continue;
          if (ib >= 0) {
            mass_int.emplace_back(ia, ib, em.mass(a, b));
            stiff_int[q].emplace_back(ia, ib, em.stiffness(a, b));
            if (graetz) conv_int.emplace_back(ia, ib, em.convection(a, b));
          } else {
            const Index db = dirichlet_of_node[gb];
            stiff_lift[q].emplace_back(ia, db, em.stiffness(a, b));
            if (graetz) conv_lift.emplace_back(ia, db, em.convection(a, b));
          }
        }
      }
    }
  }

  ops.mass = from_triplets(ni, ni, mass_int);
  ops.mass_full = from_triplets(nn, nn, mass_full);
  ops.convection = from_triplets(ni, ni, conv_int);
  ops.convection_full = from_triplets(nn, nn, conv_full);
  ops.convection_lift = from_triplets(ni, nd, conv_lift);
  ops.stiffness_ref = SpMat(ni, ni);
  for (int q = 0; q < nsub; ++q) {
    ops.stiffness.push_back(from_triplets(ni, ni, stiff_int[q]));
    ops.stiffness_lift.push_back(from_triplets(ni, nd, stiff_lift[q]));
    ops.stiffness_ref += ops.stiffness.back();
  }
  ops.stiffness_ref.makeCompressed();
  ops.subdomain_loads = std::move(loads);
  return ops;
}

SpMat stiffness_operator(const FemOperators& ops, const ParameterVector& mu) {
  SpMat k(ops.n_interior, ops.n_interior);
  if (ops.spec.problem == ProblemKind::Graetz) {
    k = mu[0] * ops.stiffness_ref + ops.convection;
  } else {
    for (std::size_t q = 0; q < ops.stiffness.size(); ++q) k += mu[Index(q)] * ops.stiffness[q];
  }
  k.makeCompressed();
  return k;
}

Vec lift_rhs(const FemOperators& ops, const ParameterVector& mu) {
  Vec d = Vec::Zero(ops.n_interior);
  if (ops.dirichlet_values.size() == 0) return d;
  if (ops.spec.problem == ProblemKind::Graetz) {
    for (const auto& lift : ops.stiffness_lift) d -= mu[0] * (lift * ops.dirichlet_values);
    d -= ops.convection_lift * ops.dirichlet_values;
  } else {
    for (std::size_t q = 0; q < ops.stiffness_lift.size(); ++q)
      d -= mu[Index(q)] * (ops.stiffness_lift[q] * ops.dirichlet_values);
  }
  return d;
}

Vec assemble_target_rhs(const FemOperators& ops, const ParameterVector& mu) {
  parameter_box(ops.spec).check(mu);
  Vec b = Vec::Zero(ops.n_interior);
  if (ops.spec.problem == ProblemKind::Graetz) {
    b = mu[1] * ops.subdomain_loads[0] + mu[2] * ops.subdomain_loads[1];
  } else {
    for (const auto& load : ops.subdomain_loads) b += load;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Parameter boxes

bool ParameterBox::contains(const ParameterVector& mu) const {
  if (mu.size() != dim()) return false;
  return (mu.values.array() >= lower.array()).all() && (mu.values.array() <= upper.array()).all();
}

void ParameterBox::check(const ParameterVector& mu) const {
  if (mu.size() != dim()) {
    throw DomainError("parameter has dimension " + std::to_string(mu.size()) + ", expected " +
                      std::to_string(dim()));
  }
  for (Index i = 0; i < dim(); ++i) {
    if (!(mu[i] >= lower[i] && mu[i] <= upper[i])) {
      throw DomainError("parameter component " + std::to_string(i + 1) + " = " +
                        std::to_string(mu[i]) + " outside [" + std::to_string(lower[i]) + ", " +
                        std::to_string(upper[i]) + "]");
    }
  }
}

ParameterBox parameter_box(const MeshSpec& spec) {
  ParameterBox box;
  if (spec.problem == ProblemKind::Graetz) {
    box.lower = Eigen::Vector3d(1.0 / 20.0, 0.5, 1.5);
    box.upper = Eigen::Vector3d(1.0 / 3.0, 1.5, 2.5);
  } else {
    box.lower = Vec::Constant(spec.n_subdomains, 0.01);
    box.upper = Vec::Constant(spec.n_subdomains, 1.0);
  }
  return box;
}

std::vector<ParameterVector> sample_parameters(const ParameterBox& box, Index count,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> dists;
  for (Index i = 0; i < box.dim(); ++i) dists.emplace_back(box.lower[i], box.upper[i]);
  std::vector<ParameterVector> out(static_cast<std::size_t>(count));
  for (auto& mu : out) {
    mu.values.resize(box.dim());
    for (Index i = 0; i < box.dim(); ++i) mu.values[i] = dists[std::size_t(i)](rng);
  }
  return out;
}

}  // namespace rbstab
