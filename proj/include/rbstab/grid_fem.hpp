#pragma once

#include <vector>

#include "rbstab/parameter.hpp"
#include "rbstab/types.hpp"

namespace rbstab {

/// Uniform Q1 mesh of the unit square with (2^nc + 1)^2 square elements.
struct MeshSpec {
  int nc = 3;
  int elements_per_side = 9;
  ProblemKind problem = ProblemKind::Diffusion;
  /// Number of horizontal strips. Graetz always uses 2, split at y = 0.3.
  int n_subdomains = 3;

  static MeshSpec make(ProblemKind problem, int nc, int n_subdomains = 3);
  /// Throws ConfigError when an invariant is violated.
  void validate() const;
  Index node_count() const { return Index(elements_per_side + 1) * (elements_per_side + 1); }
  Index element_count() const { return Index(elements_per_side) * elements_per_side; }
};

enum class Edge { Bottom, Right, Top, Left };

struct DirichletSegment {
  Edge edge;
  double value;  // constant boundary data g
};

struct BoundarySpec {
  std::vector<DirichletSegment> dirichlet_segments;
  std::vector<Edge> neumann_segments;

  static BoundarySpec for_problem(ProblemKind problem);
  void validate() const;
};

struct Mesh {
  MeshSpec spec;
  BoundarySpec boundary;
  double h = 0.0;
  Eigen::Matrix<double, Eigen::Dynamic, 2> nodes;
  /// Counter-clockwise node indices starting at the lower-left corner.
  Eigen::Matrix<Index, Eigen::Dynamic, 4> elements;
  /// 1-based subdomain label per element.
  std::vector<int> element_subdomain;
  std::vector<bool> node_is_dirichlet;
  Vec node_dirichlet_value;
};

Mesh build_mesh(const MeshSpec& spec, const BoundarySpec& bc);

/// Parameter-independent finite-element operators. Rows and columns of every
/// "interior" matrix are indexed by test functions, i.e. non-Dirichlet nodes.
struct FemOperators {
  MeshSpec spec;
  Index n_nodes = 0;
  Index n_interior = 0;

  std::vector<Index> interior_of_node;  // -1 on Dirichlet nodes
  std::vector<Index> interior_nodes;
  std::vector<Index> dirichlet_nodes;
  Vec dirichlet_values;

  SpMat mass;
  SpMat mass_full;
  std::vector<SpMat> stiffness;  // K_q per subdomain
  SpMat stiffness_ref;           // sum of K_q (sigma = 1)
  SpMat convection;              // w . grad(phi_j) phi_i, zero for Diffusion
  SpMat convection_full;

  /// Interior-by-Dirichlet coupling blocks used for the lift term.
  std::vector<SpMat> stiffness_lift;
  SpMat convection_lift;

  /// Integral of phi_i over each subdomain, interior rows.
  std::vector<Vec> subdomain_loads;
};

FemOperators assemble_operators(const Mesh& mesh);

/// K(mu): sum_q mu_q K_q for Diffusion, mu_1 K_ref + N for Graetz.
SpMat stiffness_operator(const FemOperators& ops, const ParameterVector& mu);

/// Lift contribution d_mu = -(K(mu) restricted to Dirichlet columns) g.
Vec lift_rhs(const FemOperators& ops, const ParameterVector& mu);

/// Target load b_mu with entries int(u_hat phi_i) over interior test functions.
Vec assemble_target_rhs(const FemOperators& ops, const ParameterVector& mu);

}  // namespace rbstab
