#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "rbstab/grid_fem.hpp"
#include "rbstab/parameter.hpp"
#include "rbstab/types.hpp"

namespace rbstab {

using MassFactor = Eigen::SimplicialLLT<SpMat>;

/// Norm matrices of the saddle problem. The X-norm matrix is
/// A = blockdiag(control_block, state_block); the Q-norm matrix is K_ref.
struct NormMatrices {
  double control_weight = 0.0;  // c_f
  SpMat control_block;          // c_f M
  SpMat state_block;            // M
  SpMat q_norm;                 // K_ref
  std::shared_ptr<const MassFactor> mass_factor;

  /// Solves A r = rhs for a vector over the control x state product space.
  Vec apply_x_inverse(const Vec& rhs) const;
};

struct ProblemConfig {
  ProblemKind kind = ProblemKind::Diffusion;
  int nc = 3;
  int n_subdomains = 3;
  double beta = 1e-2;
};

/// Everything parameter-independent about one benchmark instance, including
/// the affine expansion G(mu) = sum_a theta_a(mu) G_a and
/// rhs(mu) = sum_k phi_k(mu) r_k of the full KKT system.
struct Problem {
  ProblemConfig config;
  Mesh mesh;
  FemOperators ops;
  ParameterBox box;
  double control_weight = 0.0;
  NormMatrices norms;

  std::vector<SpMat> kkt_terms;
  std::vector<Vec> rhs_terms;

  Index n() const { return ops.n_interior; }
  Index full_size() const { return 3 * ops.n_interior; }
  std::string fingerprint() const;
};

Problem make_problem(const ProblemConfig& config);

/// Cost-functional weight of the control mass block: 2 beta for Diffusion,
/// beta for Graetz.
double control_weight(ProblemKind kind, double beta);

Vec kkt_coefficients(const Problem& problem, const ParameterVector& mu);
Vec rhs_coefficients(const Problem& problem, const ParameterVector& mu);

/// Parameter-dependent full-order saddle system in (f, u, lambda) ordering:
///
///   [ c_f M   0     -M  ] [f]   [0]
///   [ 0       M     C^T ] [u] = [b]
///   [ -M      C     0   ] [l]   [d]
struct FullKKT {
  ParameterVector mu;
  Index n = 0;
  double control_weight = 0.0;
  SpMat matrix;
  Vec rhs;
  SpMat mass;
  SpMat stiffness;  // C = K(mu) (+ N)

  /// Compact view B(mu) = [-M, C].
  SpMat constraint() const;
  Vec b() const { return rhs.segment(n, n); }
  Vec d() const { return rhs.segment(2 * n, n); }
};

FullKKT assemble_kkt(const Problem& problem, const ParameterVector& mu);

struct Snapshot {
  ParameterVector mu;
  Vec f;
  Vec u;
  Vec lambda;
  double residual_norm = 0.0;    // relative KKT residual
  double constraint_residual = 0.0;  // ||K u - M f - d|| / ||rhs||

  Vec stacked() const;
  Vec state_control() const;  // x_bar = (f, u)
};

Snapshot solve_full(const FullKKT& kkt);

/// Convenience: assemble and solve at mu.
Snapshot solve_full(const Problem& problem, const ParameterVector& mu);

/// Full-order inf-sup constant: sqrt of the smallest eigenvalue of
/// B A^{-1} B^T q = lambda K_ref q, computed densely.
double inf_sup_full(const Problem& problem, const ParameterVector& mu, const NormMatrices& norms);

void write_snapshot(std::ostream& os, const Snapshot& snap, const std::string& fingerprint);
Snapshot read_snapshot(std::istream& is, std::string* fingerprint = nullptr);

}  // namespace rbstab
