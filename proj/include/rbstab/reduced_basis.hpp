#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rbstab/full_model.hpp"
#include "rbstab/types.hpp"

namespace rbstab {

/// ThreeBlock: (Q_f, Q_u, Q_lambda). TwoBlock: (Q_xbar, Q_lambda) where Q_xbar
/// acts on the stacked control-state vector.
enum class BasisLayout { ThreeBlock, TwoBlock };

BasisLayout layout_for(StabilizationKind kind);

/// Vector rejected by Gram-Schmidt because it was (numerically) in the span.
struct DropRecord {
  Index snapshot = 0;  // 1-based snapshot number
  std::string block;
  double ratio = 0.0;  // remaining norm / original norm
};

struct ReducedBasis {
  StabilizationKind kind = StabilizationKind::Aggregation;
  Index n = 0;  // interior DOFs per field
  std::vector<Mat> blocks;
  std::vector<ParameterVector> snapshot_params;
  std::vector<DropRecord> drops;

  static ReducedBasis empty(StabilizationKind kind, Index n);

  BasisLayout layout() const { return layout_for(kind); }
  Index block_count() const { return Index(blocks.size()); }
  Index block_rows(Index b) const { return blocks[std::size_t(b)].rows(); }
  Index block_columns(Index b) const { return blocks[std::size_t(b)].cols(); }
  Index row_offset(Index b) const;
  std::string block_name(Index b) const;
  Index snapshot_count() const { return Index(snapshot_params.size()); }
  Index total_columns() const;
  bool is_empty() const { return total_columns() == 0; }

  /// Dense block-diagonal Q of size 3n x total_columns().
  Mat expand() const;
  /// Columns spanning the control-state space, embedded in R^{2n}.
  Mat state_control_columns() const;
  const Mat& adjoint_block() const { return blocks.back(); }
};

struct ExtendReport {
  Index added = 0;
  std::vector<Index> dropped;  // positions in the input list
};

/// Appends `vectors` to block `block` by modified Gram-Schmidt with one
/// re-orthogonalization pass. Vectors whose remaining norm falls below
/// drop_tol times their original norm are skipped and reported.
ExtendReport orthonormal_extend(ReducedBasis& basis, Index block, std::span<const Vec> vectors,
                                double drop_tol = 1e-10);

struct ReducedSystem {
  Mat matrix;
  Vec rhs;
  Formulation formulation = Formulation::Galerkin;
  double cond = 0.0;
};

/// How the Petrov-Galerkin least-squares problem is solved. The normal
/// equations are the reference path; QR is offered for comparison.
enum class PgSolver { NormalEquations, QR };

/// Projects the full system: Galerkin Q^T G Q, or Petrov-Galerkin (GQ)^T (GQ).
ReducedSystem project(const ReducedBasis& basis, const FullKKT& kkt, Formulation formulation);

/// Condition numbers above this mark the reduced solve as failed.
inline constexpr double kSingularCondition = 1.0 / std::numeric_limits<double>::epsilon();

struct ReducedSolution {
  Vec coeffs;
  bool failed = false;
};

ReducedSolution solve_reduced(const ReducedSystem& sys);

struct ErrorIndicator {
  double value = 0.0;
  bool absolute = false;  // set when ||b|| = 0 and the residual is not normalized
};

/// eta = ||G(mu) Q v_r - rhs|| / ||rhs||.
ErrorIndicator error_indicator(const ReducedBasis& basis, const FullKKT& kkt, const Vec& coeffs);

/// Cached per-basis affine projections for many-query evaluation. For each
/// affine term G_a it stores P_a = G_a Q and Q^T P_a; evaluation at mu is then
/// a linear combination plus a dense solve and a full-order residual.
class OnlineSolver {
 public:
  OnlineSolver(const Problem& problem, const ReducedBasis& basis, Formulation formulation,
               PgSolver pg_solver = PgSolver::NormalEquations);

  struct Result {
    double eta = 1.0;
    double cond = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
    Vec coeffs;
  };

  Result evaluate(const ParameterVector& mu) const;
  /// Reduced matrix and rhs at mu, as they would be handed to the dense solve.
  ReducedSystem system(const ParameterVector& mu) const;

 private:
  Mat operator_image(const Vec& theta) const;
  Vec full_rhs(const Vec& phi) const;

  const Problem* problem_;
  Formulation formulation_;
  PgSolver pg_solver_;
  Index columns_ = 0;
  std::vector<Mat> images_;     // G_a Q
  std::vector<Mat> projected_;  // Q^T G_a Q
  std::vector<Vec> projected_rhs_;
};

/// Reduced constraint block Q_lambda^T B(mu) Q_x, with Q_x embedded in R^{2n}.
Mat reduced_constraint_block(const ReducedBasis& basis, const FullKKT& kkt);

/// Discrete inf-sup constant of B(mu) restricted to the given X and Q column
/// spaces, measured in the A and K_ref norms.
double reduced_inf_sup(const Problem& problem, const Mat& x_columns, const Mat& q_columns,
                       const ParameterVector& mu);
double reduced_inf_sup(const Problem& problem, const ReducedBasis& basis, const ParameterVector& mu);

void write_basis(std::ostream& os, const ReducedBasis& basis, const std::string& fingerprint);
ReducedBasis read_basis(std::istream& is, std::string* fingerprint = nullptr);

}  // namespace rbstab
