#pragma once

#include <vector>

#include "rbstab/full_model.hpp"
#include "rbstab/reduced_basis.hpp"

namespace rbstab {

/// Vectors derived from one snapshot, grouped by the basis block they extend.
///
///   Naive:       Q_xbar <- (f, u)          Q_lambda <- lambda
///   Supremizer:  Q_xbar <- (f, u), r       Q_lambda <- lambda
///   Aggregation: Q_f <- f                  Q_u = Q_lambda <- u, lambda
///
/// where r solves A r = B(mu)^T lambda at the snapshot's own parameter.
struct StabilizationUpdate {
  StabilizationKind kind = StabilizationKind::Aggregation;
  ParameterVector mu;
  std::vector<std::vector<Vec>> block_vectors;
};

StabilizationUpdate naive_update(const Snapshot& snapshot);
StabilizationUpdate supremizer_update(const Snapshot& snapshot, const Problem& problem);
StabilizationUpdate aggregation_update(const Snapshot& snapshot);
StabilizationUpdate make_update(StabilizationKind kind, const Snapshot& snapshot, const Problem& problem);

/// Supremizer r = A^{-1} B(mu)^T lambda, a vector over control x state.
Vec supremizer(const Problem& problem, const ParameterVector& mu, const Vec& lambda);

struct ApplyReport {
  Index columns_added = 0;
  Index dropped = 0;
};

/// Records the snapshot parameter and extends each block. For aggregation the
/// adjoint block is assigned from the state block afterwards, so Q_u and
/// Q_lambda stay bitwise identical.
ApplyReport apply_update(ReducedBasis& basis, const StabilizationUpdate& update, double drop_tol = 1e-10);

/// Online-enriched spaces used to check the exact-supremizer stability bound.
struct EnrichedSpaces {
  Mat x_columns;  // orthonormal, R^{2n}
  Mat q_columns;  // the basis' adjoint block
  Index enrichment = 0;
};

/// Appends R(mu_online) = A^{-1} B(mu_online)^T L to the control-state space,
/// with L the stored adjoint block. Test harness only: the result depends on
/// the online parameter.
EnrichedSpaces exact_supremizer_basis(const Problem& problem, const ReducedBasis& basis,
                                      const ParameterVector& mu_online);

}  // namespace rbstab
