#include "rbstab/stabilization.hpp"

#include "rbstab/linalg.hpp"

namespace rbstab {

StabilizationUpdate naive_update(const Snapshot& snapshot) {
  StabilizationUpdate up;
  up.kind = StabilizationKind::Naive;
  up.mu = snapshot.mu;
  up.block_vectors = {{snapshot.state_control()}, {snapshot.lambda}};
  return up;
}

Vec supremizer(const Problem& problem, const ParameterVector& mu, const Vec& lambda) {
  const Index n = problem.n();
  if (lambda.size() != n) throw ShapeError("supremizer: adjoint vector has wrong length");
  const SpMat c = stiffness_operator(problem.ops, mu);
  Vec bt_lambda(2 * n);
  bt_lambda.head(n) = -(problem.ops.mass * lambda);
  bt_lambda.tail(n) = c.transpose() * lambda;
  return problem.norms.apply_x_inverse(bt_lambda);
}

StabilizationUpdate supremizer_update(const Snapshot& snapshot, const Problem& problem) {
  StabilizationUpdate up;
  up.kind = StabilizationKind::Supremizer;
  up.mu = snapshot.mu;
  up.block_vectors = {{snapshot.state_control(), supremizer(problem, snapshot.mu, snapshot.lambda)},
                      {snapshot.lambda}};
  return up;
}

StabilizationUpdate aggregation_update(const Snapshot& snapshot) {
  StabilizationUpdate up;
  up.kind = StabilizationKind::Aggregation;
  up.mu = snapshot.mu;
  up.block_vectors = {{snapshot.f}, {snapshot.u, snapshot.lambda}, {snapshot.u, snapshot.lambda}};
  return up;
}

StabilizationUpdate make_update(StabilizationKind kind, const Snapshot& snapshot, const Problem& problem) {
  switch (kind) {
    case StabilizationKind::Naive: return naive_update(snapshot);
    case StabilizationKind::Supremizer: return supremizer_update(snapshot, problem);
    case StabilizationKind::Aggregation: return aggregation_update(snapshot);
  }
  throw ConfigError("unknown stabilization kind");
}

ApplyReport apply_update(ReducedBasis& basis, const StabilizationUpdate& update, double drop_tol) {
  if (update.kind != basis.kind) throw ConfigError("stabilization update does not match basis kind");
  basis.snapshot_params.push_back(update.mu);
  ApplyReport report;
  const Index before = basis.total_columns();
  if (basis.kind == StabilizationKind::Aggregation) {
    const ExtendReport rf = orthonormal_extend(basis, 0, update.block_vectors[0], drop_tol);
    const ExtendReport rz = orthonormal_extend(basis, 1, update.block_vectors[1], drop_tol);
    basis.blocks[2] = basis.blocks[1];
    report.dropped = Index(rf.dropped.size() + 2 * rz.dropped.size());
  } else {
    for (Index b = 0; b < basis.block_count(); ++b) {
      report.dropped += Index(orthonormal_extend(basis, b, update.block_vectors[std::size_t(b)], drop_tol).dropped.size());
    }
  }
  report.columns_added = basis.total_columns() - before;
  return report;
}

EnrichedSpaces exact_supremizer_basis(const Problem& problem, const ReducedBasis& basis,
                                      const ParameterVector& mu_online) {
  problem.box.check(mu_online);
  EnrichedSpaces out;
  out.q_columns = basis.adjoint_block();
  const Mat y = basis.state_control_columns();

  // Orthonormal copy of the existing control-state columns, then the online
  // supremizers of each stored adjoint column.
  ReducedBasis scratch = ReducedBasis::empty(StabilizationKind::Naive, basis.n);
  std::vector<Vec> cols;
  for (Index j = 0; j < y.cols(); ++j) cols.emplace_back(y.col(j));
  orthonormal_extend(scratch, 0, cols);
  const Index base = scratch.blocks[0].cols();

  std::vector<Vec> sups;
  for (Index j = 0; j < out.q_columns.cols(); ++j)
    sups.push_back(supremizer(problem, mu_online, out.q_columns.col(j)));
  orthonormal_extend(scratch, 0, sups);
  out.x_columns = scratch.blocks[0];
  out.enrichment = out.x_columns.cols() - base;
  return out;
}

}  // namespace rbstab
