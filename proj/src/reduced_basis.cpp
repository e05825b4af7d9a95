#include "rbstab/reduced_basis.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "rbstab/linalg.hpp"

namespace rbstab {

namespace {

using json = nlohmann::json;

bool all_finite(const Vec& v) { return v.allFinite(); }

// Q^T X for a block-diagonal Q, using only the nonzero blocks.
Mat project_rows(const ReducedBasis& basis, const Mat& x) {
  Mat out(basis.total_columns(), x.cols());
  Index col = 0;
  for (Index b = 0; b < basis.block_count(); ++b) {
    const Mat& q = basis.blocks[std::size_t(b)];
    out.middleRows(col, q.cols()).noalias() = q.transpose() * x.middleRows(basis.row_offset(b), q.rows());
    col += q.cols();
  }
  return out;
}

Vec project_rows(const ReducedBasis& basis, const Vec& x) {
  Vec out(basis.total_columns());
  Index col = 0;
  for (Index b = 0; b < basis.block_count(); ++b) {
    const Mat& q = basis.blocks[std::size_t(b)];
    out.segment(col, q.cols()).noalias() = q.transpose() * x.segment(basis.row_offset(b), q.rows());
    col += q.cols();
  }
  return out;
}

Vec solve_dense(const Mat& matrix, const Vec& rhs, Formulation formulation) {
  if (formulation == Formulation::PetrovGalerkin) {
    Eigen::LLT<Mat> llt(matrix);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
    return Eigen::LDLT<Mat>(matrix).solve(rhs);
  }
  return Eigen::PartialPivLU<Mat>(matrix).solve(rhs);
}

json matrix_to_json(const Mat& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data(), m.data() + m.size());
  return j;
}

Mat json_to_matrix(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (Index(data.size()) != rows * cols) throw IoError("basis block has wrong element count");
  return Eigen::Map<const Mat>(data.data(), rows, cols);
}

}  // namespace

BasisLayout layout_for(StabilizationKind kind) {
  return kind == StabilizationKind::Aggregation ? BasisLayout::ThreeBlock : BasisLayout::TwoBlock;
}

ReducedBasis ReducedBasis::empty(StabilizationKind kind, Index n) {
  ReducedBasis basis;
  basis.kind = kind;
  basis.n = n;
  if (layout_for(kind) == BasisLayout::ThreeBlock) {
    basis.blocks = {Mat(n, 0), Mat(n, 0), Mat(n, 0)};
  } else {
    basis.blocks = {Mat(2 * n, 0), Mat(n, 0)};
  }
  return basis;
}

Index ReducedBasis::row_offset(Index b) const {
  if (layout() == BasisLayout::ThreeBlock) return b * n;
  return b == 0 ? 0 : 2 * n;
}

std::string ReducedBasis::block_name(Index b) const {
  if (layout() == BasisLayout::ThreeBlock) {
    static const char* names[] = {"Q_f", "Q_u", "Q_lambda"};
    return names[b];
  }
  return b == 0 ? "Q_xbar" : "Q_lambda";
}

Index ReducedBasis::total_columns() const {
  Index total = 0;
  for (const auto& q : blocks) total += q.cols();
  return total;
}

Mat ReducedBasis::expand() const {
  Mat q = Mat::Zero(3 * n, total_columns());
  Index col = 0;
  for (Index b = 0; b < block_count(); ++b) {
    const Mat& qb = blocks[std::size_t(b)];
    q.block(row_offset(b), col, qb.rows(), qb.cols()) = qb;
    col += qb.cols();
  }
  return q;
}

Mat ReducedBasis::state_control_columns() const {
  if (layout() == BasisLayout::TwoBlock) return blocks[0];
  const Mat& qf = blocks[0];
  const Mat& qu = blocks[1];
  Mat x = Mat::Zero(2 * n, qf.cols() + qu.cols());
  x.topLeftCorner(n, qf.cols()) = qf;
  x.bottomRightCorner(n, qu.cols()) = qu;
  return x;
}

ExtendReport orthonormal_extend(ReducedBasis& basis, Index block, std::span<const Vec> vectors,
                                double drop_tol) {
  if (block < 0 || block >= basis.block_count()) throw ShapeError("orthonormal_extend: bad block id");
  Mat& q = basis.blocks[std::size_t(block)];
  ExtendReport report;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const Vec& v = vectors[i];
    if (v.size() != q.rows()) {
      throw ShapeError("orthonormal_extend: vector of length " + std::to_string(v.size()) +
                       " for block " + basis.block_name(block) + " with " +
                       std::to_string(q.rows()) + " rows");
    }
    const double original = v.norm();
    Vec w = v;
    const double remaining = original > 0.0 ? linalg::orthogonalize_mgs(q, q.cols(), w, 2) : 0.0;
    if (!(remaining > drop_tol * original)) {
      report.dropped.push_back(Index(i));
      basis.drops.push_back({basis.snapshot_count(), basis.block_name(block),
                             original > 0.0 ? remaining / original : 0.0});
      continue;
    }
    w /= remaining;
    if (remaining < 1e-6 * original) {
      // Nearly dependent input: the normalized remainder is dominated by
      // rounding, so orthogonalize it once more.
      w /= linalg::orthogonalize_mgs(q, q.cols(), w, 2);
    }
    q.conservativeResize(Eigen::NoChange, q.cols() + 1);
    q.col(q.cols() - 1) = w;
    ++report.added;
  }
  return report;
}

ReducedSystem project(const ReducedBasis& basis, const FullKKT& kkt, Formulation formulation) {
  if (basis.is_empty()) throw ShapeError("project: empty basis");
  if (kkt.n != basis.n) throw ShapeError("project: basis and system sizes differ");
  const Mat q = basis.expand();
  const Mat w = kkt.matrix * q;
  ReducedSystem sys;
  sys.formulation = formulation;
  if (formulation == Formulation::Galerkin) {
    sys.matrix = project_rows(basis, w);
    sys.rhs = project_rows(basis, kkt.rhs);
  } else {
    sys.matrix = w.transpose() * w;
    sys.rhs = w.transpose() * kkt.rhs;
  }
  sys.cond = linalg::condition_number(sys.matrix);
  return sys;
}

ReducedSolution solve_reduced(const ReducedSystem& sys) {
  ReducedSolution sol;
  if (!(sys.cond <= kSingularCondition)) {
    sol.failed = true;
    sol.coeffs = Vec::Zero(sys.rhs.size());
    return sol;
  }
  sol.coeffs = solve_dense(sys.matrix, sys.rhs, sys.formulation);
  sol.failed = !all_finite(sol.coeffs);
  return sol;
}

ErrorIndicator error_indicator(const ReducedBasis& basis, const FullKKT& kkt, const Vec& coeffs) {
  Vec v = Vec::Zero(3 * kkt.n);
  if (!basis.is_empty()) v = basis.expand() * coeffs;
  const double residual = (kkt.matrix * v - kkt.rhs).norm();
  const double scale = kkt.rhs.norm();
  if (scale == 0.0) return {residual, true};
  return {residual / scale, false};
}

// ---------------------------------------------------------------------------

OnlineSolver::OnlineSolver(const Problem& problem, const ReducedBasis& basis, Formulation formulation,
                           PgSolver pg_solver)
    : problem_(&problem), formulation_(formulation), pg_solver_(pg_solver), columns_(basis.total_columns()) {
  if (basis.n != problem.n()) throw ShapeError("OnlineSolver: basis does not match problem size");
  if (columns_ == 0) return;
  const Mat q = basis.expand();
  images_.reserve(problem.kkt_terms.size());
  for (const SpMat& g : problem.kkt_terms) {
    images_.push_back(g * q);
    if (formulation_ == Formulation::Galerkin) projected_.push_back(project_rows(basis, images_.back()));
  }
  if (formulation_ == Formulation::Galerkin) {
    for (const Vec& r : problem.rhs_terms) projected_rhs_.push_back(project_rows(basis, r));
  }
}

Mat OnlineSolver::operator_image(const Vec& theta) const {
  Mat w = theta[0] * images_[0];
  for (std::size_t a = 1; a < images_.size(); ++a) w.noalias() += theta[Index(a)] * images_[a];
  return w;
}

Vec OnlineSolver::full_rhs(const Vec& phi) const {
  Vec b = phi[0] * problem_->rhs_terms[0];
  for (std::size_t k = 1; k < problem_->rhs_terms.size(); ++k) b.noalias() += phi[Index(k)] * problem_->rhs_terms[k];
  return b;
}

ReducedSystem OnlineSolver::system(const ParameterVector& mu) const {
  if (columns_ == 0) throw ShapeError("OnlineSolver::system: empty basis");
  const Vec theta = kkt_coefficients(*problem_, mu);
  const Vec phi = rhs_coefficients(*problem_, mu);
  ReducedSystem sys;
  sys.formulation = formulation_;
  if (formulation_ == Formulation::Galerkin) {
    sys.matrix = theta[0] * projected_[0];
    for (std::size_t a = 1; a < projected_.size(); ++a) sys.matrix.noalias() += theta[Index(a)] * projected_[a];
    sys.rhs = phi[0] * projected_rhs_[0];
    for (std::size_t k = 1; k < projected_rhs_.size(); ++k) sys.rhs.noalias() += phi[Index(k)] * projected_rhs_[k];
  } else {
    const Mat w = operator_image(theta);
    sys.matrix = Mat::Zero(columns_, columns_);
    sys.matrix.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose());
    sys.matrix.triangularView<Eigen::StrictlyUpper>() = sys.matrix.transpose();
    sys.rhs = w.transpose() * full_rhs(phi);
  }
  sys.cond = linalg::condition_number(sys.matrix);
  return sys;
}

OnlineSolver::Result OnlineSolver::evaluate(const ParameterVector& mu) const {
  Result res;
  const Vec phi = rhs_coefficients(*problem_, mu);
  const Vec b = full_rhs(phi);
  const double b_norm = b.norm();
  const double scale = b_norm > 0.0 ? b_norm : 1.0;
  if (columns_ == 0) {
    res.eta = b_norm > 0.0 ? 1.0 : 0.0;
    return res;
  }
  const Vec theta = kkt_coefficients(*problem_, mu);

  Vec residual;
  if (formulation_ == Formulation::Galerkin) {
    const ReducedSystem sys = system(mu);
    res.cond = sys.cond;
    const ReducedSolution sol = solve_reduced(sys);
    res.coeffs = sol.coeffs;
    res.failed = sol.failed;
    if (!res.failed) {
      residual = -b;
      for (std::size_t a = 0; a < images_.size(); ++a) residual.noalias() += theta[Index(a)] * (images_[a] * res.coeffs);
    }
  } else {
    const Mat w = operator_image(theta);
    Mat normal = Mat::Zero(columns_, columns_);
    normal.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose());
    normal.triangularView<Eigen::StrictlyUpper>() = normal.transpose();
    res.cond = linalg::condition_number(normal);
    if (pg_solver_ == PgSolver::QR) {
      res.coeffs = w.colPivHouseholderQr().solve(b);
      res.failed = !all_finite(res.coeffs);
    } else {
      ReducedSystem sys{std::move(normal), w.transpose() * b, Formulation::PetrovGalerkin, res.cond};
      const ReducedSolution sol = solve_reduced(sys);
      res.coeffs = sol.coeffs;
      res.failed = sol.failed;
    }
    if (!res.failed) residual = w * res.coeffs - b;
  }
  if (res.failed) {
    res.eta = std::numeric_limits<double>::infinity();
  } else {
    res.eta = residual.norm() / scale;
  }
  return res;
}

// ---------------------------------------------------------------------------

Mat reduced_constraint_block(const ReducedBasis& basis, const FullKKT& kkt) {
  const Mat x = basis.state_control_columns();
  const Mat bx = kkt.constraint() * x;
  return basis.adjoint_block().transpose() * bx;
}

double reduced_inf_sup(const Problem& problem, const Mat& x_columns, const Mat& q_columns,
                       const ParameterVector& mu) {
  const Index n = problem.n();
  if (x_columns.rows() != 2 * n || q_columns.rows() != n) throw ShapeError("reduced_inf_sup: bad column sizes");
  const SpMat c = stiffness_operator(problem.ops, mu);
  const SpMat& m = problem.ops.mass;
  const auto xf = x_columns.topRows(n);
  const auto xu = x_columns.bottomRows(n);
  const Mat bx = c * xu - m * xf;
  const Mat b_red = q_columns.transpose() * bx;
  const Mat x_gram = xf.transpose() * (problem.norms.control_block * xf) + xu.transpose() * (problem.norms.state_block * xu);
  const Mat q_gram = q_columns.transpose() * (problem.norms.q_norm * q_columns);
  return linalg::inf_sup_constant(b_red, x_gram, q_gram);
}

double reduced_inf_sup(const Problem& problem, const ReducedBasis& basis, const ParameterVector& mu) {
  return reduced_inf_sup(problem, basis.state_control_columns(), basis.adjoint_block(), mu);
}

// ---------------------------------------------------------------------------

void write_basis(std::ostream& os, const ReducedBasis& basis, const std::string& fingerprint) {
  json j;
  j["format"] = "rbstab-basis";
  j["version"] = 1;
  j["fingerprint"] = fingerprint;
  j["kind"] = std::string(to_string(basis.kind));
  j["layout"] = basis.layout() == BasisLayout::ThreeBlock ? "three-block" : "two-block";
  j["n"] = basis.n;
  json blocks = json::array();
  for (Index b = 0; b < basis.block_count(); ++b) {
    json jb = matrix_to_json(basis.blocks[std::size_t(b)]);
    jb["name"] = basis.block_name(b);
    blocks.push_back(std::move(jb));
  }
  j["blocks"] = std::move(blocks);
  json params = json::array();
  for (const auto& mu : basis.snapshot_params)
    params.push_back(std::vector<double>(mu.values.data(), mu.values.data() + mu.size()));
  j["snapshot_params"] = std::move(params);
  json drops = json::array();
  for (const auto& d : basis.drops) drops.push_back({{"snapshot", d.snapshot}, {"block", d.block}, {"ratio", d.ratio}});
  j["drops"] = std::move(drops);
  os << j.dump() << '\n';
  if (!os) throw IoError("failed to write basis");
}

ReducedBasis read_basis(std::istream& is, std::string* fingerprint) {
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed basis file: ") + e.what());
  }
  if (j.value("format", "") != "rbstab-basis") throw IoError("not a basis container");
  try {
    ReducedBasis basis = ReducedBasis::empty(parse_stabilization(j.at("kind").get<std::string>()),
                                             j.at("n").get<Index>());
    const auto& blocks = j.at("blocks");
    if (Index(blocks.size()) != basis.block_count()) throw IoError("basis has wrong number of blocks");
    for (Index b = 0; b < basis.block_count(); ++b) {
      Mat m = json_to_matrix(blocks[std::size_t(b)]);
      if (m.rows() != basis.block_rows(b)) throw IoError("basis block has wrong row count");
      basis.blocks[std::size_t(b)] = std::move(m);
    }
    for (const auto& p : j.at("snapshot_params")) {
      const auto v = p.get<std::vector<double>>();
      basis.snapshot_params.push_back({Eigen::Map<const Vec>(v.data(), Index(v.size()))});
    }
    for (const auto& d : j.value("drops", json::array()))
      basis.drops.push_back({d.at("snapshot").get<Index>(), d.at("block").get<std::string>(), d.at("ratio").get<double>()});
    if (fingerprint) *fingerprint = j.at("fingerprint").get<std::string>();
    return basis;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed basis file: ") + e.what());
  } catch (const ConfigError& e) {
    throw IoError(std::string("malformed basis file: ") + e.what());
  }
}

}  // namespace rbstab
