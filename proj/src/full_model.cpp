#include "rbstab/full_model.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include "json.hpp"

namespace rbstab {

namespace {

using json = nlohmann::json;

// Places `block` at block position (bi, bj) of a 3x3 block matrix.
void append_block(std::vector<Triplet>& trips, const SpMat& block, Index bi, Index bj, Index n,
                  double scale = 1.0) {
  for (Index k = 0; k < block.outerSize(); ++k) {
    for (SpMat::InnerIterator it(block, k); it; ++it) {
      trips.emplace_back(bi * n + it.row(), bj * n + it.col(), scale * it.value());
    }
  }
}

SpMat block_matrix(Index n, const std::vector<Triplet>& trips) {
  SpMat g(3 * n, 3 * n);
  g.setFromTriplets(trips.begin(), trips.end());
  g.makeCompressed();
  return g;
}

// Symmetric constraint coupling: C in block (3,2), C^T in block (2,3).
SpMat coupling_term(const SpMat& c, Index n) {
  std::vector<Triplet> trips;
  append_block(trips, c, 2, 1, n);
  SpMat ct = c.transpose();
  append_block(trips, ct, 1, 2, n);
  return block_matrix(n, trips);
}

Vec embed_rhs(const Vec& part, Index block, Index n) {
  Vec r = Vec::Zero(3 * n);
  r.segment(block * n, n) = part;
  return r;
}

json vec_to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vec json_to_vec(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(data.data(), Index(data.size()));
}

}  // namespace

Vec NormMatrices::apply_x_inverse(const Vec& rhs) const {
  const Index n = state_block.rows();
  if (rhs.size() != 2 * n) throw ShapeError("apply_x_inverse: expected vector of length 2n");
  Vec out(2 * n);
  out.head(n) = mass_factor->solve(rhs.head(n)) / control_weight;
  out.tail(n) = mass_factor->solve(rhs.tail(n));
  return out;
}

double control_weight(ProblemKind kind, double beta) {
  return kind == ProblemKind::Diffusion ? 2.0 * beta : beta;
}

std::string Problem::fingerprint() const {
  std::ostringstream os;
  os.precision(17);
  os << "problem=" << to_string(config.kind) << ";nc=" << config.nc
     << ";elements=" << mesh.spec.elements_per_side << ";subdomains=" << mesh.spec.n_subdomains
     << ";dofs=" << ops.n_interior << ";beta=" << config.beta;
  return os.str();
}

Problem make_problem(const ProblemConfig& config) {
  if (!(config.beta > 0.0)) throw ConfigError("beta must be positive");
  Problem p;
  p.config = config;
  if (config.kind == ProblemKind::Graetz) p.config.n_subdomains = 2;
  const MeshSpec spec = MeshSpec::make(config.kind, config.nc, p.config.n_subdomains);
  p.mesh = build_mesh(spec, BoundarySpec::for_problem(config.kind));
  p.ops = assemble_operators(p.mesh);
  p.box = parameter_box(spec);
  p.control_weight = control_weight(config.kind, config.beta);

  const Index n = p.ops.n_interior;
  const FemOperators& ops = p.ops;

  auto factor = std::make_shared<MassFactor>(ops.mass);
  if (factor->info() != Eigen::Success) throw NumericalError("mass matrix factorization failed");
  p.norms.control_weight = p.control_weight;
  p.norms.control_block = p.control_weight * ops.mass;
  p.norms.state_block = ops.mass;
  p.norms.q_norm = ops.stiffness_ref;
  p.norms.mass_factor = factor;

  // Parameter-independent part: mass blocks (+ convection for Graetz).
  {
    std::vector<Triplet> trips;
    append_block(trips, ops.mass, 0, 0, n, p.control_weight);
    append_block(trips, ops.mass, 0, 2, n, -1.0);
    append_block(trips, ops.mass, 2, 0, n, -1.0);
    append_block(trips, ops.mass, 1, 1, n);
    if (config.kind == ProblemKind::Graetz) {
      append_block(trips, ops.convection, 2, 1, n);
      SpMat nt = ops.convection.transpose();
      append_block(trips, nt, 1, 2, n);
    }
    p.kkt_terms.push_back(block_matrix(n, trips));
  }

  const Vec& g = ops.dirichlet_values;
  if (config.kind == ProblemKind::Diffusion) {
    for (const auto& kq : ops.stiffness) p.kkt_terms.push_back(coupling_term(kq, n));
    Vec target = Vec::Zero(n);
    for (const auto& load : ops.subdomain_loads) target += load;
    p.rhs_terms.push_back(embed_rhs(target, 1, n));
    for (const auto& lift : ops.stiffness_lift) p.rhs_terms.push_back(embed_rhs(-(lift * g), 2, n));
  } else {
    p.kkt_terms.push_back(coupling_term(ops.stiffness_ref, n));
    SpMat lift_ref = ops.stiffness_lift[0] + ops.stiffness_lift[1];
    p.rhs_terms.push_back(embed_rhs(ops.subdomain_loads[0], 1, n));
    p.rhs_terms.push_back(embed_rhs(ops.subdomain_loads[1], 1, n));
    p.rhs_terms.push_back(embed_rhs(-(ops.convection_lift * g), 2, n));
    p.rhs_terms.push_back(embed_rhs(-(lift_ref * g), 2, n));
  }
  return p;
}

Vec kkt_coefficients(const Problem& problem, const ParameterVector& mu) {
  if (problem.config.kind == ProblemKind::Diffusion) {
    Vec theta(1 + mu.size());
    theta << 1.0, mu.values;
    return theta;
  }
  return Eigen::Vector2d(1.0, mu[0]);
}

Vec rhs_coefficients(const Problem& problem, const ParameterVector& mu) {
  if (problem.config.kind == ProblemKind::Diffusion) {
    Vec phi(1 + mu.size());
    phi << 1.0, mu.values;
    return phi;
  }
  return Eigen::Vector4d(mu[1], mu[2], 1.0, mu[0]);
}

SpMat FullKKT::constraint() const {
  std::vector<Triplet> trips;
  for (Index k = 0; k < mass.outerSize(); ++k)
    for (SpMat::InnerIterator it(mass, k); it; ++it) trips.emplace_back(it.row(), it.col(), -it.value());
  for (Index k = 0; k < stiffness.outerSize(); ++k)
    for (SpMat::InnerIterator it(stiffness, k); it; ++it)
      trips.emplace_back(it.row(), n + it.col(), it.value());
  SpMat b(n, 2 * n);
  b.setFromTriplets(trips.begin(), trips.end());
  return b;
}

FullKKT assemble_kkt(const Problem& problem, const ParameterVector& mu) {
  problem.box.check(mu);
  FullKKT kkt;
  kkt.mu = mu;
  kkt.n = problem.n();
  kkt.control_weight = problem.control_weight;
  kkt.mass = problem.ops.mass;
  kkt.stiffness = stiffness_operator(problem.ops, mu);

  const Vec theta = kkt_coefficients(problem, mu);
  kkt.matrix = SpMat(problem.full_size(), problem.full_size());
  for (std::size_t a = 0; a < problem.kkt_terms.size(); ++a)
    kkt.matrix += theta[Index(a)] * problem.kkt_terms[a];
  kkt.matrix.makeCompressed();

  const Vec phi = rhs_coefficients(problem, mu);
  kkt.rhs = Vec::Zero(problem.full_size());
  for (std::size_t k = 0; k < problem.rhs_terms.size(); ++k) kkt.rhs += phi[Index(k)] * problem.rhs_terms[k];
  return kkt;
}

Vec Snapshot::stacked() const {
  Vec v(f.size() + u.size() + lambda.size());
  v << f, u, lambda;
  return v;
}

Vec Snapshot::state_control() const {
  Vec v(f.size() + u.size());
  v << f, u;
  return v;
}

Snapshot solve_full(const FullKKT& kkt) {
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(kkt.matrix);
  lu.factorize(kkt.matrix);
  auto where = [&] {
    std::ostringstream os;
    os.precision(17);
    os << "mu = [" << kkt.mu.values.transpose() << "]";
    return os.str();
  };
  if (lu.info() != Eigen::Success) {
    throw NumericalError("full KKT factorization failed at " + where() + ": " + lu.lastErrorMessage());
  }
  Vec x = lu.solve(kkt.rhs);
  const double rhs_norm = kkt.rhs.norm();
  const double scale = rhs_norm > 0.0 ? rhs_norm : 1.0;
  Vec r = kkt.rhs - kkt.matrix * x;
  if (r.norm() > 1e-12 * scale) {
    x += lu.solve(r);  // one step of iterative refinement
    r = kkt.rhs - kkt.matrix * x;
  }

  const Index n = kkt.n;
  Snapshot s;
  s.mu = kkt.mu;
  s.f = x.segment(0, n);
  s.u = x.segment(n, n);
  s.lambda = x.segment(2 * n, n);
  s.residual_norm = r.norm() / scale;
  s.constraint_residual = (kkt.stiffness * s.u - kkt.mass * s.f - kkt.d()).norm() / scale;
  if (!std::isfinite(s.residual_norm) || s.residual_norm > 1e-10 || s.constraint_residual > 1e-10) {
    throw NumericalError("full solve certificate failed at " + where() +
                         " (relative residual " + std::to_string(s.residual_norm) + ")");
  }
  return s;
}

Snapshot solve_full(const Problem& problem, const ParameterVector& mu) {
  return solve_full(assemble_kkt(problem, mu));
}

double inf_sup_full(const Problem& problem, const ParameterVector& mu, const NormMatrices& norms) {
  problem.box.check(mu);
  const Mat m = Mat(problem.ops.mass);
  const Mat c = Mat(stiffness_operator(problem.ops, mu));
  const Eigen::LLT<Mat> ac(Mat(norms.control_block));
  const Eigen::LLT<Mat> as(Mat(norms.state_block));
  if (ac.info() != Eigen::Success || as.info() != Eigen::Success)
    throw NumericalError("X-norm matrix is not positive definite");

  // Schur complement B A^{-1} B^T = M Ac^{-1} M + C As^{-1} C^T.
  Mat schur = m * ac.solve(m);
  schur.noalias() += c * as.solve(Mat(c.transpose()));
  schur = 0.5 * (schur + schur.transpose()).eval();

  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(schur, Mat(norms.q_norm), Eigen::EigenvaluesOnly);
  if (ges.info() != Eigen::Success) {
    std::ostringstream os;
    os << "inf-sup eigensolve failed at mu = [" << mu.values.transpose() << "]";
    throw NumericalError(os.str());
  }
  return std::sqrt(std::max(0.0, ges.eigenvalues().minCoeff()));
}

void write_snapshot(std::ostream& os, const Snapshot& snap, const std::string& fingerprint) {
  json j;
  j["format"] = "rbstab-snapshot";
  j["version"] = 1;
  j["fingerprint"] = fingerprint;
  j["mu"] = vec_to_json(snap.mu.values);
  j["f"] = vec_to_json(snap.f);
  j["u"] = vec_to_json(snap.u);
  j["lambda"] = vec_to_json(snap.lambda);
  j["residual_norm"] = snap.residual_norm;
  j["constraint_residual"] = snap.constraint_residual;
  os << j.dump() << '\n';
  if (!os) throw IoError("failed to write snapshot");
}

Snapshot read_snapshot(std::istream& is, std::string* fingerprint) {
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed snapshot: ") + e.what());
  }
  if (j.value("format", "") != "rbstab-snapshot") throw IoError("not a snapshot container");
  Snapshot s;
  s.mu.values = json_to_vec(j.at("mu"));
  s.f = json_to_vec(j.at("f"));
  s.u = json_to_vec(j.at("u"));
  s.lambda = json_to_vec(j.at("lambda"));
  s.residual_norm = j.at("residual_norm").get<double>();
  s.constraint_residual = j.value("constraint_residual", 0.0);
  if (s.f.size() != s.u.size() || s.u.size() != s.lambda.size())
    throw IoError("snapshot blocks have inconsistent lengths");
  if (fingerprint) *fingerprint = j.at("fingerprint").get<std::string>();
  return s;
}

}  // namespace rbstab
