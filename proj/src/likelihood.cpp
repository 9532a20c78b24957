#include "dagmip/likelihood.hpp"

#include <cmath>

#include "dagmip/error.hpp"

namespace dagmip {

std::string to_string(VarianceMode mode) { return mode == VarianceMode::Unequal ? "unequal" : "equal"; }

VarianceMode parse_variance_mode(const std::string& s) {
  if (s == "unequal") return VarianceMode::Unequal;
  if (s == "equal") return VarianceMode::Equal;
  throw InvalidInput("unknown variance mode '" + s + "'");
}

void GammaMatrix::validate_layout() const {
  if (gamma.rows() != layout.p || gamma.cols() != layout.dim()) throw InvalidInput("Gamma: wrong shape");
  for (int j = 0; j < layout.p; ++j) {
    for (int k = 0; k < layout.p; ++k)
      if (k != j && gamma(j, layout.x(k)) != 0.0) throw InvalidInput("Gamma: identity block must be diagonal");
    for (int r = 0; r < layout.R; ++r)
      if (gamma(j, layout.basis(r, j)) != 0.0) throw InvalidInput("Gamma: self coefficient beta_rjj must be zero");
  }
}

void GammaMatrix::validate_positive_diagonal() const {
  for (int j = 0; j < layout.p; ++j)
    if (!(diag(j) > 0.0)) throw DomainError("Gamma_jj must be positive (node " + std::to_string(j + 1) + ")");
}

double ModelTheta::mean_of(int j, const Eigen::VectorXd& z) const {
  double acc = intercept_sum[j];
  for (int r = 0; r < layout.R; ++r)
    for (int k = 0; k < layout.p; ++k) acc += beta[r](k, j) * z[layout.basis(r, k)];
  return acc;
}

Eigen::MatrixXd basis_means(const GramMatrix& gram) {
  const Layout& lay = gram.layout;
  Eigen::MatrixXd m(lay.R, lay.p);
  for (int r = 0; r < lay.R; ++r)
    for (int k = 0; k < lay.p; ++k) m(r, k) = gram.sigma(lay.constant(), lay.basis(r, k));
  return m;
}

namespace {

ModelTheta theta_from_scaled(const GammaMatrix& g, const Eigen::VectorXd& scale_inv, Eigen::VectorXd sigma,
                             const Eigen::MatrixXd* means) {
  const Layout& lay = g.layout;
  ModelTheta t;
  t.layout = lay;
  t.sigma = std::move(sigma);
  t.beta.assign(lay.R, Eigen::MatrixXd::Zero(lay.p, lay.p));
  t.intercept_sum = Eigen::VectorXd::Zero(lay.p);
  t.edge_intercept = Eigen::MatrixXd::Zero(lay.p, lay.p);
  for (int j = 0; j < lay.p; ++j) {
    t.intercept_sum[j] = -g.intercept(j) * scale_inv[j];
    for (int r = 0; r < lay.R; ++r)
      for (int k = 0; k < lay.p; ++k) t.beta[r](k, j) = -g.coef(j, r, k) * scale_inv[j];
  }
  if (means) {
    for (int j = 0; j < lay.p; ++j)
      for (int k = 0; k < lay.p; ++k) {
        double acc = 0.0;
        for (int r = 0; r < lay.R; ++r) acc -= t.beta[r](k, j) * (*means)(r, k);
        t.edge_intercept(k, j) = acc;
      }
  }
  return t;
}

}  // namespace

ModelTheta gamma_to_theta(const GammaMatrix& gamma, const Eigen::MatrixXd* means) {
  gamma.validate_positive_diagonal();
  const int p = gamma.layout.p;
  Eigen::VectorXd inv(p), sigma(p);
  for (int j = 0; j < p; ++j) {
    inv[j] = 1.0 / gamma.diag(j);
    sigma[j] = inv[j];
  }
  return theta_from_scaled(gamma, inv, sigma, means);
}

ModelTheta eqvar_to_theta(const GammaMatrix& b, double sigma, const Eigen::MatrixXd* means) {
  if (!(sigma > 0.0)) throw DomainError("eqvar_to_theta: sigma must be positive");
  const int p = b.layout.p;
  return theta_from_scaled(b, Eigen::VectorXd::Ones(p), Eigen::VectorXd::Constant(p, sigma), means);
}

GammaMatrix theta_to_gamma(const ModelTheta& theta) {
  const Layout& lay = theta.layout;
  GammaMatrix g(lay);
  for (int j = 0; j < lay.p; ++j) {
    if (!(theta.sigma[j] > 0.0)) throw DomainError("theta_to_gamma: sigma must be positive");
    const double d = 1.0 / theta.sigma[j];
    g.gamma(j, lay.x(j)) = d;
    g.gamma(j, lay.constant()) = -theta.intercept_sum[j] * d;
    for (int r = 0; r < lay.R; ++r)
      for (int k = 0; k < lay.p; ++k)
        if (k != j) g.gamma(j, lay.basis(r, k)) = -theta.beta[r](k, j) * d;
  }
  return g;
}

namespace {

void check_compatible(const GammaMatrix& g, const GramMatrix& gram, const EdgeMatrix& support) {
  if (g.layout.p != gram.layout.p || g.layout.R != gram.layout.R) throw InvalidInput("layout mismatch with Gram");
  if (support.size() != g.layout.p) throw InvalidInput("edge indicator size mismatch");
}

double trace_term(const GammaMatrix& g, const GramMatrix& gram) {
  double acc = 0.0;
  for (int j = 0; j < g.layout.p; ++j) {
    const Eigen::VectorXd row = g.gamma.row(j).transpose();
    acc += row.dot(gram.sigma * row);
  }
  return acc;
}

}  // namespace

double objective_gram(const GammaMatrix& gamma, const GramMatrix& gram, double lambda_sq, const EdgeMatrix& g) {
  check_compatible(gamma, gram, g);
  gamma.validate_positive_diagonal();
  double acc = 0.0;
  for (int j = 0; j < gamma.layout.p; ++j) acc -= 2.0 * std::log(gamma.diag(j));
  return acc + trace_term(gamma, gram) + lambda_sq * g.edge_count();
}

double objective_samples(const ModelTheta& theta, const Dataset& data, const BasisSystem& system, double lambda_sq,
                         const EdgeMatrix& g) {
  const Layout& lay = theta.layout;
  if (data.p() != lay.p || system.p() != lay.p || system.R() != lay.R) throw InvalidInput("objective_samples: layout mismatch");
  for (int j = 0; j < lay.p; ++j)
    if (!(theta.sigma[j] > 0.0)) throw DomainError("objective_samples: sigma must be positive");
  // Pass 1: basis values for every sample. Pass 2: residual norms per node.
  const int n = data.n();
  std::vector<Eigen::VectorXd> z(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(lay.p);
    for (int k = 0; k < lay.p; ++k) row[k] = data.values(i, k);
    z[i] = system.extended_vector(row);
  }
  double total = lambda_sq * g.edge_count();
  for (int j = 0; j < lay.p; ++j) {
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double res = data.values(i, j) - theta.mean_of(j, z[i]);
      if (!std::isfinite(res)) throw NumericalError("objective_samples: non-finite residual");
      ss += res * res;
    }
    const double var = theta.sigma[j] * theta.sigma[j];
    total += std::log(var) + ss / n / var;
  }
  return total;
}

EqVarObjective objective_eqvar(const GammaMatrix& b, const GramMatrix& gram, double lambda_sq, const EdgeMatrix& g) {
  check_compatible(b, gram, g);
  b.validate_layout();
  for (int j = 0; j < b.layout.p; ++j)
    if (b.diag(j) != 1.0) throw InvalidInput("equal-variance B: identity block must be exactly I");
  EqVarObjective out;
  const double tr = trace_term(b, gram);
  out.value = tr + lambda_sq * g.edge_count();
  out.pooled_variance = tr / b.layout.p;
  return out;
}

double bic_unequal(const GammaMatrix& gamma, const EdgeMatrix& g, const GramMatrix& gram, int n) {
  if (n < 2) throw InvalidInput("BIC needs n >= 2");
  const double rate = std::log(static_cast<double>(n)) / n;
  return objective_gram(gamma, gram, 0.0, g) + (gamma.layout.p + g.edge_count()) * rate;
}

double bic_equal(const GammaMatrix& b, const EdgeMatrix& g, const GramMatrix& gram, int n) {
  if (n < 2) throw InvalidInput("BIC needs n >= 2");
  const double rate = std::log(static_cast<double>(n)) / n;
  return objective_eqvar(b, gram, rate, g).value;
}

NodeFit fit_node(const GramMatrix& gram, int j, std::span<const int> parents) {
  const Layout& lay = gram.layout;
  NodeFit fit;
  const double sjj = gram.sigma(lay.x(j), lay.x(j));
  if (parents.empty()) {
    fit.omega = std::max(sjj, kOmegaFloor);
    fit.coefficients.resize(0);
    return fit;
  }
  fit.columns.push_back(lay.constant());
  for (int k : parents) {
    if (k == j) throw InvalidInput("fit_node: node cannot be its own parent");
    for (int r = 0; r < lay.R; ++r) fit.columns.push_back(lay.basis(r, k));
  }
  const int m = static_cast<int>(fit.columns.size());
  Eigen::MatrixXd a(m, m);
  Eigen::VectorXd b(m);
  for (int u = 0; u < m; ++u) {
    b[u] = gram.sigma(fit.columns[u], lay.x(j));
    for (int v = 0; v < m; ++v) a(u, v) = gram.sigma(fit.columns[u], fit.columns[v]);
  }
  Eigen::MatrixXd ridged = a;
  ridged.diagonal().array() += kRidgeFactor * a.trace();
  Eigen::LLT<Eigen::MatrixXd> llt(ridged);
  if (llt.info() != Eigen::Success) throw NumericalError("fit_node: normal equations are singular");
  fit.coefficients = llt.solve(b);
  // Residual quadratic form of the coefficients actually returned.
  const double omega = sjj - 2.0 * b.dot(fit.coefficients) + fit.coefficients.dot(a * fit.coefficients);
  fit.omega = std::max(omega, kOmegaFloor);
  return fit;
}

double node_score(const NodeFit& fit, VarianceMode mode) {
  return mode == VarianceMode::Unequal ? std::log(fit.omega) + 1.0 : fit.omega;
}

ProfileFit profile_score(const EdgeMatrix& support, const GramMatrix& gram, double lambda_sq, VarianceMode mode) {
  const Layout& lay = gram.layout;
  if (support.size() != lay.p) throw InvalidInput("profile_score: support size mismatch");
  ProfileFit out;
  out.gamma = GammaMatrix(lay);
  out.omega.resize(lay.p);
  out.node_contribution.resize(lay.p);
  for (int j = 0; j < lay.p; ++j) {
    if (support(j, j)) throw InvalidInput("profile_score: self-loop in support");
    const auto parents = support.parents(j);
    const NodeFit fit = fit_node(gram, j, parents);
    out.omega[j] = fit.omega;
    out.node_contribution[j] = node_score(fit, mode);
    const double d = mode == VarianceMode::Unequal ? 1.0 / std::sqrt(fit.omega) : 1.0;
    out.gamma.gamma(j, lay.x(j)) = d;
    for (std::size_t u = 0; u < fit.columns.size(); ++u) out.gamma.gamma(j, fit.columns[u]) = -d * fit.coefficients[u];
  }
  out.penalty = lambda_sq * support.edge_count();
  out.score = out.node_contribution.sum() + out.penalty;
  return out;
}

double ScoreCache::node(int j, const std::vector<int>& parents) const {
  auto key = std::make_pair(j, parents);
  {
    std::lock_guard lock(mutex_);
    if (auto it = table_.find(key); it != table_.end()) return it->second;
  }
  const double value = node_score(fit_node(*gram_, j, parents), mode_);
  std::lock_guard lock(mutex_);
  table_.emplace(std::move(key), value);
  return value;
}

double ScoreCache::graph(const EdgeMatrix& support, double lambda_sq) const {
  double total = 0.0;
  for (int j = 0; j < support.size(); ++j) total += node(j, support.parents(j));
  return total + lambda_sq * support.edge_count();
}

}  // namespace dagmip
