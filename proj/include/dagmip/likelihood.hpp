#pragma once

#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dagmip/basis.hpp"
#include "dagmip/dataset.hpp"
#include "dagmip/graph.hpp"

namespace dagmip {

enum class VarianceMode { Unequal, Equal };

std::string to_string(VarianceMode mode);
VarianceMode parse_variance_mode(const std::string& s);

// Scaled coefficient matrix, p x (pR + p + 1). Row j holds
//   [Gamma_jj at x(j)] [intercept at constant()] [-beta_rkj / sigma_j at basis(r, k)].
// In equal-variance mode the same layout stores B (identity block exactly I).
struct GammaMatrix {
  Eigen::MatrixXd gamma;
  Layout layout;

  GammaMatrix() = default;
  explicit GammaMatrix(Layout l) : gamma(Eigen::MatrixXd::Zero(l.p, l.dim())), layout(l) {}

  double diag(int j) const { return gamma(j, layout.x(j)); }
  double intercept(int j) const { return gamma(j, layout.constant()); }
  double coef(int j, int r, int k) const { return gamma(j, layout.basis(r, k)); }

  // Off-diagonal identity-block entries and beta_rjj must be zero.
  void validate_layout() const;
  void validate_positive_diagonal() const;
};

// theta = (f_kj, sigma_j) in basis-coefficient form.
struct ModelTheta {
  Layout layout;
  std::vector<Eigen::MatrixXd> beta;  // beta[r](k, j)
  Eigen::VectorXd intercept_sum;      // sum_k beta_0kj
  Eigen::VectorXd sigma;
  // beta_0kj = -sum_r beta_rkj E_hat[b_r(X_k)], centring each f_kj; zero if means unknown.
  Eigen::MatrixXd edge_intercept;

  // Sum over k of f_kj evaluated on one observation's basis values.
  double mean_of(int j, const Eigen::VectorXd& z) const;
};

// E_hat[b_r(X_k)] read off the constant row of the Gram matrix, R x p.
Eigen::MatrixXd basis_means(const GramMatrix& gram);

// sigma_j = 1 / Gamma_jj, beta = -Gamma_coef / Gamma_jj.
ModelTheta gamma_to_theta(const GammaMatrix& gamma, const Eigen::MatrixXd* means = nullptr);
GammaMatrix theta_to_gamma(const ModelTheta& theta);
// Equal-variance B plus a pooled sigma.
ModelTheta eqvar_to_theta(const GammaMatrix& b, double sigma, const Eigen::MatrixXd* means = nullptr);

// sum_j -2 log Gamma_jj + tr(Gamma^T Gamma Sigma_hat) + lambda^2 * |g|.
double objective_gram(const GammaMatrix& gamma, const GramMatrix& gram, double lambda_sq, const EdgeMatrix& g);

// sum_j log sigma_j^2 + ||X_j - sum_k f_kj(X_k)||_n^2 / sigma_j^2 + lambda^2 |g|,
// evaluated on raw samples.
double objective_samples(const ModelTheta& theta, const Dataset& data, const BasisSystem& system, double lambda_sq,
                         const EdgeMatrix& g);

struct EqVarObjective {
  double value = 0.0;
  // (1/p) tr(B^T B Sigma_hat): pooled mean squared residual over all n*p entries.
  double pooled_variance = 0.0;
};
EqVarObjective objective_eqvar(const GammaMatrix& b, const GramMatrix& gram, double lambda_sq, const EdgeMatrix& g);

double bic_unequal(const GammaMatrix& gamma, const EdgeMatrix& g, const GramMatrix& gram, int n);
double bic_equal(const GammaMatrix& b, const EdgeMatrix& g, const GramMatrix& gram, int n);

inline constexpr double kOmegaFloor = 1e-12;
inline constexpr double kRidgeFactor = 1e-10;

// Least-squares regression of X_j on the basis columns of `parents` (plus the
// constant column when parents is non-empty), solved from Gram sub-blocks.
struct NodeFit {
  double omega = 0.0;            // residual second moment, floored
  std::vector<int> columns;      // Gram indices of the regressors
  Eigen::VectorXd coefficients;  // least-squares solution on `columns`
};
NodeFit fit_node(const GramMatrix& gram, int j, std::span<const int> parents);

// Per-node contribution log(omega) + 1 (unequal) or omega (equal).
double node_score(const NodeFit& fit, VarianceMode mode);

struct ProfileFit {
  double score = 0.0;
  Eigen::VectorXd omega;
  Eigen::VectorXd node_contribution;
  double penalty = 0.0;
  GammaMatrix gamma;  // Gamma (unequal) or B (equal)
};

// Closed-form minimum of the objective over the coefficients and variances for a
// fixed support: sum_j (log omega_j + 1) + lambda^2 |g| (unequal) or
// sum_j omega_j + lambda^2 |g| (equal). The support need not be acyclic.
ProfileFit profile_score(const EdgeMatrix& support, const GramMatrix& gram, double lambda_sq,
                         VarianceMode mode = VarianceMode::Unequal);

// Memoized node_score per (node, sorted parent list). Safe for concurrent use.
class ScoreCache {
 public:
  ScoreCache(const GramMatrix& gram, VarianceMode mode) : gram_(&gram), mode_(mode) {}

  double node(int j, const std::vector<int>& parents) const;
  // sum_j node(j, parents_j) + lambda^2 |support|
  double graph(const EdgeMatrix& support, double lambda_sq) const;

  const GramMatrix& gram() const { return *gram_; }
  VarianceMode mode() const { return mode_; }

 private:
  const GramMatrix* gram_;
  VarianceMode mode_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<int, std::vector<int>>, double> table_;
};

}  // namespace dagmip
