#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dagmip {

// min 0.5 x'Hx + f'x + constant  s.t.  A x <= b, assembled row by row.
class QpBuilder {
 public:
  explicit QpBuilder(int n = 0) { resize(n); }

  void resize(int n);
  int add_variable();
  int size() const { return static_cast<int>(f_.size()); }

  // Adds coeff * x_u * x_v to the objective (both orders when u != v).
  void add_quadratic(int u, int v, double coeff);
  void add_linear(int u, double coeff) { f_[u] += coeff; }
  void add_constant(double c) { constant_ += c; }
  void add_constraint(std::vector<std::pair<int, double>> row, double rhs);
  int constraint_count() const { return static_cast<int>(rows_.size()); }

  Eigen::MatrixXd hessian() const;
  const Eigen::VectorXd& linear() const { return f_; }
  double constant() const { return constant_; }
  Eigen::MatrixXd constraint_matrix() const;
  Eigen::VectorXd constraint_rhs() const;

 private:
  Eigen::MatrixXd h_;  // objective 0.5 x'h_x
  Eigen::VectorXd f_;
  double constant_ = 0.0;
  std::vector<std::vector<std::pair<int, double>>> rows_;
  std::vector<double> rhs_;
};

struct QpOptions {
  double tol = 1e-10;  // on the worst relative residual
  int max_iterations = 200;
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd z;  // multipliers of A x <= b
  double primal = 0.0;
  // Lagrangian dual value at (x, z): a lower bound on the optimum up to the
  // stationarity residual.
  double lower_bound = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Mehrotra predictor-corrector interior point method on the normal equations.
// Rows of A are rescaled internally; x0 need not be feasible.
QpResult solve_qp(const QpBuilder& qp, const Eigen::VectorXd& x0, const QpOptions& options = {});

}  // namespace dagmip
