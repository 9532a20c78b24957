#include "dagmip/qp.hpp"

#include <algorithm>
#include <cmath>

#include "dagmip/error.hpp"

namespace dagmip {

void QpBuilder::resize(int n) {
  const int old = size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  const int keep = std::min(old, n);
  h.topLeftCorner(keep, keep) = h_.topLeftCorner(keep, keep);
  f.head(keep) = f_.head(keep);
  h_ = std::move(h);
  f_ = std::move(f);
}

int QpBuilder::add_variable() {
  resize(size() + 1);
  return size() - 1;
}

void QpBuilder::add_quadratic(int u, int v, double coeff) {
  // 0.5 x'Hx with H symmetric: coeff * x_u * x_v.
  if (u == v) {
    h_(u, u) += 2.0 * coeff;
  } else {
    h_(u, v) += coeff;
    h_(v, u) += coeff;
  }
}

void QpBuilder::add_constraint(std::vector<std::pair<int, double>> row, double rhs) {
  rows_.push_back(std::move(row));
  rhs_.push_back(rhs);
}

Eigen::MatrixXd QpBuilder::hessian() const { return h_; }

Eigen::MatrixXd QpBuilder::constraint_matrix() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(constraint_count(), size());
  for (int i = 0; i < constraint_count(); ++i)
    for (auto [u, c] : rows_[i]) a(i, u) += c;
  return a;
}

Eigen::VectorXd QpBuilder::constraint_rhs() const {
  return Eigen::Map<const Eigen::VectorXd>(rhs_.data(), static_cast<Eigen::Index>(rhs_.size()));
}

namespace {

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

}  // namespace

QpResult solve_qp(const QpBuilder& qp, const Eigen::VectorXd& x0, const QpOptions& options) {
  // Objective scaled to unit size; multipliers and values are mapped back at the end.
  const double oscale = std::max({1.0, qp.hessian().cwiseAbs().maxCoeff(),
                                  qp.size() ? qp.linear().cwiseAbs().maxCoeff() : 0.0});
  const Eigen::MatrixXd h = qp.hessian() / oscale;
  const Eigen::VectorXd f = qp.linear() / oscale;
  const double c0 = qp.constant() / oscale;
  Eigen::MatrixXd a = qp.constraint_matrix();
  Eigen::VectorXd b = qp.constraint_rhs();
  const int n = qp.size();
  const int m = static_cast<int>(a.rows());
  if (x0.size() != n) throw InvalidInput("solve_qp: start point has wrong size");

  for (int i = 0; i < m; ++i) {
    const double scale = a.row(i).cwiseAbs().maxCoeff();
    if (scale > 0.0) {
      a.row(i) /= scale;
      b[i] /= scale;
    }
  }

  QpResult res;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd s = (b - a * x).cwiseMax(1.0);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(m);
  const double bnorm = 1.0 + (m ? b.cwiseAbs().maxCoeff() : 0.0);
  const auto dual_scale = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& zv) {
    double m_ = n ? f.cwiseAbs().maxCoeff() : 0.0;
    if (n) m_ = std::max({m_, (h * xv).cwiseAbs().maxCoeff(), (a.transpose() * zv).cwiseAbs().maxCoeff()});
    return 1.0 + m_;
  };
  const double reg = 1e-13 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());

  Eigen::VectorXd rd, rp;
  auto objective = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(h * v) + f.dot(v) + c0; };
  // Worst relative violation of primal feasibility and stationarity.
  auto residual = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& sv, const Eigen::VectorXd& zv) {
    const Eigen::VectorXd rdv = h * xv + f + a.transpose() * zv;
    const Eigen::VectorXd rpv = a * xv + sv - b;
    const double e_p = m ? rpv.cwiseAbs().maxCoeff() / bnorm : 0.0;
    const double e_d = n ? rdv.cwiseAbs().maxCoeff() / dual_scale(xv, zv) : 0.0;
    return std::max(e_p, e_d);
  };
  // ... plus complementarity.
  auto merit = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& sv, const Eigen::VectorXd& zv) {
    return std::max(residual(xv, sv, zv), sv.dot(zv) / (1.0 + std::abs(objective(xv))));
  };

  Eigen::VectorXd best_x = x, best_s = s, best_z = z;
  double best_merit = merit(x, s, z);
  int stall = 0;
  for (int it = 0; it < options.max_iterations && best_merit > options.tol && stall < 20; ++it) {
    rd = h * x + f + a.transpose() * z;
    rp = a * x + s - b;
    const double mu = s.dot(z) / m;
    const Eigen::VectorXd d = z.cwiseQuotient(s);
    Eigen::MatrixXd k = h;
    k.noalias() += a.transpose() * d.asDiagonal() * a;
    k.diagonal().array() += reg;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) break;  // ill-conditioned near the solution

    Eigen::VectorXd dx, ds, dz;
    auto direction = [&](const Eigen::VectorXd& rc) {
      const Eigen::VectorXd rhs = -rd - a.transpose() * (z.cwiseProduct(rp) - rc).cwiseQuotient(s);
      dx = llt.solve(rhs);
      // Iterative refinement against the unreduced stationarity row.
      for (int pass = 0;; ++pass) {
        ds = -rp - a * dx;
        dz = -(rc + z.cwiseProduct(ds)).cwiseQuotient(s);
        if (pass == 3) break;
        const Eigen::VectorXd r1 = h * dx + a.transpose() * dz + rd;
        dx -= llt.solve(r1);
      }
    };

    direction(s.cwiseProduct(z));
    const double alpha_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = (s + alpha_aff * ds).dot(z + alpha_aff * dz) / m;
    const double sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3.0);
    const Eigen::VectorXd rc = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Eigen::VectorXd::Constant(m, sigma * mu);
    direction(rc);

    const double alpha = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(z, dz)));
    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
    res.iterations = it + 1;
    const double e = merit(x, s, z);
    if (e < best_merit) {
      stall = e < 0.9 * best_merit ? 0 : stall + 1;
      best_merit = e;
      best_x = x;
      best_s = s;
      best_z = z;
    } else {
      ++stall;
    }
  }

  x = std::move(best_x);
  s = std::move(best_s);
  z = std::move(best_z);
  rp = a * x + s - b;
  res.converged = best_merit <= options.tol;
  res.primal = oscale * objective(x);
  res.lower_bound = res.primal + oscale * z.dot(a * x - b);
  // The dual value stays a valid bound with a complementarity gap left over (it is
  // simply weaker), so only infeasibility or non-stationarity is fatal.
  const double r = residual(x, s, z);
  if (r > 1e-8) throw ConvergenceError("solve_qp: interior point method did not converge", r);
  res.x = std::move(x);
  // Undo the row and objective scaling.
  const Eigen::MatrixXd a_raw = qp.constraint_matrix();
  for (int i = 0; i < m; ++i) {
    const double scale = a_raw.row(i).cwiseAbs().maxCoeff();
    if (scale > 0.0) z[i] /= scale;
  }
  res.z = oscale * z;
  return res;
}

}  // namespace dagmip
