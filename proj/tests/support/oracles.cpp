#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracle {

using dagmip::EdgeStatus;

double raw_omega(const dagmip::Dataset& data, const dagmip::BasisSystem& system, int j,
                 const std::vector<int>& parents) {
  const int n = data.n();
  const int R = system.R();
  const Eigen::VectorXd y = data.values.col(j);
  if (parents.empty()) return y.squaredNorm() / n;
  Eigen::MatrixXd x(n, 1 + R * static_cast<int>(parents.size()));
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    int c = 1;
    for (int k : parents) {
      const std::vector<double> b = system.evaluate(k, data.values(i, k));
      for (int r = 0; r < R; ++r) x(i, c++) = b[r];
    }
  }
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
  return (y - x * beta).squaredNorm() / n;
}

double raw_profile_score(const dagmip::Dataset& data, const dagmip::BasisSystem& system,
                         const dagmip::EdgeMatrix& support, double lambda_sq) {
  double s = lambda_sq * support.edge_count();
  for (int j = 0; j < data.p(); ++j) s += std::log(raw_omega(data, system, j, support.parents(j))) + 1.0;
  return s;
}

Quadrature gauss_hermite(int m) {
  // Jacobi matrix of the Hermite recurrence: off-diagonal sqrt(i / 2).
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) jac(i, i - 1) = jac(i - 1, i) = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
  Quadrature q;
  const double mu0 = std::sqrt(M_PI);
  for (int i = 0; i < m; ++i) {
    q.nodes.push_back(eig.eigenvalues()[i]);
    const double v = eig.eigenvectors()(0, i);
    q.weights.push_back(mu0 * v * v);
  }
  return q;
}

double gaussian_expectation(const std::function<double(double)>& f, double s, int m) {
  const Quadrature q = gauss_hermite(m);
  double acc = 0.0;
  for (int i = 0; i < m; ++i) acc += q.weights[i] * f(std::sqrt(2.0) * s * q.nodes[i]);
  return acc / std::sqrt(M_PI);
}

std::int64_t count_dags(int p) {
  std::vector<std::int64_t> a(p + 1, 0);
  a[0] = 1;
  for (int m = 1; m <= p; ++m) {
    std::int64_t binom = 1;
    for (int k = 1; k <= m; ++k) {
      binom = binom * (m - k + 1) / k;
      const std::int64_t term = binom * (std::int64_t{1} << (k * (m - k))) * a[m - k];
      a[m] += (k % 2 ? term : -term);
    }
  }
  return a[p];
}

namespace {

// Sparse linear inequality a'x <= b.
struct Row {
  std::vector<std::pair<int, double>> a;
  double b = 0.0;
};

}  // namespace

BarrierResult barrier_relaxation(const dagmip::MipProblem& problem, const dagmip::NodeBounds& bounds, double gap) {
  if (problem.mode != dagmip::VarianceMode::Unequal) throw std::invalid_argument("barrier: unequal mode only");
  if (!problem.partial_order.empty() || problem.max_edges) throw std::invalid_argument("barrier: no interior");
  const int p = problem.p;
  const int R = problem.R;
  const dagmip::Layout lay = problem.layout();
  const Eigen::MatrixXd& S = problem.gram->sigma;
  const double M = problem.big_M;
  auto status = [&](int k, int j) { return bounds[static_cast<std::size_t>(k) * p + j]; };

  // Variables: per row j the diagonal, the intercept (if any parent is possible)
  // and R coefficients per candidate parent; then g for free pairs; then psi.
  int nv = 0;
  std::vector<std::vector<std::pair<int, int>>> row_map(p);  // (variable, Gram column)
  std::vector<int> diag(p), icpt(p, -1);
  std::vector<int> gvar(p * p, -1);
  for (int j = 0; j < p; ++j) {
    diag[j] = nv++;
    row_map[j].push_back({diag[j], lay.x(j)});
    bool any = false;
    for (int k = 0; k < p; ++k) {
      if (k == j || status(k, j) == EdgeStatus::Excluded) continue;
      if (status(k, j) == EdgeStatus::Forced) throw std::invalid_argument("barrier: forced edges not supported");
      any = true;
      for (int r = 0; r < R; ++r) row_map[j].push_back({nv++, lay.basis(r, k)});
    }
    if (any) {
      icpt[j] = nv++;
      row_map[j].push_back({icpt[j], lay.constant()});
    }
  }
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (k != j && status(k, j) == EdgeStatus::Free) gvar[k * p + j] = nv++;
  std::vector<int> psi(p);
  for (int j = 0; j < p; ++j) psi[j] = nv++;

  std::vector<Row> rows;
  for (int j = 0; j < p; ++j) {
    rows.push_back({{{diag[j], -1.0}}, -problem.eps_diag});
    rows.push_back({{{diag[j], 1.0}}, M});
    std::vector<std::pair<int, double>> gsum;
    int idx = 1;
    for (int k = 0; k < p; ++k) {
      if (k == j || status(k, j) == EdgeStatus::Excluded) continue;
      const int g = gvar[k * p + j];
      gsum.push_back({g, -M});
      for (int r = 0; r < R; ++r, ++idx) {
        const int w = row_map[j][idx].first;
        rows.push_back({{{w, 1.0}, {g, -M}}, 0.0});
        rows.push_back({{{w, -1.0}, {g, -M}}, 0.0});
      }
      // 1 - p + p g <= psi_j - psi_k
      rows.push_back({{{g, static_cast<double>(p)}, {psi[j], -1.0}, {psi[k], 1.0}}, p - 1.0});
    }
    if (icpt[j] >= 0) {
      auto up = gsum, down = gsum;
      up.push_back({icpt[j], 1.0});
      down.push_back({icpt[j], -1.0});
      rows.push_back({up, 0.0});
      rows.push_back({down, 0.0});
    }
  }
  for (int k = 0; k < p; ++k)
    for (int j = 0; j < p; ++j)
      if (gvar[k * p + j] >= 0) {
        rows.push_back({{{gvar[k * p + j], -1.0}}, 0.0});
        rows.push_back({{{gvar[k * p + j], 1.0}}, 1.0});
      }
  for (int j = 0; j < p; ++j) {
    rows.push_back({{{psi[j], -1.0}}, -1.0});
    rows.push_back({{{psi[j], 1.0}}, static_cast<double>(p)});
  }

  // Constant Hessian of the trace term and the penalty gradient.
  Eigen::MatrixXd hq = Eigen::MatrixXd::Zero(nv, nv);
  for (int j = 0; j < p; ++j)
    for (auto [u, cu] : row_map[j])
      for (auto [v, cv] : row_map[j]) hq(u, v) += 2.0 * S(cu, cv);
  Eigen::VectorXd lin = Eigen::VectorXd::Zero(nv);
  for (int v : gvar)
    if (v >= 0) lin[v] = problem.lambda_sq;

  auto objective = [&](const Eigen::VectorXd& x) {
    double f = 0.5 * x.dot(hq * x) + lin.dot(x);
    for (int j = 0; j < p; ++j) f -= 2.0 * std::log(x[diag[j]]);
    return f;
  };
  auto slacks = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd s(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double ax = 0.0;
      for (auto [u, c] : rows[i].a) ax += c * x[u];
      s[i] = rows[i].b - ax;
    }
    return s;
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(nv);
  for (int j = 0; j < p; ++j) x[diag[j]] = std::clamp(1.0 / std::sqrt(S(j, j)), 2.0 * problem.eps_diag, 0.5 * M);
  for (int v : gvar)
    if (v >= 0) x[v] = 0.4;
  for (int j = 0; j < p; ++j) x[psi[j]] = 0.5 * (1.0 + p);
  if (slacks(x).minCoeff() <= 0.0) throw std::runtime_error("barrier: start point is not interior");

  const double m = static_cast<double>(rows.size());
  BarrierResult res;
  double t = 1.0;
  for (;;) {
    // Centering by damped Newton on t f + barrier.
    for (int it = 0; it < 200; ++it) {
      const Eigen::VectorXd s = slacks(x);
      Eigen::VectorXd grad = t * (hq * x + lin);
      Eigen::MatrixXd hess = t * hq;
      for (int j = 0; j < p; ++j) {
        grad[diag[j]] -= t * 2.0 / x[diag[j]];
        hess(diag[j], diag[j]) += t * 2.0 / (x[diag[j]] * x[diag[j]]);
      }
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double inv = 1.0 / s[static_cast<Eigen::Index>(i)];
        for (auto [u, cu] : rows[i].a) {
          grad[u] += cu * inv;
          for (auto [v, cv] : rows[i].a) hess(u, v) += cu * cv * inv * inv;
        }
      }
      const Eigen::VectorXd dx = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(dx);
      ++res.newton_steps;
      if (decrement / 2.0 <= 1e-12) break;
      auto phi = [&](const Eigen::VectorXd& v) {
        const Eigen::VectorXd sv = slacks(v);
        if (sv.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
        double b = 0.0;
        for (Eigen::Index i = 0; i < sv.size(); ++i) b -= std::log(sv[i]);
        for (int j = 0; j < p; ++j)
          if (v[diag[j]] <= 0.0) return std::numeric_limits<double>::infinity();
        return t * objective(v) + b;
      };
      const double f0 = phi(x);
      double step = 1.0;
      while (step > 1e-14 && phi(x + step * dx) > f0 - 0.25 * step * decrement) step *= 0.5;
      if (step <= 1e-14) break;
      x += step * dx;
    }
    // The -2 log terms are part of f, so the duality gap bound is m / t.
    if (m / t <= gap) break;
    t *= 8.0;
  }
  res.primal = objective(x);
  res.lower_bound = res.primal - m / t;
  return res;
}

}  // namespace oracle
