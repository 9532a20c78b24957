#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dagmip/basis.hpp"
#include "dagmip/error.hpp"
#include "support/fixtures.hpp"

using namespace dagmip;

namespace {

Dataset column_data(std::vector<double> col) {
  Dataset d;
  d.values = Eigen::Map<Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size()));
  d.column_names = {"X1"};
  return d;
}

Dataset uniform_grid(int n) {
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) u[i] = (i + 0.5) / n;
  return column_data(u);
}

}  // namespace

TEST_SUITE("basis") {

TEST_CASE("quantile knots") {
  std::vector<double> col(100);
  std::iota(col.begin(), col.end(), 1.0);
  const auto one = build_knots(col, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == doctest::Approx(50.5).epsilon(1e-14));
  const auto three = build_knots(col, 3);
  REQUIRE(three.size() == 3);
  CHECK(three[0] == doctest::Approx(25.75).epsilon(1e-14));
  CHECK(three[1] == doctest::Approx(50.5).epsilon(1e-14));
  CHECK(three[2] == doctest::Approx(75.25).epsilon(1e-14));
  const std::vector<double> flat(10, 3.0);
  CHECK_THROWS_AS(build_knots(flat, 1), InvalidInput);
}

TEST_CASE("radial and sine evaluations") {
  BasisConfig radial;
  radial.kind = BasisKind::Radial;
  radial.knots = 1;
  const BasisSystem rs = BasisSystem::fit(radial, column_data({-1.0, -0.5, 0.0, 0.5, 1.0}));
  CHECK(rs.evaluate(0, 0.0)[0] == doctest::Approx(1.0).epsilon(1e-15));

  BasisConfig sine;
  sine.kind = BasisKind::Sine;
  sine.knots = 5;
  const Dataset g = uniform_grid(100);
  const BasisSystem ss = BasisSystem::fit(sine, g);
  for (double v : ss.evaluate(0, g.values.maxCoeff())) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("spline: length and partition of unity") {
  const BasisSystem s = BasisSystem::fit(fixture::small_spline(2, 2), uniform_grid(200));
  CHECK(s.R() == 4);
  for (double x = 0.0; x <= 1.0; x += 0.01) {
    const auto full = s.evaluate_full_spline(0, x);
    CHECK(full.size() == 5);
    CHECK(std::abs(std::accumulate(full.begin(), full.end(), 0.0) - 1.0) < 1e-10);
    for (double v : full) CHECK(v >= -1e-15);
  }
  // Clamped outside the training range.
  CHECK(s.evaluate(0, -5.0) == s.evaluate(0, 0.5 / 200));
  CHECK(s.evaluate(0, 5.0) == s.evaluate(0, 1.0 - 0.5 / 200));
}

TEST_CASE("extended vector layout") {
  Dataset d;
  d.values = Eigen::MatrixXd::Random(50, 3);
  d.column_names = default_column_names(3);
  BasisConfig sine;
  sine.kind = BasisKind::Sine;
  sine.knots = 2;
  const BasisSystem s = BasisSystem::fit(sine, d);
  const std::vector<double> x = {0.1, -0.2, 0.3};
  const Eigen::VectorXd z = s.extended_vector(x);
  CHECK(z.size() == 10);
  CHECK(z[s.layout().constant()] == 1.0);
  for (int k = 0; k < 3; ++k) {
    CHECK(z[k] == x[k]);
    const auto b = s.evaluate(k, x[k]);
    for (int r = 0; r < 2; ++r) CHECK(z[s.layout().basis(r, k)] == b[r]);
  }

  sine.knots = 1;
  const BasisSystem one = BasisSystem::fit(sine, column_data({0.0, 1.0, 2.0}));
  const std::vector<double> v = {1.0};
  const Eigen::VectorXd z1 = one.extended_vector(v);
  REQUIRE(z1.size() == 3);
  CHECK(z1[0] == 1.0);
  CHECK(z1[1] == 1.0);
  CHECK(z1[2] == one.evaluate(0, 1.0)[0]);
}

TEST_CASE("Gram matrix of one row is the outer product") {
  Dataset d;
  d.values = Eigen::MatrixXd::Random(30, 2);
  d.column_names = default_column_names(2);
  const BasisSystem s = BasisSystem::fit(fixture::small_spline(2, 1), d);
  const Dataset one = d.rows({7});
  const GramMatrix g = gram(s, one);
  const std::vector<double> row = {one.values(0, 0), one.values(0, 1)};
  const Eigen::VectorXd z = s.extended_vector(row);
  CHECK((g.sigma - z * z.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  const GramMatrix full = gram(s, d);
  CHECK(full.sigma(s.layout().constant(), s.layout().constant()) == 1.0);
  CHECK((full.sigma - full.sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sharded Gram reduction is deterministic and matches direct sums") {
  const fixture::Instance in = fixture::make_instance(4, 3, 2001, fixture::small_spline());
  const GramMatrix a = gram(in.system, in.data, 1);
  const GramMatrix b = gram(in.system, in.data, 3);
  CHECK((a.sigma - b.sigma).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(gram(in.system, in.data, 3).sigma == b.sigma);
  Eigen::MatrixXd direct = Eigen::MatrixXd::Zero(a.sigma.rows(), a.sigma.cols());
  for (int i = 0; i < in.data.n(); ++i) {
    std::vector<double> row(in.data.p());
    for (int k = 0; k < in.data.p(); ++k) row[k] = in.data.values(i, k);
    const Eigen::VectorXd z = in.system.extended_vector(row);
    direct += z * z.transpose();
  }
  direct /= in.data.n();
  CHECK((direct - a.sigma).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sine basis is orthogonal with second moment 1/2 on a uniform grid") {
  BasisConfig sine;
  sine.kind = BasisKind::Sine;
  sine.knots = 5;
  const BasisSystem s = BasisSystem::fit(sine, uniform_grid(10000));
  const GramMatrix g = gram(s, uniform_grid(10000));
  const Layout lay = s.layout();
  for (int r = 0; r < 5; ++r)
    for (int q = 0; q < 5; ++q)
      CHECK(std::abs(g.sigma(lay.basis(r, 0), lay.basis(q, 0)) - (r == q ? 0.5 : 0.0)) < 1e-3);
}

TEST_CASE("basis JSON round trip reproduces evaluations") {
  const fixture::Instance in = fixture::make_instance(3, 1, 200, BasisConfig{});
  const BasisSystem back = BasisSystem::from_json(in.system.to_json());
  for (int k = 0; k < 3; ++k)
    for (double x : {-1.0, -0.2, 0.0, 0.4, 2.0}) CHECK(back.evaluate(k, x) == in.system.evaluate(k, x));
  for (BasisKind kind : {BasisKind::Radial, BasisKind::Sine}) {
    BasisConfig c;
    c.kind = kind;
    c.knots = 3;
    const BasisSystem s = BasisSystem::fit(c, in.data);
    const BasisSystem t = BasisSystem::from_json(s.to_json());
    for (double x : {-0.7, 0.1, 0.9}) CHECK(t.evaluate(2, x) == s.evaluate(2, x));
  }
}

}  // TEST_SUITE
