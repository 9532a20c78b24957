#include <doctest.h>

#include <cmath>
#include <random>

#include "dagmip/error.hpp"
#include "dagmip/likelihood.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace dagmip;

namespace {

// Gamma supported on g: positive diagonal, intercept iff the node has parents.
GammaMatrix random_gamma(const EdgeMatrix& g, Layout lay, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> diag(0.5, 2.0), coef(-1.0, 1.0);
  GammaMatrix gm(lay);
  for (int j = 0; j < lay.p; ++j) {
    gm.gamma(j, lay.x(j)) = diag(rng);
    const auto parents = g.parents(j);
    if (!parents.empty()) gm.gamma(j, lay.constant()) = coef(rng);
    for (int k : parents)
      for (int r = 0; r < lay.R; ++r) gm.gamma(j, lay.basis(r, k)) = coef(rng);
  }
  return gm;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_SUITE("likelihood") {

TEST_CASE("identity scaling of one standard normal column") {
  Dataset d;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  d.values.resize(5000, 1);
  for (int i = 0; i < 5000; ++i) d.values(i, 0) = z(rng);
  d.column_names = {"X1"};
  BasisConfig sine;
  sine.kind = BasisKind::Sine;
  sine.knots = 1;
  const BasisSystem s = BasisSystem::fit(sine, d);
  const GramMatrix g = gram(s, d);
  GammaMatrix gm(s.layout());
  gm.gamma(0, 0) = 1.0;
  const double v = objective_gram(gm, g, 0.0, EdgeMatrix(1));
  CHECK(v == doctest::Approx(g.sigma(0, 0)).epsilon(1e-14));
  CHECK(std::abs(v - 1.0) < 0.06);
}

TEST_CASE("penalty is linear in the edge count") {
  const fixture::Instance in = fixture::make_instance(3, 1, 200, fixture::small_spline());
  const EdgeMatrix g = EdgeSet(3, {{0, 1}, {0, 2}, {1, 2}}).to_matrix();
  std::mt19937_64 rng(5);
  const GammaMatrix gm = random_gamma(g, in.gram->layout, rng);
  CHECK(objective_gram(gm, *in.gram, 0.5, g) - objective_gram(gm, *in.gram, 0.0, g) ==
        doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("Gram and sample objectives agree on random Gamma") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const fixture::Instance in = fixture::make_instance(3, trial, 50, fixture::small_spline(1, 1));
    REQUIRE(in.system.R() == 2);
    const EdgeMatrix g = random_dag(3, 0.7, 40 + trial).adjacency();
    const GammaMatrix gm = random_gamma(g, in.gram->layout, rng);
    const Eigen::MatrixXd means = basis_means(*in.gram);
    const ModelTheta theta = gamma_to_theta(gm, &means);
    const double a = objective_gram(gm, *in.gram, 0.1, g);
    const double b = objective_samples(theta, in.data, in.system, 0.1, g);
    CHECK(rel(a, b) < 1e-9);
  }
}

TEST_CASE("sample objective with zero functions and unit sigma") {
  const fixture::Instance in = fixture::make_instance(3, 2, 80, fixture::small_spline());
  GammaMatrix gm(in.gram->layout);
  for (int j = 0; j < 3; ++j) gm.gamma(j, j) = 1.0;
  const ModelTheta theta = gamma_to_theta(gm);
  double expect = 0.0;
  for (int j = 0; j < 3; ++j) expect += in.data.values.col(j).squaredNorm() / in.data.n();
  CHECK(objective_samples(theta, in.data, in.system, 0.0, EdgeMatrix(3)) == doctest::Approx(expect).epsilon(1e-12));

  // log s^2 + c / s^2 at s = 1 and at the minimizer s^2 = c.
  const double c = in.data.values.col(0).squaredNorm() / in.data.n();
  GammaMatrix opt = gm;
  opt.gamma(0, 0) = 1.0 / std::sqrt(c);
  const double delta = objective_samples(gamma_to_theta(opt), in.data, in.system, 0.0, EdgeMatrix(3)) -
                       objective_samples(theta, in.data, in.system, 0.0, EdgeMatrix(3));
  CHECK(delta == doctest::Approx(std::log(c) + 1.0 - c).epsilon(1e-12));
}

TEST_CASE("profile score of a parentless node") {
  const fixture::Instance in = fixture::make_instance(3, 4, 120, fixture::small_spline());
  const ProfileFit f = profile_score(EdgeMatrix(3), *in.gram, 0.0);
  for (int j = 0; j < 3; ++j) {
    CHECK(f.omega[j] == in.gram->sigma(j, j));
    CHECK(f.node_contribution[j] == doctest::Approx(std::log(in.gram->sigma(j, j)) + 1.0).epsilon(1e-15));
    CHECK(f.gamma.intercept(j) == 0.0);
  }
}

TEST_CASE("profile score matches raw least squares") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const int p = 3 + trial % 3;
    const fixture::Instance in = fixture::make_instance(p, trial, 150 + 10 * trial, fixture::small_spline(2, 1 + trial % 3));
    const EdgeMatrix g = random_dag(p, 0.5, rng()).adjacency();
    const double lam = 0.05 * (trial % 4);
    const double a = profile_score(g, *in.gram, lam).score;
    const double b = oracle::raw_profile_score(in.data, in.system, g, lam);
    CHECK(std::abs(a - b) < 1e-9);
  }
}

TEST_CASE("two variables: the strong edge lowers the score") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  Dataset d;
  d.values.resize(400, 2);
  for (int i = 0; i < 400; ++i) {
    d.values(i, 0) = z(rng);
    d.values(i, 1) = d.values(i, 0) + 0.1 * z(rng);
  }
  d.column_names = default_column_names(2);
  d = d.centered();
  const BasisSystem s = BasisSystem::fit(fixture::small_spline(), d);
  const GramMatrix g = gram(s, d);
  const EdgeMatrix edge = EdgeSet(2, {{0, 1}}).to_matrix();
  const double with = profile_score(edge, g, 0.01).score;
  const double without = profile_score(EdgeMatrix(2), g, 0.01).score;
  CHECK(with < without);
  CHECK(std::abs(with - oracle::raw_profile_score(d, s, edge, 0.01)) < 1e-9);
}

TEST_CASE("profile Gamma minimizes the Gram objective on its support") {
  const fixture::Instance in = fixture::make_instance(3, 6, 200, fixture::small_spline());
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  EdgeMatrix best_profile, best_gram;
  double vp = 1e300, vg = 1e300;
  for (const EdgeMatrix& g : enumerate_dags(3)) {
    const ProfileFit f = profile_score(g, *in.gram, 0.02);
    const double at = objective_gram(f.gamma, *in.gram, 0.02, g);
    CHECK(std::abs(at - f.score) < 1e-9);
    // Random perturbations inside the support never do better.
    for (int t = 0; t < 5; ++t) {
      GammaMatrix q = f.gamma;
      for (int j = 0; j < 3; ++j) {
        q.gamma(j, j) *= 1.0 + 0.01 * z(rng);
        if (!g.parents(j).empty()) q.gamma(j, in.gram->layout.constant()) += 0.01 * z(rng);
        for (int k : g.parents(j))
          for (int r = 0; r < in.gram->R(); ++r) q.gamma(j, in.gram->layout.basis(r, k)) += 0.01 * z(rng);
      }
      CHECK(objective_gram(q, *in.gram, 0.02, g) >= at - 1e-12);
    }
    if (f.score < vp) vp = f.score, best_profile = g;
    if (at < vg) vg = at, best_gram = g;
  }
  CHECK(best_profile == best_gram);
}

TEST_CASE("equal-variance objective") {
  const fixture::Instance in = fixture::make_instance(4, 3, 200, fixture::small_spline());
  GammaMatrix b(in.gram->layout);
  for (int j = 0; j < 4; ++j) b.gamma(j, j) = 1.0;
  const EdgeMatrix two = EdgeSet(4, {{0, 1}, {2, 3}}).to_matrix();
  CHECK(objective_eqvar(b, *in.gram, 0.3, two).value ==
        doctest::Approx(in.gram->sigma.diagonal().head(4).sum() + 0.6).epsilon(1e-13));

  double prev = 1e300;
  EdgeMatrix g(4);
  for (const auto& [k, j] : std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}, {2, 3}, {0, 3}}) {
    g.set(k, j);
    const ProfileFit f = profile_score(g, *in.gram, 0.0, VarianceMode::Equal);
    CHECK(f.score == doctest::Approx(f.omega.sum()).epsilon(1e-13));
    CHECK(objective_eqvar(f.gamma, *in.gram, 0.0, g).value == doctest::Approx(f.omega.sum()).epsilon(1e-10));
    CHECK(f.score <= prev + 1e-15);
    prev = f.score;
  }
}

TEST_CASE("BIC penalties") {
  const fixture::Instance in = fixture::make_instance(5, 1, 100, fixture::small_spline());
  const ProfileFit empty = profile_score(EdgeMatrix(5), *in.gram, 0.0);
  const double rate = std::log(100.0) / 100.0;
  CHECK(bic_unequal(empty.gamma, EdgeMatrix(5), *in.gram, 100) == doctest::Approx(empty.score + 5 * rate));

  EdgeMatrix seven(5);
  for (const auto& [k, j] : std::vector<Edge>{{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {1, 4}}) seven.set(k, j);
  const ProfileFit f = profile_score(seven, *in.gram, 0.0);
  const double penalty = bic_unequal(f.gamma, seven, *in.gram, 100) - objective_gram(f.gamma, *in.gram, 0.0, seven);
  CHECK(penalty == doctest::Approx(12 * rate).epsilon(1e-12));
  CHECK(penalty == doctest::Approx(0.5526).epsilon(1e-4));
  // Holding Gamma fixed, more indicators cost more.
  EdgeMatrix eight = seven;
  eight.set(2, 3);
  CHECK(bic_unequal(f.gamma, eight, *in.gram, 100) > bic_unequal(f.gamma, seven, *in.gram, 100));

  const ProfileFit e = profile_score(EdgeMatrix(5), *in.gram, 0.0, VarianceMode::Equal);
  CHECK(bic_equal(e.gamma, EdgeMatrix(5), *in.gram, 100) == doctest::Approx(e.score).epsilon(1e-13));
  const EdgeMatrix one = EdgeSet(5, {{0, 1}}).to_matrix();
  const ProfileFit e1 = profile_score(one, *in.gram, 0.0, VarianceMode::Equal);
  CHECK(bic_equal(e1.gamma, one, *in.gram, 100) - objective_eqvar(e1.gamma, *in.gram, 0.0, one).value ==
        doctest::Approx(rate).epsilon(1e-12));
  CHECK(bic_equal(e1.gamma, one, *in.gram, 100) == objective_eqvar(e1.gamma, *in.gram, rate, one).value);
  CHECK_THROWS_AS(bic_equal(e1.gamma, one, *in.gram, 1), InvalidInput);
}

TEST_CASE("Gamma and theta conversions") {
  Layout lay{2, 2};
  GammaMatrix gm(lay);
  gm.gamma(0, 0) = 2.0;
  gm.gamma(1, 1) = 1.0;
  const ModelTheta t = gamma_to_theta(gm);
  CHECK(t.sigma[0] == 0.5);
  for (const auto& b : t.beta) CHECK(b.cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Layout l{4, 3};
    const GammaMatrix g = random_gamma(random_dag(4, 0.6, trial).adjacency(), l, rng);
    const GammaMatrix back = theta_to_gamma(gamma_to_theta(g));
    CHECK((back.gamma - g.gamma).cwiseAbs().maxCoeff() < 1e-12);
  }
  GammaMatrix bad(lay);
  bad.gamma(0, 0) = -1.0;
  bad.gamma(1, 1) = 1.0;
  CHECK_THROWS(bad.validate_positive_diagonal());
}

TEST_CASE("score cache agrees with the direct profile score") {
  const fixture::Instance in = fixture::make_instance(4, 9, 250, fixture::small_spline());
  for (VarianceMode mode : {VarianceMode::Unequal, VarianceMode::Equal}) {
    const ScoreCache cache(*in.gram, mode);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const EdgeMatrix g = random_dag(4, 0.5, s).adjacency();
      CHECK(cache.graph(g, 0.07) == doctest::Approx(profile_score(g, *in.gram, 0.07, mode).score).epsilon(1e-14));
    }
  }
}

}  // TEST_SUITE
