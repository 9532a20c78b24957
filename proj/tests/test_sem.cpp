#include <doctest.h>

#include <cmath>
#include <string>

#include "dagmip/error.hpp"
#include "dagmip/sem.hpp"
#include "support/oracles.hpp"

using namespace dagmip;

namespace {

double column_mean(const Dataset& d, int j) { return d.values.col(j).mean(); }

double column_var(const Dataset& d, int j) {
  const double m = column_mean(d, j);
  return (d.values.col(j).array() - m).square().mean();
}

}  // namespace

TEST_SUITE("sem") {

TEST_CASE("independent unit-variance columns") {
  SemSpec spec;
  spec.p = 3;
  spec.sigmas = {1.0, 1.0, 1.0};
  const Dataset d = sample(spec, 100000, 4);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(column_mean(d, j)) < 0.02);
    CHECK(std::abs(column_var(d, j) - 1.0) < 0.03);
  }
}

TEST_CASE("example model: X2 is centred") {
  const SemSpec spec = example_model(EdgeFunction::parse("sin"), 0.1, 0.3);
  const Dataset d = sample(spec, 100000, 9);
  CHECK(std::abs(column_mean(d, 1)) < 0.02);
  CHECK(std::abs(column_mean(d, 2)) < 0.02);
  CHECK(spec.dag() == example_model_dag());
  CHECK(example_model_dag().edge_count() == 3);
}

TEST_CASE("same seed, same sample") {
  const SemSpec spec = example_model(EdgeFunction::parse("exp"), 0.5, 0.5);
  const Dataset a = sample(spec, 500, 3);
  const Dataset b = sample(spec, 500, 3);
  CHECK(a.values == b.values);
  CHECK(sample(spec, 500, 4).values != a.values);
}

TEST_CASE("centering constants") {
  const EdgeFunction sq = EdgeFunction::parse("square");
  REQUIRE(gaussian_mean(sq, 0.5).has_value());
  CHECK(*gaussian_mean(sq, 0.5) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(*gaussian_mean(EdgeFunction::parse("linear"), 2.0) == doctest::Approx(0.0));

  // Monte-Carlo estimate of E sin(X), X ~ N(0,1), against quadrature.
  std::normal_distribution<double> z;
  const double mc = center_constant(EdgeFunction::parse("sin"), [&](Rng& r) { return z(r); }, 1'000'000, 12);
  const double quad = oracle::gaussian_expectation([](double x) { return std::sin(x); }, 1.0);
  CHECK(std::abs(quad) < 1e-12);
  CHECK(std::abs(mc - quad) < 3e-3);
}

TEST_CASE("closed-form Gaussian means agree with quadrature") {
  for (std::string tag : {"cos_mix", "square", "abs", "exp", "half_cube", "linear", "sin"}) {
    const EdgeFunction fn = EdgeFunction::parse(tag);
    for (double s : {0.3, 0.5, 1.0}) {
      const auto closed = gaussian_mean(fn, s);
      if (!closed) continue;
      double q = oracle::gaussian_expectation([&](double x) { return fn(x); }, s);
      if (tag == "abs") {
        // Kink at 0 spoils Gauss-Hermite; Simpson on the half line instead.
        const int m = 20000;
        const double h = 12.0 * s / m;
        q = 0.0;
        for (int i = 0; i <= m; ++i) {
          const double x = i * h;
          const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
          q += w * x * std::exp(-0.5 * x * x / (s * s));
        }
        q *= 2.0 * h / 3.0 / (s * std::sqrt(2.0 * M_PI));
      }
      CHECK_MESSAGE(std::abs(*closed - q) < 1e-10, tag << " s=" << s);
    }
  }
}

TEST_CASE("regression on true parents recovers the noise variance") {
  const SemSpec spec = example_model(EdgeFunction::parse("sin"), 0.1, 0.3);
  const Dataset d = sample(spec, 100000, 21);
  // X2 - (X1^2 - 0.25) is pure noise.
  const Eigen::ArrayXd r2 = d.values.col(1).array() - (d.values.col(0).array().square() - 0.25);
  CHECK(std::abs(r2.square().mean() / (0.1 * 0.1) - 1.0) < 0.05);
}

TEST_CASE("spec JSON round trip and validation") {
  const SemSpec spec = example_model(EdgeFunction::parse("arctan_sq"), 0.5, 0.5, 3);
  const SemSpec back = SemSpec::from_json(spec.to_json());
  CHECK(back.p == spec.p);
  CHECK(back.edges.size() == spec.edges.size());
  CHECK(back.dag() == spec.dag());
  nlohmann::json bad = spec.to_json();
  bad["sigmas"][0] = -1.0;
  CHECK_THROWS(SemSpec::from_json(bad));
  nlohmann::json typo = spec.to_json();
  typo["edges"][0]["function"] = "sin";
  CHECK_THROWS_AS(SemSpec::from_json(typo), InvalidInput);
  CHECK_THROWS_AS(EdgeFunction::parse("nope"), InvalidInput);
}

TEST_CASE("random DAG and heteroscedastic sigmas") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dag g = random_dag(6, 0.5, s);
    CHECK(is_acyclic(g.adjacency()));
    for (double v : heteroscedastic_sigmas(6, 3.0, s)) {
      CHECK(v >= 0.5);
      CHECK(v <= 1.0);
    }
  }
}

}  // TEST_SUITE
