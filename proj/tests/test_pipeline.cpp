#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dagmip/error.hpp"
#include "dagmip/pipeline.hpp"
#include "support/fixtures.hpp"

using namespace dagmip;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dagmip_test_" + name)).string();
}

FitConfig quick_config() {
  FitConfig c;
  c.basis = fixture::small_spline();
  c.lambda.values = {0.02};
  c.mode = RegimeScope::Unequal;
  c.solver.tau_early = 0.0;
  return c;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("single lambda and regime gives one table row") {
  const fixture::Instance in = fixture::make_instance(3, 1, 200, fixture::small_spline());
  const FitResult r = fit(quick_config(), in.data);
  REQUIRE(r.table.size() == 1);
  CHECK(r.chosen == 0);
  CHECK(r.bic == r.table[0].bic);
  CHECK(is_acyclic(r.graph.adjacency()));
}

TEST_CASE("chosen BIC is the table minimum and every graph is acyclic") {
  const fixture::Instance in = fixture::make_instance(4, 2, 250, fixture::small_spline());
  FitConfig c = quick_config();
  c.lambda.values = {};
  c.mode = RegimeScope::Auto;
  const FitResult r = fit(c, in.data, 2);
  CHECK(r.table.size() == 12);
  for (const GridRow& row : r.table) {
    CHECK(r.bic <= row.bic);
    CHECK(is_acyclic(row.graph));
  }
  CHECK(r.table[r.chosen].bic == r.bic);
  CHECK(r.graph.adjacency() == r.table[r.chosen].graph);
  const nlohmann::json j = r.to_json(false);
  CHECK(j["table"].size() == 12);
  CHECK_FALSE(j.contains("wall_time"));
  CHECK(r.dot().rfind("digraph", 0) == 0);
}

TEST_CASE("results are reproducible and independent of the thread count") {
  const fixture::Instance in = fixture::make_instance(4, 3, 200, fixture::small_spline());
  FitConfig c = quick_config();
  c.lambda.values = {0.01, 0.05};
  c.mode = RegimeScope::Auto;
  c.priors.bootstrap = 4;
  c.seed = 11;
  const std::string a = fit(c, in.data, 1).to_json(false).dump();
  CHECK(fit(c, in.data, 1).to_json(false).dump() == a);
  CHECK(fit(c, in.data, 4).to_json(false).dump() == a);
  c.seed = 12;
  CHECK(fit(c, in.data, 1).config_hash != fit(quick_config(), in.data, 1).config_hash);
}

TEST_CASE("config validation and JSON") {
  FitConfig c = quick_config();
  CHECK_NOTHROW(c.validate());
  CHECK(FitConfig::from_json(c.to_json()).to_json() == c.to_json());
  FitConfig bad = c;
  bad.priors.tau_super = 0.99;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = c;
  bad.solver.time_limit = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = c;
  bad.lambda.values = {};
  bad.lambda.scales = {};
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  nlohmann::json j = c.to_json();
  j["unknown"] = 1;
  CHECK_THROWS_AS(FitConfig::from_json(j), InvalidInput);

  LambdaGrid g;
  const auto v = g.resolve(5, 100);
  REQUIRE(v.size() == 6);
  const double base = 5 * std::log(5.0) * std::log(5.0) / 100;
  CHECK(v[3] == doctest::Approx(base));
  CHECK(v[0] == doctest::Approx(0.1 * base));
}

TEST_CASE("metrics") {
  const EdgeMatrix t = EdgeSet(3, {{0, 1}}).to_matrix();
  nlohmann::json m = metrics_json(t, t);
  CHECK(m["shd"] == 0);
  CHECK(m["extra"] == 0);
  CHECK(m["missing"] == 0);
  CHECK(m["reversed"] == 0);
  CHECK(m["exact"] == true);
  m = metrics_json(EdgeSet(3, {{1, 0}}).to_matrix(), t);
  CHECK(m["shd"] == 2);
  CHECK(m["reversed"] == 1);
  m = metrics_json(EdgeSet(3, {{1, 2}}).to_matrix(), t);
  CHECK(m["shd"] == 2);
  CHECK(m["extra"] == 1);
  CHECK(m["missing"] == 1);
  CHECK_THROWS(metrics_json(EdgeMatrix(2), t));
}

TEST_CASE("plot data") {
  std::ostringstream empty;
  write_grid_csv(empty, {});
  CHECK(empty.str() == "lambda_sq,regime,bic,shd,gap,time\n");
  std::ostringstream trials;
  write_trial_csv(trials, {});
  CHECK(trials.str() == "n,method,recovery_rate,shd\n");

  GridRow row;
  row.lambda_sq = 0.5;
  row.graph = EdgeSet(2, {{0, 1}}).to_matrix();
  std::ostringstream one;
  const EdgeMatrix truth = EdgeSet(2, {{0, 1}}).to_matrix();
  write_grid_csv(one, {row}, &truth);
  CHECK(line_count(one.str()) == 2);
  CHECK(one.str().find("\n0.5,unequal,") != std::string::npos);

  std::ostringstream batch;
  write_trial_csv(batch, {{100, "mip", true, 0}, {100, "mip", false, 2}, {50, "greedy", false, 4}});
  CHECK(batch.str() == "n,method,recovery_rate,shd\n50,greedy,0,4\n100,mip,0.5,1\n");
}

TEST_CASE("simulate is byte reproducible and writes the truth") {
  const SemSpec spec = example_model(EdgeFunction::parse("sin"), 0.1, 0.3);
  const std::string a = temp_path("a.csv"), b = temp_path("b.csv");
  simulate(spec, 100, 5, a, a + ".truth.json");
  simulate(spec, 100, 5, b, b + ".truth.json");
  CHECK(slurp(a) == slurp(b));
  const EdgeSet truth = edge_set_from_json(nlohmann::json::parse(slurp(a + ".truth.json")));
  CHECK(truth.to_matrix() == spec.dag().adjacency());
  const Dataset d = read_csv_file(a);
  CHECK(d.n() == 100);
  CHECK(d.p() == 5);
  for (const std::string& f : {a, b, a + ".truth.json", b + ".truth.json"}) std::filesystem::remove(f);
}

TEST_CASE("simulate then fit an easy instance") {
  SemSpec spec;
  spec.p = 3;
  spec.sigmas = {1.0, 0.3, 0.3};
  spec.edges.push_back({0, 1, EdgeFunction::parse("square")});
  spec.edges.push_back({0, 2, EdgeFunction::parse("abs")});
  const std::string path = temp_path("easy.csv");
  simulate(spec, 600, 3, path, path + ".truth.json");
  FitConfig c = quick_config();
  c.lambda.values = {0.02};
  const FitResult r = fit_file(c, path);
  CHECK(shd(r.graph.adjacency(), spec.dag().adjacency()) == 0);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".truth.json");
}

TEST_CASE("certify") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const fixture::Instance in = fixture::make_instance(3, seed, 150, fixture::small_spline());
    FitConfig c = quick_config();
    c.lambda.values = {0.01, 0.1};
    c.mode = RegimeScope::Auto;
    const CertifyReport rep = certify(c, in.data);
    CHECK(rep.cases.size() == 4);
    CHECK(rep.pass());
  }
  const fixture::Instance in = fixture::make_instance(4, 7, 200, fixture::small_spline());
  FitConfig loose = quick_config();
  loose.solver.tau_early = 0.5;
  const CertifyReport lr = certify(loose, in.data);
  for (const CertifyCase& k : lr.cases) {
    CHECK(k.solver_score <= k.oracle_score + 0.5 + 1e-9);
    CHECK(k.pass);
  }
  FitConfig restricted = quick_config();
  restricted.priors.sets = ConstraintSets{EdgeSet(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}), EdgeSet(4), EdgeSet(4)}.to_json();
  CHECK(certify(restricted, in.data).pass());
  const fixture::Instance big = fixture::make_instance(6, 1, 100, fixture::small_spline());
  CHECK_THROWS_AS(certify(quick_config(), big.data), SizeError);
}

TEST_CASE("explicit sets exclude bootstrap") {
  const fixture::Instance in = fixture::make_instance(3, 1, 100, fixture::small_spline());
  FitConfig c = quick_config();
  c.priors.bootstrap = 2;
  c.priors.sets = ConstraintSets{}.to_json();
  CHECK_THROWS_AS(c.validate(), InvalidInput);
}

TEST_CASE("hashes") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

}  // TEST_SUITE
