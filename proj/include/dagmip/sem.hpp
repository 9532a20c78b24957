#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dagmip/dataset.hpp"
#include "dagmip/graph.hpp"

namespace dagmip {

using Rng = std::mt19937_64;

enum class FunctionKind {
  Linear,     // x
  Sin,        // sin(x)
  CosMix,     // (sin(x) + cos(x)) / 2
  SinSin,     // sin(x + sin(x))
  SinInverse, // sin(20 / x), 0 near the origin
  Square,     // x^2
  Abs,        // |x|
  ArctanSq,   // arctan(x^2)
  Exp,        // exp(x)
  HalfCube,   // 0.5 x^3
  Poly,       // sum_i c_i x^(i+1)
};

struct EdgeFunction {
  FunctionKind kind = FunctionKind::Linear;
  double scale = 1.0;
  std::vector<double> coefficients;  // Poly only

  double operator()(double x) const;
  std::string tag() const;
  static EdgeFunction parse(const std::string& tag, const nlohmann::json& params = {});
  nlohmann::json params() const;
};

// E[f(X)] for X ~ N(0, s^2) when a closed form exists.
std::optional<double> gaussian_mean(const EdgeFunction& fn, double s);

struct EdgeSpec {
  int from = 0;
  int to = 0;
  EdgeFunction fn;
  // Subtracted so that E[f(X_from)] = 0 under the induced marginal.
  double center = 0.0;
};

struct SemSpec {
  int p = 0;
  std::vector<EdgeSpec> edges;
  std::vector<double> sigmas;
  // Seeds the centering reference sample, independent of the data seed.
  std::uint64_t seed = 0;
  bool centered = false;

  Dag dag() const;
  void validate() const;

  static SemSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

inline constexpr int kDefaultCenteringDraws = 1'000'000;

// Monte-Carlo estimate of E[f(X)] from parent draws. Non-finite evaluations are
// dropped; more than 0.1% of them raises NumericalError.
double center_constant(const EdgeFunction& fn, std::span<const double> parent_draws);
double center_constant(const EdgeFunction& fn, const std::function<double(Rng&)>& parent_sampler,
                       int m, std::uint64_t seed);

// Fills every EdgeSpec::center. Edges out of a source node use the Gaussian closed
// form when available; all others average over an m-row reference sample generated
// in topological order from spec.seed.
void prepare_centering(SemSpec& spec, int m = kDefaultCenteringDraws);

// X_j = sum_k (f_kj(X_k) - center_kj) + sigma_j * N(0, 1), generated column by
// column in topological order. Centers the spec first if needed.
Dataset sample(const SemSpec& spec, int n, std::uint64_t seed);

// The five-node example: X1 ~ N(0, 0.5^2), X2 = X1^2 - 0.25 + z2,
// X3 = 2 X1^2 - 0.5 + h(X2) - E h(X2) + z3, X4, X5 ~ N(0, 0.5^2).
SemSpec example_model(const EdgeFunction& h, double sigma2, double sigma3, std::uint64_t seed = 7);
Dag example_model_dag();

// Same function on every edge of `dag`.
SemSpec additive_model(const Dag& dag, const EdgeFunction& fn, std::vector<double> sigmas,
                       std::uint64_t seed = 7);

// sigma_j ~ Beta(1, mu0) * 0.5 + 0.5.
std::vector<double> heteroscedastic_sigmas(int p, double mu0, std::uint64_t seed);

// Random DAG: each forward pair of a random permutation is an edge with probability prob.
Dag random_dag(int p, double prob, std::uint64_t seed);

}  // namespace dagmip
