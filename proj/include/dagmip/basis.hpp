#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dagmip/dataset.hpp"

namespace dagmip {

enum class BasisKind { Spline, Radial, Sine };

std::string to_string(BasisKind kind);
BasisKind parse_basis_kind(const std::string& s);

// {"kind": "spline|radial|sine", "degree": int, "knots": int}. For radial and sine
// systems `knots` is the number of basis functions.
struct BasisConfig {
  BasisKind kind = BasisKind::Spline;
  int degree = 3;
  int knots = 5;

  // Number of basis functions per variable.
  int basis_count() const;

  nlohmann::json to_json() const;
  static BasisConfig from_json(const nlohmann::json& j);
};

// Index map into the extended vector
//   Z = [X_1..X_p, 1, b_1(X_1)..b_1(X_p), ..., b_R(X_1)..b_R(X_p)]
// All indices 0-based; r runs over 0..R-1.
struct Layout {
  int p = 0;
  int R = 0;

  int dim() const { return p * R + p + 1; }
  int x(int k) const { return k; }
  int constant() const { return p; }
  int basis(int r, int k) const { return p + 1 + r * p + k; }
};

// Knots at the i/(count+1) quantiles (linear interpolation), i = 1..count.
// Throws InvalidInput if the column has too few distinct values or the knots tie.
std::vector<double> build_knots(std::span<const double> column, int count);

// Basis fitted to training data; the same functions serve every edge.
class BasisSystem {
 public:
  static BasisSystem fit(const BasisConfig& config, const Dataset& data);

  const BasisConfig& config() const { return config_; }
  int p() const { return static_cast<int>(columns_.size()); }
  int R() const { return R_; }
  Layout layout() const { return {p(), R_}; }

  // b_1(x)..b_R(x) for the given column. Splines clamp x to the training range and
  // drop the first B-spline (collinear with the intercept).
  std::vector<double> evaluate(int column, double x) const;
  void evaluate(int column, double x, std::span<double> out) const;

  // All degree + knots + 1 B-splines; sums to one on the training range.
  std::vector<double> evaluate_full_spline(int column, double x) const;

  Eigen::VectorXd extended_vector(std::span<const double> x) const;

  // Knots plus empirical-CDF tables, enough to reproduce evaluate() exactly.
  nlohmann::json to_json() const;
  static BasisSystem from_json(const nlohmann::json& j);

 private:
  struct Column {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> knots;   // spline internal knots or radial centres
    std::vector<double> sorted;  // sine: sorted training column
  };

  void spline_values(const Column& col, double x, std::span<double> full) const;

  BasisConfig config_;
  int R_ = 0;
  std::vector<Column> columns_;
};

// Average outer product of extended vectors. Symmetric; constant-constant entry 1.
struct GramMatrix {
  Eigen::MatrixXd sigma;
  int n = 0;
  Layout layout;

  int p() const { return layout.p; }
  int R() const { return layout.R; }
  // E_hat[X_j^2]
  double second_moment(int j) const { return sigma(j, j); }
};

// Blocked pairwise summation; `shards` worker threads each reduce a contiguous
// range of row blocks, partial sums combined in shard order.
GramMatrix gram(const BasisSystem& system, const Dataset& data, int shards = 1);

}  // namespace dagmip
