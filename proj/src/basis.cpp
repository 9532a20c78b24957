#include "dagmip/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "dagmip/error.hpp"

namespace dagmip {

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::Spline: return "spline";
    case BasisKind::Radial: return "radial";
    case BasisKind::Sine: return "sine";
  }
  return "spline";
}

BasisKind parse_basis_kind(const std::string& s) {
  if (s == "spline") return BasisKind::Spline;
  if (s == "radial") return BasisKind::Radial;
  if (s == "sine") return BasisKind::Sine;
  throw InvalidInput("unknown basis kind '" + s + "'");
}

int BasisConfig::basis_count() const {
  return kind == BasisKind::Spline ? degree + knots : knots;
}

nlohmann::json BasisConfig::to_json() const {
  return {{"kind", to_string(kind)}, {"degree", degree}, {"knots", knots}};
}

BasisConfig BasisConfig::from_json(const nlohmann::json& j) {
  BasisConfig c;
  try {
    c.kind = parse_basis_kind(j.value("kind", std::string("spline")));
    c.degree = j.value("degree", 3);
    c.knots = j.value("knots", 5);
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidInput(std::string("basis config: ") + ex.what());
  }
  if (c.kind == BasisKind::Spline && (c.degree < 1 || c.knots < 0))
    throw InvalidInput("basis config: spline needs degree >= 1 and knots >= 0");
  if (c.kind != BasisKind::Spline && c.knots < 1) throw InvalidInput("basis config: need at least one basis function");
  return c;
}

std::vector<double> build_knots(std::span<const double> column, int count) {
  if (count < 1) throw InvalidInput("build_knots: count must be >= 1");
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> uniq = sorted;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (static_cast<int>(uniq.size()) < std::max(count, 2))
    throw InvalidInput("build_knots: column has too few distinct values");
  const double last = static_cast<double>(sorted.size() - 1);
  std::vector<double> knots;
  for (int i = 1; i <= count; ++i) {
    const double h = last * i / (count + 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double v = sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    if (!knots.empty() && !(v > knots.back())) throw InvalidInput("build_knots: duplicate knots");
    knots.push_back(v);
  }
  return knots;
}

BasisSystem BasisSystem::fit(const BasisConfig& config, const Dataset& data) {
  if (data.n() < 1) throw InvalidInput("basis fit: empty dataset");
  BasisSystem sys;
  sys.config_ = config;
  sys.R_ = config.basis_count();
  if (sys.R_ < 1) throw InvalidInput("basis fit: R must be >= 1");
  for (int k = 0; k < data.p(); ++k) {
    const auto col_view = data.values.col(k);
    std::vector<double> col(col_view.data(), col_view.data() + data.n());
    Column c;
    c.lo = *std::min_element(col.begin(), col.end());
    c.hi = *std::max_element(col.begin(), col.end());
    switch (config.kind) {
      case BasisKind::Spline:
        if (!(c.hi > c.lo)) throw InvalidInput("basis fit: column " + std::to_string(k + 1) + " is constant");
        if (config.knots > 0) c.knots = build_knots(col, config.knots);
        if (!c.knots.empty() && !(c.knots.front() > c.lo && c.knots.back() < c.hi))
          throw InvalidInput("basis fit: internal knots collide with the range of column " + std::to_string(k + 1));
        break;
      case BasisKind::Radial: c.knots = build_knots(col, config.knots); break;
      case BasisKind::Sine:
        c.sorted = col;
        std::sort(c.sorted.begin(), c.sorted.end());
        break;
    }
    sys.columns_.push_back(std::move(c));
  }
  return sys;
}

void BasisSystem::spline_values(const Column& col, double x, std::span<double> full) const {
  const int d = config_.degree;
  // Clamped knot vector: (d+1) copies of each boundary around the internal knots.
  std::vector<double> t;
  t.reserve(col.knots.size() + 2 * (d + 1));
  t.insert(t.end(), d + 1, col.lo);
  t.insert(t.end(), col.knots.begin(), col.knots.end());
  t.insert(t.end(), d + 1, col.hi);
  const int count = static_cast<int>(t.size()) - d - 1;
  x = std::clamp(x, col.lo, col.hi);
  // Span index s with t[s] <= x < t[s+1], last non-empty span at the right end.
  int s = d;
  while (s + 1 < count && x >= t[s + 1]) ++s;
  std::vector<double> left(d + 1), right(d + 1), n(d + 1);
  n[0] = 1.0;
  for (int r = 1; r <= d; ++r) {
    left[r] = x - t[s + 1 - r];
    right[r] = t[s + r] - x;
    double saved = 0.0;
    for (int q = 0; q < r; ++q) {
      const double denom = right[q + 1] + left[r - q];
      const double tmp = denom > 0 ? n[q] / denom : 0.0;
      n[q] = saved + right[q + 1] * tmp;
      saved = left[r - q] * tmp;
    }
    n[r] = saved;
  }
  std::fill(full.begin(), full.end(), 0.0);
  for (int q = 0; q <= d; ++q) full[s - d + q] = n[q];
}

std::vector<double> BasisSystem::evaluate_full_spline(int column, double x) const {
  if (config_.kind != BasisKind::Spline) throw InvalidInput("evaluate_full_spline: not a spline system");
  std::vector<double> full(R_ + 1);
  spline_values(columns_.at(column), x, full);
  return full;
}

void BasisSystem::evaluate(int column, double x, std::span<double> out) const {
  if (!std::isfinite(x)) throw InvalidInput("evaluate_basis: non-finite input");
  const Column& col = columns_.at(column);
  switch (config_.kind) {
    case BasisKind::Spline: {
      std::vector<double> full(R_ + 1);
      spline_values(col, x, full);
      std::copy(full.begin() + 1, full.end(), out.begin());
      break;
    }
    case BasisKind::Radial:
      for (int r = 0; r < R_; ++r) {
        const double d = x - col.knots[r];
        out[r] = std::exp(-d * d);
      }
      break;
    case BasisKind::Sine: {
      const auto rank = std::upper_bound(col.sorted.begin(), col.sorted.end(), x) - col.sorted.begin();
      const double cdf = static_cast<double>(rank) / static_cast<double>(col.sorted.size());
      for (int r = 0; r < R_; ++r) out[r] = std::sin(std::numbers::pi * (r + 1) * cdf);
      break;
    }
  }
}

std::vector<double> BasisSystem::evaluate(int column, double x) const {
  std::vector<double> out(R_);
  evaluate(column, x, out);
  return out;
}

Eigen::VectorXd BasisSystem::extended_vector(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != p()) throw InvalidInput("extended_vector: length mismatch");
  const Layout lay = layout();
  Eigen::VectorXd z(lay.dim());
  std::vector<double> b(R_);
  for (int k = 0; k < p(); ++k) {
    z[lay.x(k)] = x[k];
    evaluate(k, x[k], b);
    for (int r = 0; r < R_; ++r) z[lay.basis(r, k)] = b[r];
  }
  z[lay.constant()] = 1.0;
  return z;
}

nlohmann::json BasisSystem::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns_) {
    nlohmann::json jc = {{"lo", c.lo}, {"hi", c.hi}, {"knots", c.knots}};
    if (config_.kind == BasisKind::Sine) jc["cdf_table"] = c.sorted;
    cols.push_back(jc);
  }
  return {{"config", config_.to_json()}, {"R", R_}, {"columns", cols}};
}

BasisSystem BasisSystem::from_json(const nlohmann::json& j) {
  BasisSystem sys;
  try {
    sys.config_ = BasisConfig::from_json(j.at("config"));
    sys.R_ = j.at("R").get<int>();
    for (const auto& jc : j.at("columns")) {
      Column c;
      c.lo = jc.at("lo").get<double>();
      c.hi = jc.at("hi").get<double>();
      c.knots = jc.at("knots").get<std::vector<double>>();
      if (jc.contains("cdf_table")) c.sorted = jc.at("cdf_table").get<std::vector<double>>();
      sys.columns_.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidInput(std::string("basis system JSON: ") + ex.what());
  }
  if (sys.R_ != sys.config_.basis_count()) throw InvalidInput("basis system JSON: R does not match config");
  return sys;
}

namespace {

constexpr int kBlockRows = 256;

// Binary-counter pairwise reduction over a stream of block sums.
class PairwiseAccumulator {
 public:
  explicit PairwiseAccumulator(int dim) : dim_(dim) {}

  void add(Eigen::MatrixXd block) {
    int level = 0;
    while (level < static_cast<int>(levels_.size()) && levels_[level].size() != 0) {
      block += levels_[level];
      levels_[level].resize(0, 0);
      ++level;
    }
    if (level == static_cast<int>(levels_.size())) levels_.emplace_back();
    levels_[level] = std::move(block);
  }

  Eigen::MatrixXd total() const {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim_, dim_);
    for (const auto& m : levels_)
      if (m.size() != 0) acc += m;
    return acc;
  }

 private:
  int dim_;
  std::vector<Eigen::MatrixXd> levels_;
};

Eigen::MatrixXd accumulate_rows(const BasisSystem& system, const Dataset& data, int begin, int end) {
  const Layout lay = system.layout();
  PairwiseAccumulator acc(lay.dim());
  Eigen::MatrixXd z(kBlockRows, lay.dim());
  std::vector<double> b(lay.R);
  for (int start = begin; start < end; start += kBlockRows) {
    const int rows = std::min(kBlockRows, end - start);
    for (int i = 0; i < rows; ++i) {
      for (int k = 0; k < lay.p; ++k) {
        const double x = data.values(start + i, k);
        z(i, lay.x(k)) = x;
        system.evaluate(k, x, b);
        for (int r = 0; r < lay.R; ++r) z(i, lay.basis(r, k)) = b[r];
      }
      z(i, lay.constant()) = 1.0;
    }
    const auto top = z.topRows(rows);
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(lay.dim(), lay.dim());
    block.selfadjointView<Eigen::Lower>().rankUpdate(top.transpose());
    acc.add(block.selfadjointView<Eigen::Lower>());
  }
  return acc.total();
}

}  // namespace

GramMatrix gram(const BasisSystem& system, const Dataset& data, int shards) {
  if (data.n() < 1) throw InvalidInput("gram: empty dataset");
  if (data.p() != system.p()) throw InvalidInput("gram: dataset does not match basis system");
  const int n = data.n();
  const int blocks = (n + kBlockRows - 1) / kBlockRows;
  shards = std::clamp(shards, 1, blocks);
  std::vector<Eigen::MatrixXd> partial(shards);
  auto range = [&](int s) {
    const int b0 = blocks * s / shards, b1 = blocks * (s + 1) / shards;
    return std::pair{b0 * kBlockRows, std::min(n, b1 * kBlockRows)};
  };
  if (shards == 1) {
    partial[0] = accumulate_rows(system, data, 0, n);
  } else {
    std::vector<std::thread> workers;
    for (int s = 0; s < shards; ++s)
      workers.emplace_back([&, s] {
        const auto [begin, end] = range(s);
        partial[s] = accumulate_rows(system, data, begin, end);
      });
    for (auto& w : workers) w.join();
  }
  Eigen::MatrixXd total = partial[0];
  for (int s = 1; s < shards; ++s) total += partial[s];

  GramMatrix g;
  g.layout = system.layout();
  g.n = n;
  g.sigma = total / static_cast<double>(n);
  g.sigma = 0.5 * (g.sigma + g.sigma.transpose()).eval();
  g.sigma(g.layout.constant(), g.layout.constant()) = 1.0;
  return g;
}

}  // namespace dagmip
