#include "dagmip/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dagmip/error.hpp"

namespace dagmip {

void Dataset::validate() const {
  if (n() < 2) throw InvalidInput("dataset needs at least 2 rows");
  if (!column_names.empty() && static_cast<int>(column_names.size()) != p())
    throw InvalidInput("dataset: column name count does not match column count");
  if (!values.allFinite()) throw InvalidInput("dataset contains non-finite values");
}

Dataset Dataset::centered() const {
  Dataset out = *this;
  out.values.rowwise() -= values.colwise().mean();
  return out;
}

Dataset Dataset::rows(const std::vector<int>& index) const {
  Dataset out;
  out.column_names = column_names;
  out.values.resize(static_cast<Eigen::Index>(index.size()), values.cols());
  for (std::size_t i = 0; i < index.size(); ++i) out.values.row(static_cast<Eigen::Index>(i)) = values.row(index[i]);
  return out;
}

std::vector<std::string> default_column_names(int p) {
  std::vector<std::string> names;
  for (int j = 0; j < p; ++j) names.push_back("X" + std::to_string(j + 1));
  return names;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r\"");
    const auto e = field.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("CSV: empty input");
  Dataset data;
  data.column_names = split(line);
  const std::size_t p = data.column_names.size();
  if (p == 0) throw InvalidInput("CSV: header has no columns");
  std::vector<double> flat;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split(line);
    if (fields.size() != p)
      throw InvalidInput("CSV: row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                         " fields, expected " + std::to_string(p));
    for (const auto& f : fields) {
      double v = 0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size())
        throw InvalidInput("CSV: cannot parse '" + f + "' on row " + std::to_string(row));
      flat.push_back(v);
    }
  }
  const auto n = static_cast<Eigen::Index>(flat.size() / p);
  data.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), n, static_cast<Eigen::Index>(p));
  data.validate();
  return data;
}

Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_csv(in);
}

void write_csv(std::ostream& out, const Dataset& data) {
  const auto names = data.column_names.empty() ? default_column_names(data.p()) : data.column_names;
  for (int j = 0; j < data.p(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  out << std::setprecision(17);
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.p(); ++j) out << (j ? "," : "") << data.values(i, j);
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  out.imbue(std::locale::classic());
  write_csv(out, data);
}

}  // namespace dagmip
