#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dagmip {

// n x p sample matrix, one row per observation.
struct Dataset {
  Eigen::MatrixXd values;
  std::vector<std::string> column_names;

  int n() const { return static_cast<int>(values.rows()); }
  int p() const { return static_cast<int>(values.cols()); }

  // Throws InvalidInput on non-finite entries, n < 2, or a name/column mismatch.
  void validate() const;

  // Copy with column means subtracted.
  Dataset centered() const;
  // Rows selected by index (with repetition).
  Dataset rows(const std::vector<int>& index) const;
};

std::vector<std::string> default_column_names(int p);

// Header row of names, '.' decimal separator, no index column.
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const Dataset& data);
void write_csv_file(const std::string& path, const Dataset& data);

}  // namespace dagmip
