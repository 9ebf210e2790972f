#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nbvoi/errors.hpp"
#include "nbvoi/weights.hpp"

namespace nbvoi {

enum class ColumnKind { continuous, binary, categorical };
enum class ColumnRole { predictor, outcome };

// One declared column of the input data. Categorical columns carry their
// ordered level list; the first level is the dummy-coding reference. An
// outcome column is either binary (literal 0/1 values) or categorical with
// exactly two levels, mapped to 0 and 1 in list order.
struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  ColumnRole role = ColumnRole::predictor;
  std::vector<std::string> levels;
};

// Where a categorical predictor landed in the design matrix: levels[k] for
// k >= 1 maps to design column first_design_col + k - 1; levels[0] is the
// all-zeros reference.
struct CategoricalEncoding {
  std::string column;
  std::vector<std::string> levels;
  Eigen::Index first_design_col = 0;
};

// Immutable development sample: encoded design matrix (intercept column of
// ones first), binary outcomes, and the schema plus encoding map needed to
// interpret and round-trip the columns. Safe to share across threads.
class Dataset {
 public:
  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index p() const { return x_.cols(); }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  const std::vector<ColumnSpec>& specs() const { return specs_; }
  const std::vector<CategoricalEncoding>& encoding_map() const { return encodings_; }
  const std::vector<std::string>& design_column_names() const { return design_names_; }

  // Recovers the level label of a categorical predictor for one row.
  std::string categorical_level(Eigen::Index row, const std::string& column) const;

  // Validates invariants and builds a Dataset from already encoded pieces.
  // x must carry the intercept column; y entries must be 0 or 1 with both
  // classes present; n must exceed p and p must be at least 2.
  static Dataset from_encoded(Eigen::MatrixXd x, Eigen::VectorXd y,
                              std::vector<ColumnSpec> specs,
                              std::vector<CategoricalEncoding> encodings,
                              std::vector<std::string> design_names);

 private:
  Dataset() = default;

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  std::vector<ColumnSpec> specs_;
  std::vector<CategoricalEncoding> encodings_;
  std::vector<std::string> design_names_;
};

// Validates a schema: exactly one outcome column, usable kinds, non-empty
// duplicate-free level lists. Throws ValidationError.
void validate_schema(const std::vector<ColumnSpec>& schema);

// Number of design-matrix columns (including intercept) the schema encodes to.
Eigen::Index encoded_column_count(const std::vector<ColumnSpec>& schema);

// Reads a comma-separated file (header row, optional RFC 4180 quoting, UTF-8)
// and encodes it against the schema. Every schema column must appear exactly
// once in the header; extra file columns are ignored. Categorical predictors
// are dummy-coded with the first listed level as reference and an intercept
// column is prepended. Rejects missing cells, unknown levels, non-binary
// outcomes, and n <= p, naming the offending cell where applicable.
Dataset load_csv(const std::string& path, const std::vector<ColumnSpec>& schema);

// Same as load_csv but over in-memory text (used by tests and tools).
Dataset load_csv_text(const std::string& text, const std::vector<ColumnSpec>& schema,
                      const std::string& origin = "<memory>");

// Weighted outcome prevalence sum(w_j y_j) / sum(w_j). Zero-weight rows drop
// out, so this is usable on weighted subviews that exclude a class entirely.
double empirical_prevalence(const Dataset& d, const WeightVector& w);

}  // namespace nbvoi
