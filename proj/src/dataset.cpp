#include "nbvoi/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace nbvoi {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// RFC 4180 reader: comma separator, optional double-quote quoting with ""
// escapes, quoted fields may span lines, CRLF or LF row endings. Unquoted
// fields are trimmed of surrounding whitespace; quoted fields are literal.
std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& origin) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;
  bool in_row = false;

  auto end_field = [&] {
    row.push_back(field_was_quoted ? field : trim(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    in_row = false;
  };

  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        field_was_quoted = true;
        in_row = true;
        break;
      case ',':
        end_field();
        in_row = true;
        break;
      case '\r':
        break;  // swallowed; the following \n ends the row
      case '\n':
        if (in_row || !field.empty() || !row.empty()) end_row();
        break;
      default:
        field += c;
        in_row = true;
        break;
    }
  }
  if (quoted) throw ValidationError(origin + ": unterminated quoted field");
  if (in_row || !field.empty() || !row.empty()) end_row();
  return rows;
}

double parse_number(const std::string& raw, const std::string& where) {
  if (raw.empty()) throw ValidationError(where + ": empty cell");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (end != raw.c_str() + raw.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ValidationError(where + ": not a finite number: \"" + raw + "\"");
  }
  return v;
}

double parse_binary(const std::string& raw, const std::string& where) {
  if (raw == "0") return 0.0;
  if (raw == "1") return 1.0;
  throw ValidationError(where + ": expected 0 or 1, got \"" + raw + "\"");
}

}  // namespace

void validate_schema(const std::vector<ColumnSpec>& schema) {
  if (schema.empty()) throw ValidationError("schema: no columns declared");
  std::unordered_set<std::string> names;
  int outcomes = 0;
  int predictors = 0;
  for (const auto& spec : schema) {
    if (spec.name.empty()) throw ValidationError("schema: column with empty name");
    if (!names.insert(spec.name).second) {
      throw ValidationError("schema: duplicate column name \"" + spec.name + "\"");
    }
    if (spec.kind == ColumnKind::categorical) {
      if (spec.levels.size() < 2) {
        throw ValidationError("schema: categorical column \"" + spec.name +
                              "\" needs at least two levels");
      }
      std::unordered_set<std::string> seen;
      for (const auto& level : spec.levels) {
        if (level.empty() || !seen.insert(level).second) {
          throw ValidationError("schema: empty or duplicate level in column \"" +
                                spec.name + "\"");
        }
      }
    } else if (!spec.levels.empty()) {
      throw ValidationError("schema: levels given for non-categorical column \"" +
                            spec.name + "\"");
    }
    if (spec.role == ColumnRole::outcome) {
      ++outcomes;
      if (spec.kind == ColumnKind::categorical && spec.levels.size() != 2) {
        throw ValidationError("schema: categorical outcome \"" + spec.name +
                              "\" must have exactly two levels");
      }
      if (spec.kind == ColumnKind::continuous) {
        throw ValidationError("schema: outcome \"" + spec.name +
                              "\" must be binary or two-level categorical");
      }
    } else {
      ++predictors;
    }
  }
  if (outcomes != 1) {
    throw ValidationError("schema: exactly one outcome column required, found " +
                          std::to_string(outcomes));
  }
  if (predictors == 0) throw ValidationError("schema: at least one predictor required");
}

Eigen::Index encoded_column_count(const std::vector<ColumnSpec>& schema) {
  Eigen::Index p = 1;  // intercept
  for (const auto& spec : schema) {
    if (spec.role == ColumnRole::outcome) continue;
    p += spec.kind == ColumnKind::categorical
             ? static_cast<Eigen::Index>(spec.levels.size()) - 1
             : 1;
  }
  return p;
}

Dataset Dataset::from_encoded(Eigen::MatrixXd x, Eigen::VectorXd y,
                              std::vector<ColumnSpec> specs,
                              std::vector<CategoricalEncoding> encodings,
                              std::vector<std::string> design_names) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n) throw ValidationError("dataset: outcome length does not match rows");
  if (p < 2) throw ValidationError("dataset: need intercept plus at least one predictor");
  if (n <= p) {
    throw ValidationError("dataset: " + std::to_string(n) + " rows cannot support " +
                          std::to_string(p) + " coefficients");
  }
  if (!x.allFinite()) throw ValidationError("dataset: non-finite design entry");
  if ((x.col(0).array() != 1.0).any()) {
    throw ValidationError("dataset: first design column must be the intercept");
  }
  bool any0 = false, any1 = false;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (y[j] == 0.0) {
      any0 = true;
    } else if (y[j] == 1.0) {
      any1 = true;
    } else {
      throw ValidationError("dataset: outcome entries must be 0 or 1");
    }
  }
  if (!any0 || !any1) throw ValidationError("dataset: both outcome classes required");
  if (static_cast<Eigen::Index>(design_names.size()) != p) {
    throw ValidationError("dataset: design name count does not match columns");
  }

  Dataset d;
  d.x_ = std::move(x);
  d.y_ = std::move(y);
  d.specs_ = std::move(specs);
  d.encodings_ = std::move(encodings);
  d.design_names_ = std::move(design_names);
  return d;
}

std::string Dataset::categorical_level(Eigen::Index row, const std::string& column) const {
  if (row < 0 || row >= n()) throw ValidationError("dataset: row out of range");
  for (const auto& enc : encodings_) {
    if (enc.column != column) continue;
    for (size_t k = 1; k < enc.levels.size(); ++k) {
      const Eigen::Index col = enc.first_design_col + static_cast<Eigen::Index>(k) - 1;
      if (x_(row, col) == 1.0) return enc.levels[k];
    }
    return enc.levels[0];  // all dummies zero: the reference level
  }
  throw ValidationError("dataset: no categorical column named \"" + column + "\"");
}

Dataset load_csv_text(const std::string& text, const std::vector<ColumnSpec>& schema,
                      const std::string& origin) {
  validate_schema(schema);
  const auto rows = parse_csv(text, origin);
  if (rows.empty()) throw ValidationError(origin + ": empty file");
  const auto& header = rows.front();

  // Map each schema column to its position in the file; extra file columns
  // are ignored.
  std::unordered_map<std::string, size_t> header_pos;
  for (size_t i = 0; i < header.size(); ++i) {
    if (!header_pos.emplace(header[i], i).second) {
      throw ValidationError(origin + ": duplicate header column \"" + header[i] + "\"");
    }
  }
  std::vector<size_t> file_col(schema.size());
  for (size_t s = 0; s < schema.size(); ++s) {
    const auto it = header_pos.find(schema[s].name);
    if (it == header_pos.end()) {
      throw ValidationError(origin + ": header is missing column \"" + schema[s].name +
                            "\"");
    }
    file_col[s] = it->second;
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size()) - 1;
  const Eigen::Index p = encoded_column_count(schema);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, p);
  x.col(0).setOnes();
  Eigen::VectorXd y(n);

  // Lay out design columns and the encoding map in schema order.
  std::vector<CategoricalEncoding> encodings;
  std::vector<std::string> design_names{"(intercept)"};
  std::vector<Eigen::Index> start_col(schema.size(), 0);
  {
    Eigen::Index next = 1;
    for (size_t s = 0; s < schema.size(); ++s) {
      const auto& spec = schema[s];
      if (spec.role == ColumnRole::outcome) continue;
      start_col[s] = next;
      if (spec.kind == ColumnKind::categorical) {
        encodings.push_back({spec.name, spec.levels, next});
        for (size_t k = 1; k < spec.levels.size(); ++k) {
          design_names.push_back(spec.name + "=" + spec.levels[k]);
        }
        next += static_cast<Eigen::Index>(spec.levels.size()) - 1;
      } else {
        design_names.push_back(spec.name);
        ++next;
      }
    }
  }

  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = rows[static_cast<size_t>(r) + 1];
    // Data rows are named 1-based, header excluded.
    const std::string row_name = "row " + std::to_string(r + 1);
    for (size_t s = 0; s < schema.size(); ++s) {
      const auto& spec = schema[s];
      if (file_col[s] >= row.size()) {
        throw ValidationError(origin + ": " + row_name + ": missing cell in column \"" +
                              spec.name + "\"");
      }
      const std::string& raw = row[file_col[s]];
      const std::string where = origin + ": " + row_name + ", column \"" + spec.name + "\"";
      if (raw.empty()) throw ValidationError(where + ": empty cell");

      if (spec.role == ColumnRole::outcome) {
        if (spec.kind == ColumnKind::binary) {
          y[r] = parse_binary(raw, where);
        } else {
          if (raw == spec.levels[0]) {
            y[r] = 0.0;
          } else if (raw == spec.levels[1]) {
            y[r] = 1.0;
          } else {
            throw ValidationError(where + ": unknown outcome level \"" + raw + "\"");
          }
        }
        continue;
      }
      switch (spec.kind) {
        case ColumnKind::continuous:
          x(r, start_col[s]) = parse_number(raw, where);
          break;
        case ColumnKind::binary:
          x(r, start_col[s]) = parse_binary(raw, where);
          break;
        case ColumnKind::categorical: {
          const auto it = std::find(spec.levels.begin(), spec.levels.end(), raw);
          if (it == spec.levels.end()) {
            throw ValidationError(where + ": unknown level \"" + raw + "\"");
          }
          const auto k = static_cast<size_t>(it - spec.levels.begin());
          if (k > 0) x(r, start_col[s] + static_cast<Eigen::Index>(k) - 1) = 1.0;
          break;
        }
      }
    }
  }

  return Dataset::from_encoded(std::move(x), std::move(y), schema, std::move(encodings),
                               std::move(design_names));
}

Dataset load_csv(const std::string& path, const std::vector<ColumnSpec>& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open data file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_csv_text(buf.str(), schema, path);
}

double empirical_prevalence(const Dataset& d, const WeightVector& w) {
  if (w.size() != d.n()) {
    throw ValidationError("prevalence: weight length does not match rows");
  }
  const double total = w.total();
  if (!(total > 0.0)) throw ValidationError("prevalence: total weight must be positive");
  return w.w.dot(d.y()) / total;
}

}  // namespace nbvoi
