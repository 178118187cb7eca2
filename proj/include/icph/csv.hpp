#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "icph/errors.hpp"
#include "icph/types.hpp"

namespace icph {

/// Column roles for ingestion. An empty predictor list means "all columns
/// except the response and environment columns, in header order". An empty
/// environment name assigns every row to environment 1 (single-environment
/// commands such as plain fitting and decoding).
struct ColumnRoles {
  std::string response;
  std::string environment;
  std::vector<std::string> predictors;
};

struct IngestResult {
  Dataset data;
  std::vector<std::string> predictor_names;
  std::vector<int> original_env_labels;  // index e-1 holds the source label
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, delimiter)) out.push_back(field);
  if (!line.empty() && line.back() == delimiter) out.push_back("");
  return out;
}

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

inline double parse_numeric(const std::string& field, int line, const std::string& column) {
  const std::string t = trim(field);
  if (t.empty()) {
    throw NonNumericValue("empty cell at line " + std::to_string(line) +
                          ", column '" + column + "'");
  }
  char* end = nullptr;
  const double value = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !std::isfinite(value)) {
    throw NonNumericValue("non-numeric value '" + t + "' at line " +
                          std::to_string(line) + ", column '" + column + "'");
  }
  return value;
}

}  // namespace detail

/// Header row of a delimited file, trimmed.
inline std::vector<std::string> read_header(const std::string& path,
                                            char delimiter = ',') {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file '" + path + "'");
  std::vector<std::string> header = detail::split_line(line, delimiter);
  for (auto& name : header) name = detail::trim(name);
  return header;
}

/// Reads a delimited text file with a header row into a Dataset, validating
/// roles and re-indexing environment labels to 1..K in first-appearance
/// order.
inline IngestResult ingest_csv(const std::string& path, const ColumnRoles& roles,
                               char delimiter = ',') {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");

  std::string line;
  std::getline(in, line);
  std::vector<std::string> header = read_header(path, delimiter);

  const auto column_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw MissingColumn("column '" + name + "' not found in header of " + path);
  };

  const int y_col = column_of(roles.response);
  const int env_col = roles.environment.empty() ? -1 : column_of(roles.environment);
  std::vector<std::string> predictor_names = roles.predictors;
  if (predictor_names.empty()) {
    for (const auto& name : header) {
      if (name != roles.response &&
          (roles.environment.empty() || name != roles.environment)) {
        predictor_names.push_back(name);
      }
    }
  }
  std::vector<int> x_cols;
  for (const auto& name : predictor_names) {
    const int col = column_of(name);
    if (col == y_col || col == env_col) {
      throw InvalidOptions("column '" + name + "' has two roles");
    }
    x_cols.push_back(col);
  }

  std::vector<double> ys;
  std::vector<std::vector<double>> xs;
  std::vector<int> raw_env;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_line(line, delimiter);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_number) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    ys.push_back(detail::parse_numeric(fields[y_col], line_number, roles.response));
    if (env_col < 0) {
      raw_env.push_back(1);
    } else {
      const double env_value =
          detail::parse_numeric(fields[env_col], line_number, roles.environment);
      if (env_value != std::floor(env_value)) {
        throw NonNumericValue("environment label '" + fields[env_col] +
                              "' at line " + std::to_string(line_number) +
                              " is not an integer");
      }
      raw_env.push_back(static_cast<int>(env_value));
    }
    std::vector<double> row(x_cols.size());
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      row[j] = detail::parse_numeric(fields[x_cols[j]], line_number,
                                     predictor_names[j]);
    }
    xs.push_back(std::move(row));
  }
  if (ys.empty()) throw ParseError("no data rows in '" + path + "'");

  IngestResult result;
  result.predictor_names = predictor_names;
  const int n = static_cast<int>(ys.size());
  result.data.y.resize(n);
  result.data.x.resize(n, static_cast<int>(x_cols.size()));
  result.data.env.resize(n);
  std::map<int, int> relabel;  // source label -> 1..K
  for (int t = 0; t < n; ++t) {
    result.data.y(t) = ys[t];
    for (std::size_t j = 0; j < x_cols.size(); ++j) result.data.x(t, j) = xs[t][j];
    auto [it, inserted] =
        relabel.try_emplace(raw_env[t], static_cast<int>(relabel.size()) + 1);
    result.data.env[t] = it->second;
    if (inserted) result.original_env_labels.push_back(raw_env[t]);
  }
  result.data.validate();
  return result;
}

/// Writes a dataset with full double precision so that export followed by
/// ingest reproduces it exactly.
inline void write_dataset_csv(const std::string& path, const Dataset& data,
                              const std::vector<std::string>& predictor_names,
                              char delimiter = ',',
                              const std::vector<int>* latent = nullptr) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << "Y";
  for (const auto& name : predictor_names) out << delimiter << name;
  out << delimiter << "env";
  if (latent) out << delimiter << "H";
  out << "\n";
  char buf[40];
  for (int t = 0; t < data.num_rows(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.17g", data.y(t));
    out << buf;
    for (int j = 0; j < data.num_predictors(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.x(t, j));
      out << delimiter << buf;
    }
    out << delimiter << data.env[t];
    if (latent) out << delimiter << (*latent)[t] + 1;
    out << "\n";
  }
}

inline void write_report_csv(const std::string& path, const std::vector<std::string>& columns,
                             const std::vector<std::vector<std::string>>& rows,
                             char delimiter = ',') {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out << (i ? std::string(1, delimiter) : "") << columns[i];
  }
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? std::string(1, delimiter) : "") << row[i];
    }
    out << "\n";
  }
}

}  // namespace icph
