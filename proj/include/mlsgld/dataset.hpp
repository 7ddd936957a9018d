#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mlsgld/rng.hpp"
#include "mlsgld/types.hpp"

namespace mlsgld {

enum class DataKind { logistic, gaussian };

inline std::string to_string(DataKind k) { return k == DataKind::logistic ? "logistic" : "gaussian"; }

inline DataKind parse_data_kind(std::string_view s) {
  if (s == "logistic") return DataKind::logistic;
  if (s == "gaussian") return DataKind::gaussian;
  throw std::invalid_argument("unknown model kind '" + std::string(s) + "'");
}

/// N items. For the logistic model each item is (label in {-1,+1}, covariate
/// row); for the Gaussian toy the covariate row is the observation and the
/// label column is unused (written as 0).
struct Dataset {
  DataKind kind = DataKind::logistic;
  RowMatrix covariates;
  Eigen::VectorXd labels;

  std::size_t size() const { return static_cast<std::size_t>(covariates.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(covariates.cols()); }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.kind == b.kind && a.covariates.rows() == b.covariates.rows() &&
           a.covariates.cols() == b.covariates.cols() && a.covariates == b.covariates &&
           a.labels == b.labels;
  }
};

inline void validate(const Dataset& data) {
  require(data.covariates.rows() >= 1, "dataset: N must be >= 1");
  require(data.covariates.cols() >= 1, "dataset: d must be >= 1");
  require(data.labels.size() == data.covariates.rows(), "dataset: label count != row count");
  require(data.covariates.allFinite(), "dataset: non-finite covariate");
  require(data.labels.allFinite(), "dataset: non-finite label");
  if (data.kind == DataKind::logistic) {
    for (Eigen::Index i = 0; i < data.labels.size(); ++i) {
      require(data.labels[i] == 1.0 || data.labels[i] == -1.0,
              "dataset: logistic label must be -1 or +1");
    }
  }
}

/// Synthetic data. Logistic: iota_{i,j} ~ N(0,1) for j < d-1, last column 1,
/// y_i = +1 with probability f(theta_true^T iota_i), theta_true ~ N(0, I).
/// Gaussian: x_i = theta_true + N(0, I).
inline Dataset generate_dataset(DataKind kind, std::size_t N, std::size_t d, std::uint64_t seed) {
  require(N >= 1 && d >= 1, "generate_dataset: N and d must be >= 1");
  const auto rows = static_cast<Eigen::Index>(N);
  const auto cols = static_cast<Eigen::Index>(d);
  RngStream truth_rng(seed, {0, 0, Phase::data_truth, 0});
  RngStream design_rng(seed, {0, 0, Phase::data_design, 0});
  RngStream label_rng(seed, {0, 0, Phase::data_labels, 0});
  const ParamVector theta_true = gaussian_vector(truth_rng, d);

  Dataset out;
  out.kind = kind;
  out.covariates.resize(rows, cols);
  out.labels.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (kind == DataKind::logistic) {
      for (Eigen::Index j = 0; j + 1 < cols; ++j) out.covariates(i, j) = design_rng.normal();
      out.covariates(i, cols - 1) = 1.0;
      const double z = out.covariates.row(i).dot(theta_true);
      const double p = 1.0 / (1.0 + std::exp(-z));
      out.labels[i] = label_rng.uniform() < p ? 1.0 : -1.0;
    } else {
      for (Eigen::Index j = 0; j < cols; ++j)
        out.covariates(i, j) = theta_true[j] + design_rng.normal();
      out.labels[i] = 0.0;
    }
  }
  return out;
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw std::invalid_argument("cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

/// Header `y,iota1,...,iotad`; one row per item.
inline void write_dataset_csv(const Dataset& data, std::ostream& os) {
  os << "y";
  for (std::size_t j = 1; j <= data.dimension(); ++j) os << ",iota" << j;
  os << '\n';
  for (Eigen::Index i = 0; i < data.covariates.rows(); ++i) {
    if (data.kind == DataKind::logistic)
      os << (data.labels[i] > 0 ? "1" : "-1");
    else
      os << format_double(data.labels[i]);
    for (Eigen::Index j = 0; j < data.covariates.cols(); ++j)
      os << ',' << format_double(data.covariates(i, j));
    os << '\n';
  }
}

inline Dataset read_dataset_csv(std::istream& is, DataKind kind) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("dataset csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "y") {
    throw std::invalid_argument("dataset csv: header must start with 'y,iota1'");
  }
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "iota" + std::to_string(j)) {
      throw std::invalid_argument("dataset csv: unexpected column '" + std::string(header[j]) +
                                  "'");
    }
  }
  const std::size_t d = header.size() - 1;
  std::vector<double> values;
  std::vector<double> labels;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != d + 1) throw std::invalid_argument("dataset csv: ragged row");
    labels.push_back(parse_double(fields[0]));
    for (std::size_t j = 1; j <= d; ++j) values.push_back(parse_double(fields[j]));
  }
  Dataset out;
  out.kind = kind;
  const auto rows = static_cast<Eigen::Index>(labels.size());
  out.covariates = Eigen::Map<RowMatrix>(values.data(), rows, static_cast<Eigen::Index>(d));
  out.labels = Eigen::Map<Eigen::VectorXd>(labels.data(), rows);
  validate(out);
  return out;
}

}  // namespace mlsgld
