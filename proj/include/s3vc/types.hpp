#pragma once

#include <Eigen/Dense>

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace s3vc {

/// Frames x dimensions, row-major so one frame is contiguous.
/// Stored as binary32 on disk; wider precision is used internally where needed.
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using EmbeddingVector = Eigen::VectorXd;

using Index = Eigen::Index;

/// Configuration / usage errors (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent data (CLI exit code 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unmatched file pairing (CLI exit code 4).
struct PairingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Named numeric columns, one row per system.
struct MetricTable {
  std::vector<std::string> system_names;
  std::vector<std::string> column_names;
  Eigen::MatrixXd values;  // system_names.size() x column_names.size()

  Index rows() const { return static_cast<Index>(system_names.size()); }

  Index column_index(const std::string& name) const {
    for (std::size_t i = 0; i < column_names.size(); ++i)
      if (column_names[i] == name) return static_cast<Index>(i);
    throw ConfigError("metric table has no column named '" + name + "'");
  }

  Eigen::VectorXd column(const std::string& name) const {
    return values.col(column_index(name));
  }
};

inline void check_feature_matrix(const FeatureMatrix& m) {
  if (m.rows() < 1 || m.cols() < 1)
    throw DataError("feature matrix must have at least one row and column");
  if (!m.allFinite())
    throw DataError("feature matrix contains non-finite values");
}

}  // namespace s3vc
