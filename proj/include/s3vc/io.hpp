#pragma once

#include "s3vc/types.hpp"

#include <filesystem>
#include <string>

namespace s3vc {

// S3FV feature file: magic "S3FV", u32 version=1, u32 rows, u32 cols,
// rows*cols IEEE-754 binary32 values row-major. All fields little-endian.

FeatureMatrix load_feature_matrix(const std::filesystem::path& path);
void save_feature_matrix(const FeatureMatrix& m,
                         const std::filesystem::path& path);

// RFC-4180-style CSV, first column "system", remaining columns numeric.
// '.' decimal separator, locale-independent.
MetricTable load_metric_table(const std::filesystem::path& path);

}  // namespace s3vc
