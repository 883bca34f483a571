#pragma once

#include "s3vc/types.hpp"

#include <utility>
#include <vector>

namespace s3vc {

struct MCDConfig {
  bool use_dtw = false;
  bool drop_first_dim = true;  // exclude the 0th (power) coefficient
};

/// 10/ln(10), the mel-cepstral distortion scale constant.
inline constexpr double kMcdConstant = 4.342944819032518;

/// (10/ln 10) * sqrt(2 * sum_d (c_d - t_d)^2), in dB.
double mcd_frame(const Eigen::VectorXd& converted,
                 const Eigen::VectorXd& target);

using AlignmentPath = std::vector<std::pair<Index, Index>>;

/// Monotone path from (0,0) to (Ta-1,Tb-1) with steps {(1,0),(0,1),(1,1)}
/// minimizing summed Euclidean frame distance. Ties prefer the diagonal,
/// then advancing the first sequence, then the second.
AlignmentPath dtw_align(const FeatureMatrix& a, const FeatureMatrix& b);

double mcd_sequence(const FeatureMatrix& converted,
                    const FeatureMatrix& reference,
                    const MCDConfig& cfg = {});

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Percentage of utterances whose similarity to the target is strictly
/// above the threshold.
double asv_accept_rate(const std::vector<EmbeddingVector>& converted,
                       const EmbeddingVector& target, double threshold);

/// Threshold where false-accept and false-reject rates cross, interpolated
/// between adjacent operating points; midpoint of the zero-crossing plateau
/// in the separable case.
double eer_threshold(const std::vector<double>& genuine,
                     const std::vector<double>& impostor);

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct CorrelationMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;
};

CorrelationMatrix correlation_matrix(const MetricTable& table,
                                     const std::vector<std::string>& columns);

}  // namespace s3vc
