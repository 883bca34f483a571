#pragma once

#include "s3vc/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace s3vc {

/// Centroids of one trained k-means model.
struct Codebook {
  Eigen::MatrixXd centroids;       // K x dim
  double train_distortion = 0.0;   // final mean squared distance per frame

  Index size() const { return centroids.rows(); }
  Index dim() const { return centroids.cols(); }
};

struct TrainReport {
  int iterations = 0;
  std::vector<double> distortion_trace;  // mean squared distortion, per iteration
  bool converged = false;
};

struct LloydOptions {
  int max_iter = 300;
  double tol = 1e-6;  // relative distortion change
  int threads = 1;    // worker count; results are identical for any value
};

struct Assignment {
  std::vector<std::uint32_t> indices;  // per-frame nearest centroid
  double distortion = 0.0;             // mean squared distance
};

/// k-means++ seeding: first centroid uniform, the rest drawn with
/// probability proportional to squared distance to the nearest chosen one.
Codebook kmeanspp_init(const FeatureMatrix& data, Index k,
                       std::uint64_t seed);

/// Lloyd iterations from a k-means++ start. Empty clusters are re-seeded to
/// the frame farthest from its assigned centroid, so K stays fixed.
std::pair<Codebook, TrainReport> lloyd_train(const FeatureMatrix& data,
                                             Index k, std::uint64_t seed,
                                             const LloydOptions& opts = {});

/// Nearest-centroid assignment; ties break toward the lowest index.
Assignment assign(const Codebook& codebook, const FeatureMatrix& data,
                  int threads = 1);

}  // namespace s3vc
