#include "s3vc/kmeans.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <random>
#include <thread>

namespace s3vc {
namespace {

constexpr Index kChunk = 2048;  // fixed, independent of worker count

double sq_dist(const Eigen::RowVectorXd& x,
               const Eigen::MatrixXd& centroids, Index k) {
  return (x - centroids.row(k)).squaredNorm();
}

struct ChunkStats {
  std::vector<std::uint32_t> indices;
  Eigen::MatrixXd sums;          // K x dim
  Eigen::VectorXd counts;        // K
  double sq_error = 0.0;
  Index max_dist_frame = -1;     // frame with largest distance in chunk
  double max_dist = -1.0;
};

// Assign one chunk of frames to nearest centroids, collecting the partial
// sums needed for the mean update. Chunk boundaries are fixed so the
// sequential reduction over chunks is bit-identical for any thread count.
ChunkStats assign_chunk(const FeatureMatrix& data,
                        const Eigen::MatrixXd& centroids, Index begin,
                        Index end) {
  const Index k_count = centroids.rows();
  ChunkStats st;
  st.indices.resize(static_cast<std::size_t>(end - begin));
  st.sums = Eigen::MatrixXd::Zero(k_count, centroids.cols());
  st.counts = Eigen::VectorXd::Zero(k_count);
  for (Index i = begin; i < end; ++i) {
    const Eigen::RowVectorXd x = data.row(i).cast<double>();
    Index best = 0;
    double best_d = sq_dist(x, centroids, 0);
    for (Index k = 1; k < k_count; ++k) {
      const double d = sq_dist(x, centroids, k);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    st.indices[static_cast<std::size_t>(i - begin)] =
        static_cast<std::uint32_t>(best);
    st.sums.row(best) += x;
    st.counts[best] += 1.0;
    st.sq_error += best_d;
    if (best_d > st.max_dist) {
      st.max_dist = best_d;
      st.max_dist_frame = i;
    }
  }
  return st;
}

std::vector<ChunkStats> assign_all(const FeatureMatrix& data,
                                   const Eigen::MatrixXd& centroids,
                                   int threads) {
  const Index n = data.rows();
  const Index n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<ChunkStats> stats(static_cast<std::size_t>(n_chunks));
  if (threads <= 1 || n_chunks == 1) {
    for (Index c = 0; c < n_chunks; ++c)
      stats[static_cast<std::size_t>(c)] = assign_chunk(
          data, centroids, c * kChunk, std::min(n, (c + 1) * kChunk));
    return stats;
  }
  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1))
      stats[static_cast<std::size_t>(c)] = assign_chunk(
          data, centroids, c * kChunk, std::min(n, (c + 1) * kChunk));
  };
  std::vector<std::thread> pool;
  const int n_workers = std::min<int>(threads, static_cast<int>(n_chunks));
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return stats;
}

void check_train_args(const FeatureMatrix& data, Index k) {
  check_feature_matrix(data);
  if (k < 1) throw ConfigError("cluster count must be at least 1");
  if (k > data.rows())
    throw DataError("cluster count " + std::to_string(k) +
                    " exceeds frame count " + std::to_string(data.rows()));
}

}  // namespace

Codebook kmeanspp_init(const FeatureMatrix& data, Index k,
                       std::uint64_t seed) {
  check_train_args(data, k);
  const Index n = data.rows();
  std::mt19937_64 rng(seed);

  Codebook cb;
  cb.centroids.resize(k, data.cols());

  std::uniform_int_distribution<Index> first(0, n - 1);
  cb.centroids.row(0) = data.row(first(rng)).cast<double>();

  Eigen::VectorXd d2(n);
  for (Index i = 0; i < n; ++i)
    d2[i] = (data.row(i).cast<double>() - cb.centroids.row(0)).squaredNorm();

  for (Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index chosen;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double acc = 0.0;
      chosen = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      // all remaining mass sits on already-chosen points
      chosen = first(rng);
    }
    cb.centroids.row(c) = data.row(chosen).cast<double>();
    for (Index i = 0; i < n; ++i) {
      const double d =
          (data.row(i).cast<double>() - cb.centroids.row(c)).squaredNorm();
      if (d < d2[i]) d2[i] = d;
    }
  }
  return cb;
}

std::pair<Codebook, TrainReport> lloyd_train(const FeatureMatrix& data,
                                             Index k, std::uint64_t seed,
                                             const LloydOptions& opts) {
  if (opts.max_iter < 1) throw ConfigError("max_iter must be at least 1");
  if (opts.tol < 0.0) throw ConfigError("tol must be non-negative");
  Codebook cb = kmeanspp_init(data, k, seed);
  const Index n = data.rows();

  TrainReport report;
  for (int it = 0; it < opts.max_iter; ++it) {
    const auto stats = assign_all(data, cb.centroids, opts.threads);

    double sq_error = 0.0;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, data.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    Index far_frame = 0;
    double far_dist = -1.0;
    for (const auto& st : stats) {
      sq_error += st.sq_error;
      sums += st.sums;
      counts += st.counts;
      if (st.max_dist > far_dist) {
        far_dist = st.max_dist;
        far_frame = st.max_dist_frame;
      }
    }
    const double distortion = sq_error / static_cast<double>(n);
    report.distortion_trace.push_back(distortion);

    if (it > 0) {
      const double prev = report.distortion_trace[report.distortion_trace.size() - 2];
      if (prev == 0.0 || (prev - distortion) / prev < opts.tol) {
        report.converged = true;
        break;
      }
    }
    if (it + 1 == opts.max_iter) break;

    for (Index c = 0; c < k; ++c) {
      if (counts[c] > 0.0)
        cb.centroids.row(c) = sums.row(c) / counts[c];
      else
        cb.centroids.row(c) = data.row(far_frame).cast<double>();
    }
  }

  report.iterations = static_cast<int>(report.distortion_trace.size());
  cb.train_distortion = report.distortion_trace.back();
  return {std::move(cb), std::move(report)};
}

Assignment assign(const Codebook& codebook, const FeatureMatrix& data,
                  int threads) {
  check_feature_matrix(data);
  if (data.cols() != codebook.dim())
    throw DataError("feature dimension " + std::to_string(data.cols()) +
                    " does not match codebook dimension " +
                    std::to_string(codebook.dim()));
  const auto stats = assign_all(data, codebook.centroids, threads);
  Assignment out;
  out.indices.reserve(static_cast<std::size_t>(data.rows()));
  double sq_error = 0.0;
  for (const auto& st : stats) {
    out.indices.insert(out.indices.end(), st.indices.begin(),
                       st.indices.end());
    sq_error += st.sq_error;
  }
  out.distortion = sq_error / static_cast<double>(data.rows());
  return out;
}

}  // namespace s3vc
