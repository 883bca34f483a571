#pragma once

#include "s3vc/kmeans.hpp"
#include "s3vc/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace s3vc {

enum class SchemeMode : std::uint8_t { kSingle = 0, kEnsemble = 1, kPq = 2 };

struct SchemeConfig {
  SchemeMode mode = SchemeMode::kSingle;
  std::vector<Index> cluster_sizes;  // ensemble: one K per model; else one K
  Index partitions = 1;              // pq only

  void validate() const;
  Index stream_count() const;
};

/// Trained codebooks plus the configuration that produced them.
/// Ensemble codebooks span the full dimension; pq codebooks span d/N_PQ.
struct DiscretizationScheme {
  SchemeConfig config;
  std::vector<Codebook> codebooks;
  Index input_dim = 0;

  Index stream_count() const { return static_cast<Index>(codebooks.size()); }
  Index subspace_dim() const { return input_dim / config.partitions; }
};

/// Per-frame discrete index streams.
struct TokenSequence {
  Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic,
                Eigen::RowMajor>
      indices;                   // frames x streams
  std::vector<Index> stream_k;   // codebook size per stream

  Index frames() const { return indices.rows(); }
  Index streams() const { return indices.cols(); }
};

DiscretizationScheme train_scheme(const FeatureMatrix& data,
                                  const SchemeConfig& config,
                                  std::uint64_t seed,
                                  const LloydOptions& opts = {});

TokenSequence tokenize(const DiscretizationScheme& scheme,
                       const FeatureMatrix& features);

/// Codeword lookup, one matrix per stream (ensemble/single: dim d; pq: d/N).
std::vector<FeatureMatrix> lookup(const DiscretizationScheme& scheme,
                                  const TokenSequence& tokens);

/// Canonical continuous surrogate: pq concatenates subspace centroids,
/// ensemble averages the per-model centroids, single returns the centroid.
FeatureMatrix reconstruct(const DiscretizationScheme& scheme,
                          const TokenSequence& tokens);

/// Mean squared distance between features and reconstruct(tokenize(features)).
double quantization_error(const DiscretizationScheme& scheme,
                          const FeatureMatrix& features);

// S3CB scheme file: magic "S3CB", u32 version=1, u8 mode, u32 input_dim,
// u32 n_streams, then per stream u32 K, u32 dim, K*dim binary32 centroids.
void save_scheme(const DiscretizationScheme& scheme,
                 const std::filesystem::path& path);
DiscretizationScheme load_scheme(const std::filesystem::path& path);

// Token files: CSV with header "frame,z1,z2,..." or binary "S3TK"
// (magic, u32 version=1, u32 frames, u32 streams, u32 indices row-major).
// The binary form carries no per-stream K; bounds are checked on use.
void save_tokens_csv(const TokenSequence& tokens,
                     const std::filesystem::path& path);
void save_tokens_binary(const TokenSequence& tokens,
                        const std::filesystem::path& path);
TokenSequence load_tokens(const std::filesystem::path& path);

}  // namespace s3vc
