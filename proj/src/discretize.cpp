#include "s3vc/discretize.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace s3vc {

void SchemeConfig::validate() const {
  switch (mode) {
    case SchemeMode::kSingle:
      if (cluster_sizes.size() != 1)
        throw ConfigError("single mode takes exactly one cluster size");
      break;
    case SchemeMode::kEnsemble: {
      if (cluster_sizes.empty())
        throw ConfigError("ensemble mode needs at least one cluster size");
      std::set<Index> distinct(cluster_sizes.begin(), cluster_sizes.end());
      if (distinct.size() != cluster_sizes.size())
        throw ConfigError("ensemble cluster sizes must be pairwise distinct");
      break;
    }
    case SchemeMode::kPq:
      if (cluster_sizes.size() != 1)
        throw ConfigError("pq mode takes exactly one cluster size");
      if (partitions < 1)
        throw ConfigError("pq partition count must be at least 1");
      break;
  }
  for (const Index k : cluster_sizes)
    if (k < 1) throw ConfigError("cluster sizes must be at least 1");
}

Index SchemeConfig::stream_count() const {
  switch (mode) {
    case SchemeMode::kSingle:
      return 1;
    case SchemeMode::kEnsemble:
      return static_cast<Index>(cluster_sizes.size());
    case SchemeMode::kPq:
      return partitions;
  }
  return 0;
}

namespace {

// Column range covered by one stream's codebook.
std::pair<Index, Index> stream_columns(const DiscretizationScheme& scheme,
                                       Index stream) {
  if (scheme.config.mode == SchemeMode::kPq) {
    const Index sub = scheme.subspace_dim();
    return {stream * sub, sub};
  }
  return {0, scheme.input_dim};
}

void check_tokens(const DiscretizationScheme& scheme,
                  const TokenSequence& tokens) {
  if (tokens.streams() != scheme.stream_count())
    throw DataError("token sequence has " + std::to_string(tokens.streams()) +
                    " streams, scheme has " +
                    std::to_string(scheme.stream_count()));
  for (Index s = 0; s < tokens.streams(); ++s) {
    const auto k = static_cast<std::uint32_t>(scheme.codebooks[s].size());
    for (Index f = 0; f < tokens.frames(); ++f)
      if (tokens.indices(f, s) >= k)
        throw DataError("token " + std::to_string(tokens.indices(f, s)) +
                        " out of range for stream " + std::to_string(s) +
                        " (K=" + std::to_string(k) + ") at frame " +
                        std::to_string(f));
  }
}

// Double-precision reconstruction used by both reconstruct() and
// quantization_error(), so the error path does not round through binary32.
Eigen::MatrixXd reconstruct_double(const DiscretizationScheme& scheme,
                                   const TokenSequence& tokens) {
  check_tokens(scheme, tokens);
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(tokens.frames(), scheme.input_dim);
  const bool ensemble = scheme.config.mode == SchemeMode::kEnsemble;
  for (Index s = 0; s < scheme.stream_count(); ++s) {
    const auto [col, width] = stream_columns(scheme, s);
    const auto& centroids = scheme.codebooks[static_cast<std::size_t>(s)].centroids;
    for (Index f = 0; f < tokens.frames(); ++f)
      out.block(f, col, 1, width) += centroids.row(tokens.indices(f, s));
  }
  if (ensemble) out /= static_cast<double>(scheme.stream_count());
  return out;
}

}  // namespace

DiscretizationScheme train_scheme(const FeatureMatrix& data,
                                  const SchemeConfig& config,
                                  std::uint64_t seed,
                                  const LloydOptions& opts) {
  config.validate();
  check_feature_matrix(data);
  if (config.mode == SchemeMode::kPq && data.cols() % config.partitions != 0)
    throw ConfigError("feature dimension " + std::to_string(data.cols()) +
                      " is not divisible by " +
                      std::to_string(config.partitions) + " partitions");

  DiscretizationScheme scheme;
  scheme.config = config;
  scheme.input_dim = data.cols();
  const Index streams = config.stream_count();
  scheme.codebooks.reserve(static_cast<std::size_t>(streams));
  // Per-model seeds are seed + stream index, so adding an ensemble member
  // leaves existing codebooks untouched.
  for (Index s = 0; s < streams; ++s) {
    const Index k = config.mode == SchemeMode::kEnsemble
                        ? config.cluster_sizes[static_cast<std::size_t>(s)]
                        : config.cluster_sizes[0];
    FeatureMatrix train_data;
    if (config.mode == SchemeMode::kPq) {
      const Index sub = data.cols() / config.partitions;
      train_data = data.middleCols(s * sub, sub);
    } else {
      train_data = data;
    }
    scheme.codebooks.push_back(
        lloyd_train(train_data, k, seed + static_cast<std::uint64_t>(s), opts)
            .first);
  }
  return scheme;
}

TokenSequence tokenize(const DiscretizationScheme& scheme,
                       const FeatureMatrix& features) {
  check_feature_matrix(features);
  if (features.cols() != scheme.input_dim)
    throw DataError("feature dimension " + std::to_string(features.cols()) +
                    " does not match scheme input dimension " +
                    std::to_string(scheme.input_dim));
  TokenSequence tokens;
  tokens.indices.resize(features.rows(), scheme.stream_count());
  tokens.stream_k.resize(static_cast<std::size_t>(scheme.stream_count()));
  for (Index s = 0; s < scheme.stream_count(); ++s) {
    const auto [col, width] = stream_columns(scheme, s);
    const FeatureMatrix block = features.middleCols(col, width);
    const auto assignment =
        assign(scheme.codebooks[static_cast<std::size_t>(s)], block);
    for (Index f = 0; f < features.rows(); ++f)
      tokens.indices(f, s) = assignment.indices[static_cast<std::size_t>(f)];
    tokens.stream_k[static_cast<std::size_t>(s)] =
        scheme.codebooks[static_cast<std::size_t>(s)].size();
  }
  return tokens;
}

std::vector<FeatureMatrix> lookup(const DiscretizationScheme& scheme,
                                  const TokenSequence& tokens) {
  check_tokens(scheme, tokens);
  std::vector<FeatureMatrix> out;
  out.reserve(static_cast<std::size_t>(scheme.stream_count()));
  for (Index s = 0; s < scheme.stream_count(); ++s) {
    const auto& centroids = scheme.codebooks[static_cast<std::size_t>(s)].centroids;
    FeatureMatrix m(tokens.frames(), centroids.cols());
    for (Index f = 0; f < tokens.frames(); ++f)
      m.row(f) = centroids.row(tokens.indices(f, s)).cast<float>();
    out.push_back(std::move(m));
  }
  return out;
}

FeatureMatrix reconstruct(const DiscretizationScheme& scheme,
                          const TokenSequence& tokens) {
  return reconstruct_double(scheme, tokens).cast<float>();
}

double quantization_error(const DiscretizationScheme& scheme,
                          const FeatureMatrix& features) {
  const TokenSequence tokens = tokenize(scheme, features);
  const Eigen::MatrixXd recon = reconstruct_double(scheme, tokens);
  return (features.cast<double>() - recon).squaredNorm() /
         static_cast<double>(features.rows());
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace {

constexpr char kSchemeMagic[4] = {'S', '3', 'C', 'B'};
constexpr char kTokenMagic[4] = {'S', '3', 'T', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw DataError("truncated file while reading " + what);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_scheme(const DiscretizationScheme& scheme,
                 const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + path.string());
  os.write(kSchemeMagic, 4);
  write_u32(os, kVersion);
  const char mode = static_cast<char>(scheme.config.mode);
  os.write(&mode, 1);
  write_u32(os, static_cast<std::uint32_t>(scheme.input_dim));
  write_u32(os, static_cast<std::uint32_t>(scheme.stream_count()));
  for (const auto& cb : scheme.codebooks) {
    write_u32(os, static_cast<std::uint32_t>(cb.size()));
    write_u32(os, static_cast<std::uint32_t>(cb.dim()));
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                        Eigen::RowMajor>
        c32 = cb.centroids.cast<float>();
    os.write(reinterpret_cast<const char*>(c32.data()),
             static_cast<std::streamsize>(4ull * c32.size()));
  }
  if (!os) throw DataError("write failed: " + path.string());
}

DiscretizationScheme load_scheme(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open scheme file: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kSchemeMagic, 4) != 0)
    throw DataError("bad magic in scheme file: " + path.string());
  if (read_u32(is, "version") != kVersion)
    throw DataError("unsupported scheme file version: " + path.string());

  DiscretizationScheme scheme;
  char mode_byte = 0;
  if (!is.read(&mode_byte, 1))
    throw DataError("truncated scheme file: " + path.string());
  if (mode_byte < 0 || mode_byte > 2)
    throw DataError("invalid scheme mode byte: " + path.string());
  scheme.config.mode = static_cast<SchemeMode>(mode_byte);
  scheme.input_dim = static_cast<Index>(read_u32(is, "input dimension"));
  const std::uint32_t streams = read_u32(is, "stream count");
  if (streams < 1) throw DataError("scheme file has no streams: " + path.string());

  for (std::uint32_t s = 0; s < streams; ++s) {
    const std::uint32_t k = read_u32(is, "cluster count");
    const std::uint32_t dim = read_u32(is, "centroid dimension");
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c32(
        k, dim);
    if (!is.read(reinterpret_cast<char*>(c32.data()),
                 static_cast<std::streamsize>(4ull * k * dim)))
      throw DataError("truncated centroid payload in scheme file: " +
                      path.string());
    if (!c32.allFinite())
      throw DataError("scheme file contains non-finite centroids: " +
                      path.string());
    Codebook cb;
    cb.centroids = c32.cast<double>();
    scheme.codebooks.push_back(std::move(cb));
  }

  switch (scheme.config.mode) {
    case SchemeMode::kSingle:
      scheme.config.cluster_sizes = {scheme.codebooks[0].size()};
      break;
    case SchemeMode::kEnsemble:
      for (const auto& cb : scheme.codebooks)
        scheme.config.cluster_sizes.push_back(cb.size());
      break;
    case SchemeMode::kPq:
      scheme.config.cluster_sizes = {scheme.codebooks[0].size()};
      scheme.config.partitions = static_cast<Index>(streams);
      break;
  }

  for (Index s = 0; s < scheme.stream_count(); ++s) {
    const auto [col, width] = stream_columns(scheme, s);
    (void)col;
    if (scheme.codebooks[static_cast<std::size_t>(s)].dim() != width)
      throw DataError("scheme file stream " + std::to_string(s) +
                      " has inconsistent centroid dimension: " +
                      path.string());
  }
  return scheme;
}

void save_tokens_csv(const TokenSequence& tokens,
                     const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + path.string());
  os << "frame";
  for (Index s = 0; s < tokens.streams(); ++s) os << ",z" << (s + 1);
  os << "\n";
  for (Index f = 0; f < tokens.frames(); ++f) {
    os << f;
    for (Index s = 0; s < tokens.streams(); ++s) os << ',' << tokens.indices(f, s);
    os << "\n";
  }
  if (!os) throw DataError("write failed: " + path.string());
}

void save_tokens_binary(const TokenSequence& tokens,
                        const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + path.string());
  os.write(kTokenMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(tokens.frames()));
  write_u32(os, static_cast<std::uint32_t>(tokens.streams()));
  for (Index f = 0; f < tokens.frames(); ++f)
    for (Index s = 0; s < tokens.streams(); ++s)
      write_u32(os, tokens.indices(f, s));
  if (!os) throw DataError("write failed: " + path.string());
}

namespace {

TokenSequence load_tokens_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  std::string line;
  if (!std::getline(is, line))
    throw DataError("token file has no header: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::size_t streams = 0;
  {
    std::stringstream ss(line);
    std::string field;
    if (!std::getline(ss, field, ',') || field != "frame")
      throw DataError("token CSV must start with a 'frame' column: " +
                      path.string());
    while (std::getline(ss, field, ',')) ++streams;
  }
  if (streams == 0)
    throw DataError("token CSV has no index columns: " + path.string());

  std::vector<std::uint32_t> flat;
  Index frames = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::size_t n_fields = 0;
    while (std::getline(ss, field, ',')) {
      if (n_fields > 0) {
        std::uint32_t v = 0;
        auto [ptr, ec] =
            std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || ptr != field.data() + field.size())
          throw DataError("unparseable token '" + field + "' at frame " +
                          std::to_string(frames) + ": " + path.string());
        flat.push_back(v);
      }
      ++n_fields;
    }
    if (n_fields != streams + 1)
      throw DataError("ragged token row at frame " + std::to_string(frames) +
                      ": " + path.string());
    ++frames;
  }

  TokenSequence tokens;
  tokens.indices.resize(frames, static_cast<Index>(streams));
  for (Index f = 0; f < frames; ++f)
    for (Index s = 0; s < static_cast<Index>(streams); ++s)
      tokens.indices(f, s) =
          flat[static_cast<std::size_t>(f) * streams + static_cast<std::size_t>(s)];
  return tokens;
}

}  // namespace

TokenSequence load_tokens(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open token file: " + path.string());
  char magic[4];
  if (!is.read(magic, 4))
    throw DataError("truncated token file: " + path.string());
  if (std::memcmp(magic, kTokenMagic, 4) != 0) return load_tokens_csv(path);

  if (read_u32(is, "version") != kVersion)
    throw DataError("unsupported token file version: " + path.string());
  const std::uint32_t frames = read_u32(is, "frame count");
  const std::uint32_t streams = read_u32(is, "stream count");
  if (streams < 1)
    throw DataError("token file has no streams: " + path.string());
  TokenSequence tokens;
  tokens.indices.resize(static_cast<Index>(frames),
                        static_cast<Index>(streams));
  for (std::uint32_t f = 0; f < frames; ++f)
    for (std::uint32_t s = 0; s < streams; ++s)
      tokens.indices(static_cast<Index>(f), static_cast<Index>(s)) =
          read_u32(is, "token index");
  return tokens;
}

}  // namespace s3vc
