#include <doctest.h>

#include "s3vc/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace s3vc;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("s3vc_io_" + name);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("feature file round-trips bit-exactly") {
  std::mt19937_64 rng(42);
  std::normal_distribution<float> normal;
  FeatureMatrix m(7, 16);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = normal(rng);

  const auto path = temp_file("roundtrip.s3fv");
  save_feature_matrix(m, path);
  const FeatureMatrix loaded = load_feature_matrix(path);
  REQUIRE(loaded.rows() == m.rows());
  REQUIRE(loaded.cols() == m.cols());
  CHECK(std::memcmp(loaded.data(), m.data(), sizeof(float) * m.size()) == 0);

  // save of the loaded matrix reproduces the file byte for byte
  const auto path2 = temp_file("roundtrip2.s3fv");
  save_feature_matrix(loaded, path2);
  CHECK(read_bytes(path) == read_bytes(path2));
}

TEST_CASE("smallest well-formed file holds a 1x1 matrix") {
  FeatureMatrix m(1, 1);
  m(0, 0) = 0.0f;
  const auto path = temp_file("tiny.s3fv");
  save_feature_matrix(m, path);
  const FeatureMatrix loaded = load_feature_matrix(path);
  CHECK(loaded.rows() == 1);
  CHECK(loaded.cols() == 1);
  CHECK(loaded(0, 0) == 0.0f);
}

TEST_CASE("2x2 identity serializes to exactly 32 bytes") {
  FeatureMatrix m = FeatureMatrix::Identity(2, 2);
  const auto path = temp_file("identity.s3fv");
  save_feature_matrix(m, path);
  CHECK(fs::file_size(path) == 32);
}

TEST_CASE("saving twice is byte-deterministic") {
  FeatureMatrix m(3, 4);
  m.setConstant(1.5f);
  const auto a = temp_file("det_a.s3fv");
  const auto b = temp_file("det_b.s3fv");
  save_feature_matrix(m, a);
  save_feature_matrix(m, b);
  CHECK(read_bytes(a) == read_bytes(b));
}

TEST_CASE("feature file error paths are distinct") {
  const auto path = temp_file("bad.s3fv");

  SUBCASE("bad magic") {
    std::ofstream os(path, std::ios::binary);
    os << "XXXX";
    os.write("\1\0\0\0\1\0\0\0\1\0\0\0\0\0\0\0", 16);
    os.close();
    CHECK_THROWS_WITH_AS(load_feature_matrix(path),
                         doctest::Contains("bad magic"), DataError);
  }
  SUBCASE("version mismatch") {
    std::ofstream os(path, std::ios::binary);
    os << "S3FV";
    os.write("\2\0\0\0\1\0\0\0\1\0\0\0\0\0\0\0", 16);
    os.close();
    CHECK_THROWS_WITH_AS(load_feature_matrix(path),
                         doctest::Contains("version"), DataError);
  }
  SUBCASE("truncated payload") {
    std::ofstream os(path, std::ios::binary);
    os << "S3FV";
    os.write("\1\0\0\0\2\0\0\0\2\0\0\0", 12);
    os.write("\0\0\0\0", 4);  // only 1 of 4 values
    os.close();
    CHECK_THROWS_WITH_AS(load_feature_matrix(path),
                         doctest::Contains("truncated"), DataError);
  }
  SUBCASE("non-finite payload rejected on load") {
    std::ofstream os(path, std::ios::binary);
    os << "S3FV";
    os.write("\1\0\0\0\1\0\0\0\1\0\0\0", 12);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    os.write(reinterpret_cast<const char*>(&nan), 4);
    os.close();
    CHECK_THROWS_WITH_AS(load_feature_matrix(path),
                         doctest::Contains("non-finite"), DataError);
  }
  SUBCASE("NaN rejected before write") {
    FeatureMatrix m(1, 1);
    m(0, 0) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(save_feature_matrix(m, path), DataError);
  }
}

TEST_CASE("metric table loads the shipped fixture") {
  const MetricTable t = load_metric_table(
      fs::path(S3VC_SOURCE_DIR) / "data" / "table3_intra_a2o.csv");
  REQUIRE(t.rows() == 16);
  REQUIRE(t.column_names.size() == 5);
  CHECK(t.system_names.front() == "mel");
  CHECK(t.column("MCD")(0) == doctest::Approx(8.47));
  CHECK(t.column("Sim")(15) == doctest::Approx(54.0));
}

TEST_CASE("metric table CSV edge cases") {
  const auto path = temp_file("table.csv");

  SUBCASE("header-only table is accepted with zero rows") {
    std::ofstream(path) << "system,MCD\n";
    const MetricTable t = load_metric_table(path);
    CHECK(t.rows() == 0);
    CHECK(t.column_names == std::vector<std::string>{"MCD"});
  }
  SUBCASE("non-numeric cell names row and column") {
    std::ofstream(path) << "system,MCD\nsysA,abc\n";
    CHECK_THROWS_WITH_AS(load_metric_table(path),
                         doctest::Contains("MCD"), DataError);
  }
  SUBCASE("ragged rows rejected") {
    std::ofstream(path) << "system,MCD,WER\nsysA,1.0\n";
    CHECK_THROWS_WITH_AS(load_metric_table(path),
                         doctest::Contains("ragged"), DataError);
  }
  SUBCASE("duplicate headers rejected") {
    std::ofstream(path) << "system,MCD,MCD\n";
    CHECK_THROWS_WITH_AS(load_metric_table(path),
                         doctest::Contains("duplicate"), DataError);
  }
  SUBCASE("quoted system names with commas parse") {
    std::ofstream(path) << "system,MCD\n\"a, b\",1.25\n";
    const MetricTable t = load_metric_table(path);
    REQUIRE(t.rows() == 1);
    CHECK(t.system_names[0] == "a, b");
    CHECK(t.values(0, 0) == doctest::Approx(1.25));
  }
}
