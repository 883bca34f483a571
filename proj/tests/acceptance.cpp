// End-to-end acceptance suite. Each criterion prints one pass/fail line.
#include <doctest.h>

#include "s3vc/discretize.hpp"
#include "s3vc/io.hpp"
#include "s3vc/kmeans.hpp"
#include "s3vc/metrics.hpp"
#include "s3vc/simbench.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace s3vc;
namespace fs = std::filesystem;

namespace {

void report(int id, const std::string& name, bool ok) {
  std::printf("criterion %d (%s): %s\n", id, name.c_str(),
              ok ? "pass" : "FAIL");
  std::fflush(stdout);
  CHECK_MESSAGE(ok, "criterion ", id, " (", name, ")");
}

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(S3VC_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), static_cast<int>(buf.size()), pipe))
    r.output += buf.data();
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "s3vc_acceptance";
  fs::create_directories(dir);
  return dir;
}

FeatureMatrix random_features(std::uint64_t seed, Index rows, Index cols) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal;
  FeatureMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

}  // namespace

TEST_CASE("criterion 1: fixture correlation targets") {
  const fs::path fixture =
      fs::path(S3VC_SOURCE_DIR) / "data" / "table3_intra_a2o.csv";
  const fs::path out = work_dir() / "corr.csv";
  const RunResult r = run_cli("correlate --table " + fixture.string() +
                              " --columns MCD,WER,ASV,Nat,Sim --out " +
                              out.string());
  bool ok = (r.exit_code == 0);

  std::map<std::string, std::map<std::string, double>> corr;
  std::ifstream is(out);
  std::string line;
  std::vector<std::string> cols;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.empty()) continue;
    if (cells.front() == "metric") {
      cols.assign(cells.begin() + 1, cells.end());
    } else {
      for (std::size_t j = 1; j < cells.size(); ++j)
        corr[cells[0]][cols[j - 1]] = std::stod(cells[j]);
    }
  }

  const std::vector<std::tuple<std::string, std::string, double>> targets = {
      {"MCD", "Nat", -0.968}, {"MCD", "Sim", -0.961}, {"ASV", "Nat", 0.910},
      {"ASV", "Sim", 0.911},  {"WER", "Nat", -0.808}, {"Nat", "Sim", 0.932},
  };
  for (const auto& [a, b, expected] : targets) {
    const bool present = corr.count(a) && corr[a].count(b);
    ok = ok && present && std::abs(corr[a][b] - expected) <= 0.05;
  }
  report(1, "correlation targets within 0.05", ok);
}

TEST_CASE("criterion 2: mcd analytic values") {
  FeatureMatrix a(3, 4), b(3, 4);
  a.setRandom();
  b = a;
  bool ok = (mcd_sequence(a, b) == 0.0);

  Eigen::VectorXd u(2), v(2);
  u << 1.0, 0.0;
  v << 0.0, 0.0;
  ok = ok && std::abs(mcd_frame(u, v) - 6.1418) <= 1e-3;

  Eigen::VectorXd p(2), q(2);
  p << 3.0, 4.0;
  q << 0.0, 0.0;
  ok = ok && std::abs(mcd_frame(p, q) - 30.709) <= 1e-2;
  report(2, "mcd analytic values", ok);
}

TEST_CASE("criterion 3: k-means property suite") {
  bool monotone = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal;
    std::uniform_int_distribution<int> comp(0, 2);
    const float centers[3] = {-5.0f, 0.0f, 5.0f};
    FeatureMatrix data(300, 3);
    for (Index i = 0; i < data.rows(); ++i) {
      const float c = centers[comp(rng)];
      for (Index j = 0; j < data.cols(); ++j) data(i, j) = c + normal(rng);
    }
    const auto [cb, rep] = lloyd_train(data, 7, seed);
    for (std::size_t i = 1; i < rep.distortion_trace.size(); ++i)
      if (rep.distortion_trace[i] > rep.distortion_trace[i - 1])
        monotone = false;
  }

  FeatureMatrix tiny(4, 1);
  tiny << 0.0f, 1.0f, 8.0f, 9.0f;
  const auto [cb, rep] = lloyd_train(tiny, 2, 11);
  std::vector<double> c{cb.centroids(0, 0), cb.centroids(1, 0)};
  std::sort(c.begin(), c.end());
  const bool optimum = std::abs(c[0] - 0.5) <= 1e-12 &&
                       std::abs(c[1] - 8.5) <= 1e-12 &&
                       std::abs(cb.train_distortion - 0.25) <= 1e-12;

  const FeatureMatrix big = random_features(9, 5000, 8);
  LloydOptions opts;
  opts.threads = 1;
  const auto [cb1, rep1] = lloyd_train(big, 16, 123, opts);
  bool thread_det = true;
  for (int threads : {2, 8}) {
    opts.threads = threads;
    const auto [cbn, repn] = lloyd_train(big, 16, 123, opts);
    thread_det = thread_det && cbn.centroids == cb1.centroids &&
                 repn.distortion_trace == rep1.distortion_trace;
  }
  report(3, "k-means properties", monotone && optimum && thread_det);
}

TEST_CASE("criterion 4: discretization identities") {
  const FeatureMatrix data = random_features(1, 400, 8);

  SchemeConfig single;
  single.mode = SchemeMode::kSingle;
  single.cluster_sizes = {20};
  SchemeConfig pq1;
  pq1.mode = SchemeMode::kPq;
  pq1.cluster_sizes = {20};
  pq1.partitions = 1;
  SchemeConfig ens1;
  ens1.mode = SchemeMode::kEnsemble;
  ens1.cluster_sizes = {20};

  const auto s_single = train_scheme(data, single, 42);
  const auto s_pq1 = train_scheme(data, pq1, 42);
  const auto s_ens1 = train_scheme(data, ens1, 42);
  bool ok = s_pq1.codebooks[0].centroids == s_single.codebooks[0].centroids &&
            s_ens1.codebooks[0].centroids == s_single.codebooks[0].centroids;

  SchemeConfig pq4;
  pq4.mode = SchemeMode::kPq;
  pq4.cluster_sizes = {16};
  pq4.partitions = 4;
  const auto s_pq4 = train_scheme(data, pq4, 5);
  const TokenSequence t1 = tokenize(s_pq4, data);
  const TokenSequence t2 = tokenize(s_pq4, reconstruct(s_pq4, t1));
  ok = ok && t1.indices == t2.indices;

  const double total = quantization_error(s_pq4, data);
  double per_subspace = 0.0;
  const Index sub = s_pq4.subspace_dim();
  for (Index s = 0; s < s_pq4.stream_count(); ++s)
    per_subspace += assign(s_pq4.codebooks[static_cast<std::size_t>(s)],
                           data.middleCols(s * sub, sub))
                        .distortion;
  ok = ok && std::abs(total - per_subspace) <= 1e-9 * std::abs(total);
  report(4, "discretization identities", ok);
}

namespace {

double dtw_oracle(const FeatureMatrix& a, const FeatureMatrix& b,
                  Index i, Index j) {
  const double local = (a.row(i).cast<double>() - b.row(j).cast<double>())
                           .norm();
  if (i == a.rows() - 1 && j == b.rows() - 1) return local;
  double best = std::numeric_limits<double>::infinity();
  if (i + 1 < a.rows() && j + 1 < b.rows())
    best = std::min(best, dtw_oracle(a, b, i + 1, j + 1));
  if (i + 1 < a.rows()) best = std::min(best, dtw_oracle(a, b, i + 1, j));
  if (j + 1 < b.rows()) best = std::min(best, dtw_oracle(a, b, i, j + 1));
  return local + best;
}

double path_cost(const FeatureMatrix& a, const FeatureMatrix& b,
                 const AlignmentPath& path) {
  double total = 0.0;
  for (const auto& [i, j] : path)
    total += (a.row(i).cast<double>() - b.row(j).cast<double>()).norm();
  return total;
}

}  // namespace

TEST_CASE("criterion 5: dtw oracle equivalence") {
  std::mt19937_64 rng(17);
  std::normal_distribution<float> normal;
  std::uniform_int_distribution<Index> len(1, 6);
  bool ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    FeatureMatrix a(len(rng), 2), b(len(rng), 2);
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < 2; ++j) a(i, j) = normal(rng);
    for (Index i = 0; i < b.rows(); ++i)
      for (Index j = 0; j < 2; ++j) b(i, j) = normal(rng);
    const double expected = dtw_oracle(a, b, 0, 0);
    const double actual = path_cost(a, b, dtw_align(a, b));
    if (std::abs(actual - expected) > 1e-9 * std::max(1.0, expected))
      ok = false;
  }
  report(5, "dtw matches exhaustive minimum", ok);
}

namespace {

ConditionResult mean_over_seeds(SimConfig cfg, int num_seeds) {
  ConditionResult mean;
  for (int s = 0; s < num_seeds; ++s) {
    cfg.seed = static_cast<std::uint64_t>(s);
    const ConditionResult r = run_experiment(cfg);
    mean.speaker_accept += r.speaker_accept / num_seeds;
    mean.content_acc += r.content_acc / num_seeds;
    mean.recon_mse += r.recon_mse / num_seeds;
  }
  return mean;
}

SchemeConfig pq_scheme(Index k, Index partitions) {
  SchemeConfig c;
  c.mode = SchemeMode::kPq;
  c.cluster_sizes = {k};
  c.partitions = partitions;
  return c;
}

}  // namespace

TEST_CASE("criterion 6: disentanglement trend") {
  SimConfig cfg;  // defaults, a2a
  const ConditionResult continuous = mean_over_seeds(cfg, 10);
  cfg.scheme = SchemeConfig{};
  cfg.scheme->mode = SchemeMode::kSingle;
  cfg.scheme->cluster_sizes = {32};
  const ConditionResult discrete = mean_over_seeds(cfg, 10);
  const double gap = discrete.speaker_accept - continuous.speaker_accept;
  std::printf("  discrete %.2f vs continuous %.2f (gap %.2f)\n",
              discrete.speaker_accept, continuous.speaker_accept, gap);
  report(6, "discrete a2a beats continuous by 20 points", gap >= 20.0);
}

TEST_CASE("criterion 7: pq trade-off trend") {
  std::vector<double> content, speaker;
  for (Index n : {1, 2, 4, 8}) {
    SimConfig cfg;
    cfg.scheme = pq_scheme(32, n);
    const ConditionResult r = mean_over_seeds(cfg, 10);
    content.push_back(r.content_acc);
    speaker.push_back(r.speaker_accept);
    std::printf("  pq %ld: speaker %.2f content %.4f\n",
                static_cast<long>(n), r.speaker_accept, r.content_acc);
  }
  bool ok = std::is_sorted(content.begin(), content.end());
  ok = ok && speaker.back() <= speaker.front();
  report(7, "pq partitions trade speaker for content", ok);
}

TEST_CASE("criterion 8: chance-level control at zero speaker strength") {
  SimConfig cfg;
  cfg.speaker_strength = 0.0;
  int accepted = 0;
  int trials = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const ConditionResult r = run_experiment(cfg);
    accepted += static_cast<int>(
        std::lround(r.speaker_accept / 100.0 *
                    static_cast<double>(cfg.utterances)));
    trials += static_cast<int>(cfg.utterances);
  }
  // 99% binomial interval for 100 trials at p = 1/10
  std::printf("  %d of %d accepted\n", accepted, trials);
  report(8, "speaker probe at chance", accepted >= 3 && accepted <= 18);
}

TEST_CASE("criterion 9: cli determinism and exit codes") {
  const fs::path features = work_dir() / "acc_features.s3fv";
  save_feature_matrix(random_features(4, 300, 8), features);
  const fs::path s1 = work_dir() / "acc1.s3cb";
  const fs::path s2 = work_dir() / "acc2.s3cb";
  const std::string train = " --mode pq --clusters 16 --partitions 2 "
                            "--seed 7 --out ";
  bool ok =
      run_cli("train-kmeans --features " + features.string() + train +
              s1.string())
              .exit_code == 0 &&
      run_cli("train-kmeans --features " + features.string() + train +
              s2.string())
              .exit_code == 0 &&
      read_bytes(s1) == read_bytes(s2);

  const fs::path t1 = work_dir() / "acc1.s3tk";
  const fs::path t2 = work_dir() / "acc2.s3tk";
  ok = ok &&
       run_cli("quantize --scheme " + s1.string() + " --features " +
               features.string() + " --out " + t1.string())
               .exit_code == 0 &&
       run_cli("quantize --scheme " + s1.string() + " --features " +
               features.string() + " --out " + t2.string())
               .exit_code == 0 &&
       read_bytes(t1) == read_bytes(t2);

  const fs::path conf = work_dir() / "acc_sim.conf";
  std::ofstream(conf) << "dim=8\ncontent_classes=10\nspeakers=5\n"
                         "utterances=4\nframes=10\nseed=3\n"
                         "conditions=continuous,pq:8:2\n";
  const fs::path r1 = work_dir() / "acc_rep1.csv";
  const fs::path r2 = work_dir() / "acc_rep2.csv";
  ok = ok &&
       run_cli("simulate --config " + conf.string() + " --out " + r1.string())
               .exit_code == 0 &&
       run_cli("simulate --config " + conf.string() + " --out " + r2.string())
               .exit_code == 0 &&
       read_bytes(r1) == read_bytes(r2);

  // exit-code contract: 2 config, 3 data, 4 pairing
  ok = ok &&
       run_cli("train-kmeans --features " + features.string() +
               " --mode pq --clusters 16 --partitions 3 --seed 7 --out " +
               s1.string())
               .exit_code == 2;
  ok = ok &&
       run_cli("quantize --scheme /nonexistent.s3cb --features " +
               features.string() + " --out " + t1.string())
               .exit_code == 3;

  const fs::path conv_dir = work_dir() / "acc_conv";
  const fs::path ref_dir = work_dir() / "acc_ref";
  fs::create_directories(conv_dir);
  fs::create_directories(ref_dir);
  save_feature_matrix(random_features(5, 10, 4), conv_dir / "u1.s3fv");
  save_feature_matrix(random_features(6, 10, 4), ref_dir / "u2.s3fv");
  ok = ok &&
       run_cli("eval-mcd --converted " + conv_dir.string() + " --reference " +
               ref_dir.string() + " --out " +
               (work_dir() / "acc_mcd.csv").string())
               .exit_code == 4;
  report(9, "cli determinism and exit codes", ok);
}
