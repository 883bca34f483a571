#include "s3vc/discretize.hpp"
#include "s3vc/io.hpp"
#include "s3vc/kmeans.hpp"
#include "s3vc/metrics.hpp"
#include "s3vc/simbench.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using namespace s3vc;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  return out;
}

std::vector<Index> parse_cluster_list(const std::string& s) {
  std::vector<Index> out;
  for (const auto& part : split(s, ',')) {
    try {
      out.push_back(static_cast<Index>(std::stoll(part)));
    } catch (const std::exception&) {
      throw ConfigError("bad cluster count '" + part + "'");
    }
  }
  return out;
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

int cmd_train_kmeans(const std::string& features_path, const std::string& mode,
                     const std::string& clusters, Index partitions,
                     std::uint64_t seed, const std::string& out_path) {
  SchemeConfig config;
  if (mode == "single") config.mode = SchemeMode::kSingle;
  else if (mode == "ensemble") config.mode = SchemeMode::kEnsemble;
  else if (mode == "pq") config.mode = SchemeMode::kPq;
  else throw ConfigError("mode must be single, ensemble, or pq");
  config.cluster_sizes = parse_cluster_list(clusters);
  config.partitions = partitions;
  config.validate();

  const FeatureMatrix data = load_feature_matrix(features_path);
  if (config.mode == SchemeMode::kPq && data.cols() % config.partitions != 0)
    throw ConfigError("feature dimension " + std::to_string(data.cols()) +
                      " is not divisible by " +
                      std::to_string(config.partitions) + " partitions");

  const DiscretizationScheme scheme = train_scheme(data, config, seed);
  save_scheme(scheme, out_path);
  for (Index s = 0; s < scheme.stream_count(); ++s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9e",
                  scheme.codebooks[static_cast<std::size_t>(s)].train_distortion);
    std::cout << "stream " << s << " K="
              << scheme.codebooks[static_cast<std::size_t>(s)].size()
              << " distortion=" << buf << "\n";
  }
  return 0;
}

int cmd_quantize(const std::string& scheme_path,
                 const std::string& features_path,
                 const std::string& out_path) {
  const DiscretizationScheme scheme = load_scheme(scheme_path);
  const FeatureMatrix features = load_feature_matrix(features_path);
  const TokenSequence tokens = tokenize(scheme, features);
  if (out_path.size() >= 4 &&
      out_path.compare(out_path.size() - 4, 4, ".csv") == 0)
    save_tokens_csv(tokens, out_path);
  else
    save_tokens_binary(tokens, out_path);
  return 0;
}

int cmd_reconstruct(const std::string& scheme_path,
                    const std::string& tokens_path,
                    const std::string& out_path) {
  const DiscretizationScheme scheme = load_scheme(scheme_path);
  const TokenSequence tokens = load_tokens(tokens_path);
  save_feature_matrix(reconstruct(scheme, tokens), out_path);
  return 0;
}

// Pairs converted and reference feature files by file stem, or one-to-one
// when both arguments are single files.
std::vector<std::pair<std::filesystem::path, std::filesystem::path>>
pair_inputs(const std::string& converted, const std::string& reference,
            const std::string& manifest) {
  namespace fs = std::filesystem;
  std::vector<std::pair<fs::path, fs::path>> pairs;
  if (!manifest.empty()) {
    std::ifstream is(manifest);
    if (!is) throw DataError("cannot open manifest: " + manifest);
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto fields = split(line, ',');
      if (fields.size() != 2)
        throw DataError("manifest rows must be converted,reference: " + line);
      pairs.emplace_back(fields[0], fields[1]);
    }
    return pairs;
  }
  if (fs::is_directory(converted) != fs::is_directory(reference))
    throw PairingError(
        "converted and reference must both be files or both directories");
  if (!fs::is_directory(converted)) {
    pairs.emplace_back(converted, reference);
    return pairs;
  }
  std::map<std::string, fs::path> ref_by_stem;
  for (const auto& entry : fs::directory_iterator(reference))
    if (entry.is_regular_file())
      ref_by_stem[entry.path().stem().string()] = entry.path();
  std::vector<fs::path> conv_files;
  for (const auto& entry : fs::directory_iterator(converted))
    if (entry.is_regular_file()) conv_files.push_back(entry.path());
  std::sort(conv_files.begin(), conv_files.end());
  std::vector<std::string> unmatched;
  for (const auto& c : conv_files) {
    const auto it = ref_by_stem.find(c.stem().string());
    if (it == ref_by_stem.end())
      unmatched.push_back(c.stem().string());
    else
      pairs.emplace_back(c, it->second);
  }
  if (!unmatched.empty()) {
    std::string msg = "unmatched converted stems:";
    for (const auto& s : unmatched) msg += " " + s;
    throw PairingError(msg);
  }
  if (pairs.empty()) throw PairingError("no file pairs found");
  return pairs;
}

int cmd_eval_mcd(const std::string& converted, const std::string& reference,
                 bool dtw, bool keep_first_dim, const std::string& manifest,
                 const std::string& out_path) {
  MCDConfig cfg;
  cfg.use_dtw = dtw;
  cfg.drop_first_dim = !keep_first_dim;

  const auto pairs = pair_inputs(converted, reference, manifest);
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + out_path);
  os << "converted,reference,mcd_db\n";
  double sum = 0.0;
  for (const auto& [c, r] : pairs) {
    const double mcd =
        mcd_sequence(load_feature_matrix(c), load_feature_matrix(r), cfg);
    sum += mcd;
    os << c.string() << ',' << r.string() << ',' << format_fixed(mcd, 6)
       << "\n";
  }
  const double mean = sum / static_cast<double>(pairs.size());
  os << "mean,," << format_fixed(mean, 6) << "\n";
  std::cout << "mean MCD [dB]: " << format_fixed(mean, 6) << "\n";
  return 0;
}

std::vector<EmbeddingVector> load_embeddings(const std::string& path) {
  const FeatureMatrix m = load_feature_matrix(path);
  std::vector<EmbeddingVector> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i)
    out.push_back(m.row(i).cast<double>().transpose());
  return out;
}

std::vector<double> load_score_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open score list: " + path);
  std::vector<double> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      out.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw DataError("unparseable score '" + line + "' in " + path);
    }
  }
  if (out.empty()) throw DataError("score list is empty: " + path);
  return out;
}

int cmd_eval_asv(const std::string& converted_path,
                 const std::string& target_path, double threshold,
                 bool has_threshold, const std::vector<std::string>& trials) {
  const auto converted = load_embeddings(converted_path);
  const auto target_utts = load_embeddings(target_path);
  // Target profile is the average over reference utterance embeddings.
  EmbeddingVector target = EmbeddingVector::Zero(target_utts.front().size());
  for (const auto& e : target_utts) target += e;
  target /= static_cast<double>(target_utts.size());

  double thr = threshold;
  if (!has_threshold) {
    if (trials.size() != 2)
      throw ConfigError("--trials takes genuine and impostor score files");
    thr = eer_threshold(load_score_list(trials[0]), load_score_list(trials[1]));
    std::cout << "eer threshold: " << format_fixed(thr, 6) << "\n";
  }
  std::cout << format_fixed(asv_accept_rate(converted, target, thr), 2)
            << "\n";
  return 0;
}

int cmd_correlate(const std::string& table_path, const std::string& columns,
                  const std::string& out_path) {
  const MetricTable table = load_metric_table(table_path);
  const auto names = split(columns, ',');
  const CorrelationMatrix corr = correlation_matrix(table, names);

  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + out_path);
  os << "metric";
  for (const auto& l : corr.labels) os << ',' << l;
  os << "\n";
  for (Index i = 0; i < corr.values.rows(); ++i) {
    os << corr.labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < corr.values.cols(); ++j)
      os << ',' << format_fixed(corr.values(i, j), 6);
    os << "\n";
  }
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path) {
  const SimSweep sweep = load_sim_config(config_path);
  write_report_csv(run_sweep(sweep), out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Post-discretization and objective evaluation toolkit for "
               "recognition-synthesis voice conversion features"};
  app.require_subcommand(1);

  // train-kmeans
  std::string tk_features, tk_mode = "single", tk_clusters, tk_out;
  Index tk_partitions = 1;
  std::uint64_t tk_seed = 0;
  auto* train = app.add_subcommand("train-kmeans",
                                   "Train a discretization scheme");
  train->add_option("--features", tk_features, "Input S3FV feature file")
      ->required();
  train->add_option("--mode", tk_mode, "single, ensemble, or pq");
  train->add_option("--clusters", tk_clusters,
                    "Cluster count K, or comma list for ensembles")
      ->required();
  train->add_option("--partitions", tk_partitions, "PQ partition count");
  train->add_option("--seed", tk_seed, "Training seed");
  train->add_option("--out", tk_out, "Output S3CB scheme file")->required();

  // quantize
  std::string q_scheme, q_features, q_out;
  auto* quantize = app.add_subcommand("quantize",
                                      "Tokenize features with a scheme");
  quantize->add_option("--scheme", q_scheme, "S3CB scheme file")->required();
  quantize->add_option("--features", q_features, "Input S3FV feature file")
      ->required();
  quantize->add_option("--out", q_out,
                       "Output token file (.csv for text, else S3TK binary)")
      ->required();

  // reconstruct
  std::string r_scheme, r_tokens, r_out;
  auto* recon = app.add_subcommand("reconstruct",
                                   "Reconstruct features from tokens");
  recon->add_option("--scheme", r_scheme, "S3CB scheme file")->required();
  recon->add_option("--tokens", r_tokens, "Token file (CSV or S3TK)")
      ->required();
  recon->add_option("--out", r_out, "Output S3FV feature file")->required();

  // eval-mcd
  std::string m_converted, m_reference, m_manifest, m_out;
  bool m_dtw = false, m_keep_first = false;
  auto* mcd = app.add_subcommand("eval-mcd",
                                 "Mel-cepstral distortion over file pairs");
  mcd->add_option("--converted", m_converted, "Converted file or directory")
      ->required();
  mcd->add_option("--reference", m_reference, "Reference file or directory")
      ->required();
  mcd->add_flag("--dtw", m_dtw, "Align sequences with DTW");
  mcd->add_flag("--keep-first-dim", m_keep_first,
                "Keep the 0th cepstral coefficient");
  mcd->add_option("--pairs", m_manifest,
                  "Manifest CSV overriding stem pairing");
  mcd->add_option("--out", m_out, "Output report CSV")->required();

  // eval-asv
  std::string a_converted, a_target;
  double a_threshold = 0.0;
  std::vector<std::string> a_trials;
  auto* asv = app.add_subcommand("eval-asv", "Speaker-verification accept rate");
  asv->add_option("--converted-embs", a_converted,
                  "S3FV file of converted utterance embeddings (one row each)")
      ->required();
  asv->add_option("--target-embs", a_target,
                  "S3FV file of target reference embeddings (averaged)")
      ->required();
  auto* thr_opt =
      asv->add_option("--threshold", a_threshold, "Cosine accept threshold");
  asv->add_option("--trials", a_trials,
                  "Genuine and impostor score files for EER threshold")
      ->expected(2)
      ->excludes(thr_opt);

  // correlate
  std::string c_table, c_columns, c_out;
  auto* corr = app.add_subcommand("correlate",
                                  "Pairwise Pearson correlation of metrics");
  corr->add_option("--table", c_table, "Metric table CSV")->required();
  corr->add_option("--columns", c_columns, "Comma list of column names")
      ->required();
  corr->add_option("--out", c_out, "Output correlation CSV")->required();

  // simulate
  std::string s_config, s_out;
  auto* sim = app.add_subcommand("simulate",
                                 "Seeded synthetic conversion experiment");
  sim->add_option("--config", s_config, "key=value sim config file")
      ->required();
  sim->add_option("--out", s_out, "Output report CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed())
      return cmd_train_kmeans(tk_features, tk_mode, tk_clusters, tk_partitions,
                              tk_seed, tk_out);
    if (quantize->parsed()) return cmd_quantize(q_scheme, q_features, q_out);
    if (recon->parsed()) return cmd_reconstruct(r_scheme, r_tokens, r_out);
    if (mcd->parsed())
      return cmd_eval_mcd(m_converted, m_reference, m_dtw, m_keep_first,
                          m_manifest, m_out);
    if (asv->parsed())
      return cmd_eval_asv(a_converted, a_target, a_threshold,
                          thr_opt->count() > 0, a_trials);
    if (corr->parsed()) return cmd_correlate(c_table, c_columns, c_out);
    if (sim->parsed()) return cmd_simulate(s_config, s_out);
  } catch (const s3vc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const s3vc::PairingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const s3vc::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
