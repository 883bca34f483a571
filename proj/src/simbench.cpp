#include "s3vc/simbench.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace s3vc {

void SimConfig::validate() const {
  if (dim < 2) throw ConfigError("sim: dim must be at least 2");
  if (content_classes < 2)
    throw ConfigError("sim: content_classes must be at least 2");
  if (speakers < 3)
    throw ConfigError("sim: need at least 3 speakers (train/source/target)");
  if (utterances < 1) throw ConfigError("sim: utterances must be at least 1");
  if (frames < 1) throw ConfigError("sim: frames must be at least 1");
  if (speaker_strength < 0.0)
    throw ConfigError("sim: speaker_strength must be non-negative");
  if (noise_sigma < 0.0)
    throw ConfigError("sim: noise_sigma must be non-negative");
  if (content_scale <= 0.0)
    throw ConfigError("sim: content_scale must be positive");
  if (ridge < 0.0) throw ConfigError("sim: ridge must be non-negative");
  if (scheme) scheme->validate();
}

SynthCorpus generate_corpus(const SimConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthCorpus corpus;
  corpus.content_prototypes.resize(cfg.content_classes, cfg.dim);
  for (Index c = 0; c < cfg.content_classes; ++c) {
    for (Index d = 0; d < cfg.dim; ++d)
      corpus.content_prototypes(c, d) = normal(rng);
    corpus.content_prototypes.row(c) *=
        cfg.content_scale / corpus.content_prototypes.row(c).norm();
  }
  corpus.speaker_offsets.resize(cfg.speakers, cfg.dim);
  for (Index s = 0; s < cfg.speakers; ++s) {
    for (Index d = 0; d < cfg.dim; ++d)
      corpus.speaker_offsets(s, d) = normal(rng);
    corpus.speaker_offsets.row(s) /= corpus.speaker_offsets.row(s).norm();
  }

  std::uniform_int_distribution<Index> label_dist(0, cfg.content_classes - 1);
  corpus.utterances.resize(static_cast<std::size_t>(cfg.speakers));
  for (Index s = 0; s < cfg.speakers; ++s) {
    auto& spk = corpus.utterances[static_cast<std::size_t>(s)];
    spk.resize(static_cast<std::size_t>(cfg.utterances));
    for (Index u = 0; u < cfg.utterances; ++u) {
      Utterance& utt = spk[static_cast<std::size_t>(u)];
      utt.labels.resize(static_cast<std::size_t>(cfg.frames));
      utt.features.resize(cfg.frames, cfg.dim);
      for (Index f = 0; f < cfg.frames; ++f)
        utt.labels[static_cast<std::size_t>(f)] = label_dist(rng);
      for (Index f = 0; f < cfg.frames; ++f) {
        const Index label = utt.labels[static_cast<std::size_t>(f)];
        for (Index d = 0; d < cfg.dim; ++d) {
          const double v = corpus.content_prototypes(label, d) +
                           cfg.speaker_strength * corpus.speaker_offsets(s, d) +
                           cfg.noise_sigma * normal(rng);
          utt.features(f, d) = static_cast<float>(v);
        }
      }
    }
  }

  for (Index s = 0; s < cfg.speakers - 2; ++s)
    corpus.train_speakers.push_back(s);
  corpus.source_speaker = cfg.speakers - 2;
  corpus.target_speaker = cfg.speakers - 1;
  return corpus;
}

EmbeddingVector speaker_embedding(const std::vector<FeatureMatrix>& utts) {
  if (utts.empty())
    throw DataError("speaker_embedding requires at least one utterance");
  EmbeddingVector mean = EmbeddingVector::Zero(utts.front().cols());
  for (const auto& u : utts) {
    if (u.cols() != mean.size())
      throw DataError("speaker_embedding dimension mismatch");
    mean += u.cast<double>().colwise().mean().transpose();
  }
  return mean / static_cast<double>(utts.size());
}

LinearSynth fit_synthesizer(const Eigen::MatrixXd& inputs,
                            const Eigen::MatrixXd& targets, double ridge) {
  if (inputs.rows() != targets.rows())
    throw DataError("fit_synthesizer row count mismatch: " +
                    std::to_string(inputs.rows()) + " vs " +
                    std::to_string(targets.rows()));
  if (ridge < 0.0) throw ConfigError("ridge must be non-negative");

  Eigen::MatrixXd design(inputs.rows(), inputs.cols() + 1);
  design << inputs, Eigen::VectorXd::Ones(inputs.rows());

  LinearSynth synth;
  if (ridge == 0.0) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < design.cols())
      throw DataError("degenerate least-squares system (rank " +
                      std::to_string(qr.rank()) + " of " +
                      std::to_string(design.cols()) +
                      "); use a positive ridge");
    synth.weights = qr.solve(targets);
  } else {
    const Eigen::MatrixXd gram =
        design.transpose() * design +
        ridge * Eigen::MatrixXd::Identity(design.cols(), design.cols());
    synth.weights = gram.ldlt().solve(design.transpose() * targets);
  }
  synth.train_mse = (design * synth.weights - targets).rowwise().squaredNorm().mean();
  return synth;
}

Eigen::MatrixXd apply_synth(const LinearSynth& synth,
                            const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != synth.input_dim())
    throw DataError("synthesizer input dimension mismatch: " +
                    std::to_string(inputs.cols()) + " vs " +
                    std::to_string(synth.input_dim()));
  Eigen::MatrixXd design(inputs.rows(), inputs.cols() + 1);
  design << inputs, Eigen::VectorXd::Ones(inputs.rows());
  return design * synth.weights;
}

namespace {

Eigen::MatrixXd append_embedding(const Eigen::MatrixXd& features,
                                 const EmbeddingVector& emb) {
  Eigen::MatrixXd out(features.rows(), features.cols() + emb.size());
  out << features, emb.transpose().replicate(features.rows(), 1);
  return out;
}

Eigen::MatrixXd discrete_input(const TokenSequence& tokens,
                               const DiscretizationScheme& scheme) {
  const auto streams = lookup(scheme, tokens);
  Index width = 0;
  for (const auto& m : streams) width += m.cols();
  Eigen::MatrixXd out(tokens.frames(), width);
  Index col = 0;
  for (const auto& m : streams) {
    out.middleCols(col, m.cols()) = m.cast<double>();
    col += m.cols();
  }
  return out;
}

}  // namespace

Eigen::MatrixXd convert(const FeatureMatrix& features,
                        const LinearSynth& synth,
                        const std::optional<EmbeddingVector>& target_emb) {
  if (synth.conditioned != target_emb.has_value())
    throw ConfigError(synth.conditioned
                          ? "conditioned synthesizer needs a target embedding"
                          : "unconditioned synthesizer takes no embedding");
  Eigen::MatrixXd in = features.cast<double>();
  if (target_emb) in = append_embedding(in, *target_emb);
  return apply_synth(synth, in);
}

Eigen::MatrixXd convert(const TokenSequence& tokens,
                        const DiscretizationScheme& scheme,
                        const LinearSynth& synth,
                        const std::optional<EmbeddingVector>& target_emb) {
  if (synth.conditioned != target_emb.has_value())
    throw ConfigError(synth.conditioned
                          ? "conditioned synthesizer needs a target embedding"
                          : "unconditioned synthesizer takes no embedding");
  Eigen::MatrixXd in = discrete_input(tokens, scheme);
  if (target_emb) in = append_embedding(in, *target_emb);
  return apply_synth(synth, in);
}

namespace {

EmbeddingVector corpus_speaker_embedding(const SynthCorpus& corpus,
                                         Index speaker) {
  std::vector<FeatureMatrix> utts;
  for (const auto& u : corpus.utterances[static_cast<std::size_t>(speaker)])
    utts.push_back(u.features);
  return speaker_embedding(utts);
}

}  // namespace

SpeakerProbe probe_speaker(const Eigen::MatrixXd& converted,
                           const SynthCorpus& corpus, Index claimed) {
  const Index n_speakers = static_cast<Index>(corpus.utterances.size());
  if (claimed < 0 || claimed >= n_speakers)
    throw ConfigError("unknown speaker id " + std::to_string(claimed));
  const EmbeddingVector emb = converted.colwise().mean().transpose();
  SpeakerProbe probe;
  double best = std::numeric_limits<double>::infinity();
  for (Index s = 0; s < n_speakers; ++s) {
    const double d =
        (corpus_speaker_embedding(corpus, s) - emb).squaredNorm();
    if (d < best) {
      best = d;
      probe.predicted = s;
    }
  }
  probe.accepted = probe.predicted == claimed;
  return probe;
}

double probe_content(const Eigen::MatrixXd& converted,
                     const SynthCorpus& corpus,
                     const std::vector<Index>& true_labels) {
  if (static_cast<Index>(true_labels.size()) != converted.rows())
    throw DataError("probe_content label count does not match frame count");
  const Eigen::RowVectorXd utt_mean = converted.colwise().mean();
  const Eigen::RowVectorXd content_mean =
      corpus.content_prototypes.colwise().mean();
  Index correct = 0;
  for (Index f = 0; f < converted.rows(); ++f) {
    const Eigen::RowVectorXd x = converted.row(f) - utt_mean + content_mean;
    Index best = 0;
    double best_d = (x - corpus.content_prototypes.row(0)).squaredNorm();
    for (Index c = 1; c < corpus.content_prototypes.rows(); ++c) {
      const double d = (x - corpus.content_prototypes.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == true_labels[static_cast<std::size_t>(f)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(converted.rows());
}

ConditionResult run_experiment(const SimConfig& cfg) {
  cfg.validate();
  const SynthCorpus corpus = generate_corpus(cfg);

  auto stack_features = [&](const std::vector<Index>& speakers) {
    Index total = 0;
    for (const Index s : speakers)
      for (const auto& u : corpus.utterances[static_cast<std::size_t>(s)])
        total += u.features.rows();
    FeatureMatrix out(total, cfg.dim);
    Index row = 0;
    for (const Index s : speakers)
      for (const auto& u : corpus.utterances[static_cast<std::size_t>(s)]) {
        out.middleRows(row, u.features.rows()) = u.features;
        row += u.features.rows();
      }
    return out;
  };

  std::optional<DiscretizationScheme> scheme;
  if (cfg.scheme) {
    const FeatureMatrix train_features = stack_features(corpus.train_speakers);
    scheme = train_scheme(train_features, *cfg.scheme, cfg.seed);
  }

  auto recognize = [&](const FeatureMatrix& features) -> Eigen::MatrixXd {
    if (!scheme) return features.cast<double>();
    return discrete_input(tokenize(*scheme, features), *scheme);
  };

  // Synthesizer training set: A2O uses the target speaker only, A2A uses
  // all train speakers with their own embeddings appended.
  std::vector<Index> synth_speakers =
      cfg.mode == SimMode::kA2O ? std::vector<Index>{corpus.target_speaker}
                                : corpus.train_speakers;
  std::vector<Eigen::MatrixXd> in_blocks;
  std::vector<Eigen::MatrixXd> out_blocks;
  for (const Index s : synth_speakers) {
    const EmbeddingVector emb = corpus_speaker_embedding(corpus, s);
    for (const auto& u : corpus.utterances[static_cast<std::size_t>(s)]) {
      Eigen::MatrixXd in = recognize(u.features);
      if (cfg.mode == SimMode::kA2A) in = append_embedding(in, emb);
      in_blocks.push_back(std::move(in));
      out_blocks.push_back(u.features.cast<double>());
    }
  }
  Index total_rows = 0;
  for (const auto& b : in_blocks) total_rows += b.rows();
  Eigen::MatrixXd inputs(total_rows, in_blocks.front().cols());
  Eigen::MatrixXd targets(total_rows, cfg.dim);
  Index row = 0;
  for (std::size_t i = 0; i < in_blocks.size(); ++i) {
    inputs.middleRows(row, in_blocks[i].rows()) = in_blocks[i];
    targets.middleRows(row, out_blocks[i].rows()) = out_blocks[i];
    row += in_blocks[i].rows();
  }
  LinearSynth synth = fit_synthesizer(inputs, targets, cfg.ridge);
  synth.conditioned = cfg.mode == SimMode::kA2A;

  const EmbeddingVector target_emb =
      corpus_speaker_embedding(corpus, corpus.target_speaker);
  const std::optional<EmbeddingVector> cond_emb =
      cfg.mode == SimMode::kA2A ? std::optional<EmbeddingVector>(target_emb)
                                : std::nullopt;

  ConditionResult result;
  result.recon_mse = synth.train_mse;
  const auto& source_utts =
      corpus.utterances[static_cast<std::size_t>(corpus.source_speaker)];
  Index accepted = 0;
  double content_sum = 0.0;
  for (const auto& u : source_utts) {
    Eigen::MatrixXd in = recognize(u.features);
    if (cond_emb) in = append_embedding(in, *cond_emb);
    const Eigen::MatrixXd converted = apply_synth(synth, in);
    if (probe_speaker(converted, corpus, corpus.target_speaker).accepted)
      ++accepted;
    content_sum += probe_content(converted, corpus, u.labels);
  }
  result.speaker_accept =
      100.0 * static_cast<double>(accepted) /
      static_cast<double>(source_utts.size());
  result.content_acc = content_sum / static_cast<double>(source_utts.size());
  return result;
}

// ---------------------------------------------------------------------------
// Sweep harness and file interfaces
// ---------------------------------------------------------------------------

ExperimentReport run_sweep(const SimSweep& sweep) {
  if (sweep.conditions.empty())
    throw ConfigError("sim sweep needs at least one condition");
  if (sweep.num_seeds < 1)
    throw ConfigError("sim sweep needs at least one seed");

  ExperimentReport report;
  for (const auto& condition : sweep.conditions) {
    ConditionResult mean;
    for (int i = 0; i < sweep.num_seeds; ++i) {
      SimConfig cfg = sweep.base;
      cfg.scheme = condition;
      cfg.seed = sweep.base.seed + static_cast<std::uint64_t>(i);
      const ConditionResult r = run_experiment(cfg);
      mean.speaker_accept += r.speaker_accept;
      mean.content_acc += r.content_acc;
      mean.recon_mse += r.recon_mse;
    }
    mean.speaker_accept /= sweep.num_seeds;
    mean.content_acc /= sweep.num_seeds;
    mean.recon_mse /= sweep.num_seeds;

    ExperimentRow row;
    row.mode = sweep.base.mode == SimMode::kA2O ? "a2o" : "a2a";
    if (!condition) {
      row.scheme = "continuous";
    } else {
      switch (condition->mode) {
        case SchemeMode::kSingle:
          row.scheme = "single";
          break;
        case SchemeMode::kEnsemble:
          row.scheme = "ensemble";
          break;
        case SchemeMode::kPq:
          row.scheme = "pq";
          break;
      }
      std::string ks;
      for (std::size_t i = 0; i < condition->cluster_sizes.size(); ++i) {
        if (i) ks += '+';
        ks += std::to_string(condition->cluster_sizes[i]);
      }
      row.clusters = ks;
      row.streams = condition->stream_count();
    }
    row.result = mean;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::optional<SchemeConfig> parse_condition(const std::string& spec) {
  if (spec == "continuous") return std::nullopt;
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty condition spec");

  auto parse_index = [&](const std::string& s) {
    Index v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 1)
      throw ConfigError("bad number '" + s + "' in condition '" + spec + "'");
    return v;
  };

  SchemeConfig cfg;
  if (parts[0] == "single" && parts.size() == 2) {
    cfg.mode = SchemeMode::kSingle;
    cfg.cluster_sizes = {parse_index(parts[1])};
  } else if (parts[0] == "ensemble" && parts.size() == 2) {
    cfg.mode = SchemeMode::kEnsemble;
    std::stringstream ks(parts[1]);
    std::string k;
    while (std::getline(ks, k, '+')) cfg.cluster_sizes.push_back(parse_index(k));
  } else if (parts[0] == "pq" && parts.size() == 3) {
    cfg.mode = SchemeMode::kPq;
    cfg.cluster_sizes = {parse_index(parts[1])};
    cfg.partitions = parse_index(parts[2]);
  } else {
    throw ConfigError("unrecognized condition spec '" + spec +
                      "' (expected continuous, single:K, ensemble:K1+K2, "
                      "or pq:K:N)");
  }
  cfg.validate();
  return cfg;
}

SimSweep load_sim_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open sim config: " + path.string());

  SimSweep sweep;
  std::string conditions = "continuous";
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto begin = line.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t");
    line = line.substr(begin, end - begin + 1);

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("sim config line " + std::to_string(line_no) +
                        " is not key=value: " + path.string());
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    auto as_index = [&] {
      Index v = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError("bad integer for '" + key + "': " + value);
      return v;
    };
    auto as_double = [&] {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError("bad number for '" + key + "': " + value);
      return v;
    };

    if (key == "dim") sweep.base.dim = as_index();
    else if (key == "content_classes") sweep.base.content_classes = as_index();
    else if (key == "speakers") sweep.base.speakers = as_index();
    else if (key == "utterances") sweep.base.utterances = as_index();
    else if (key == "frames") sweep.base.frames = as_index();
    else if (key == "speaker_strength") sweep.base.speaker_strength = as_double();
    else if (key == "noise_sigma") sweep.base.noise_sigma = as_double();
    else if (key == "content_scale") sweep.base.content_scale = as_double();
    else if (key == "ridge") sweep.base.ridge = as_double();
    else if (key == "seed") sweep.base.seed = static_cast<std::uint64_t>(as_index());
    else if (key == "num_seeds") sweep.num_seeds = static_cast<int>(as_index());
    else if (key == "mode") {
      if (value == "a2o") sweep.base.mode = SimMode::kA2O;
      else if (value == "a2a") sweep.base.mode = SimMode::kA2A;
      else throw ConfigError("mode must be a2o or a2a, got '" + value + "'");
    } else if (key == "conditions") {
      conditions = value;
    } else {
      throw ConfigError("unknown sim config key '" + key + "'");
    }
  }

  std::stringstream ss(conditions);
  std::string spec;
  while (std::getline(ss, spec, ','))
    sweep.conditions.push_back(parse_condition(spec));
  if (sweep.conditions.empty())
    throw ConfigError("sim config lists no conditions: " + path.string());
  sweep.base.validate();
  return sweep;
}

void write_report_csv(const ExperimentReport& report,
                      const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open file for writing: " + path.string());
  os << "mode,scheme,clusters,streams,speaker_accept,content_acc,recon_mse\n";
  char buf[128];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%.2f,%.4f,%.9e",
                  row.result.speaker_accept, row.result.content_acc,
                  row.result.recon_mse);
    os << row.mode << ',' << row.scheme << ',' << row.clusters << ','
       << row.streams << ',' << buf << "\n";
  }
  if (!os) throw DataError("write failed: " + path.string());
}

}  // namespace s3vc
