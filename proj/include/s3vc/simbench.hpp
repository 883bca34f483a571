#pragma once

#include "s3vc/discretize.hpp"
#include "s3vc/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace s3vc {

enum class SimMode { kA2O, kA2A };

/// Synthetic factorized-feature experiment configuration.
/// Frames are content_prototype[label] + speaker_strength * speaker_offset
/// + Gaussian noise; defaults put content variance well above the speaker
/// component so codebooks align with content.
struct SimConfig {
  Index dim = 16;
  Index content_classes = 40;
  Index speakers = 10;  // last two are held out as source and target
  Index utterances = 20;
  Index frames = 50;
  double speaker_strength = 2.0;
  double noise_sigma = 0.2;
  double content_scale = 4.0;
  double ridge = 1e-3;
  std::uint64_t seed = 0;
  SimMode mode = SimMode::kA2A;
  std::optional<SchemeConfig> scheme;  // empty = continuous features

  void validate() const;
};

struct Utterance {
  FeatureMatrix features;         // frames x dim
  std::vector<Index> labels;      // per-frame content class
};

struct SynthCorpus {
  Eigen::MatrixXd content_prototypes;  // C x d, rows scaled to content_scale
  Eigen::MatrixXd speaker_offsets;     // S x d, unit rows
  std::vector<std::vector<Utterance>> utterances;  // [speaker][utterance]
  std::vector<Index> train_speakers;
  Index source_speaker = 0;
  Index target_speaker = 0;
};

/// Affine least-squares synthesizer: output = [input, 1] * weights.
struct LinearSynth {
  Eigen::MatrixXd weights;   // (input_dim + 1) x output_dim
  bool conditioned = false;  // input includes a speaker embedding
  double train_mse = 0.0;    // mean squared residual per frame

  Index input_dim() const { return weights.rows() - 1; }
};

SynthCorpus generate_corpus(const SimConfig& cfg);

/// Mean over utterances of the per-utterance frame-mean vector.
EmbeddingVector speaker_embedding(const std::vector<FeatureMatrix>& utts);

LinearSynth fit_synthesizer(const Eigen::MatrixXd& inputs,
                            const Eigen::MatrixXd& targets, double ridge);

Eigen::MatrixXd apply_synth(const LinearSynth& synth,
                            const Eigen::MatrixXd& inputs);

/// Continuous conversion; appends the target embedding when given.
Eigen::MatrixXd convert(const FeatureMatrix& features,
                        const LinearSynth& synth,
                        const std::optional<EmbeddingVector>& target_emb);

/// Discrete conversion: tokens are embedded via concatenated per-stream
/// codeword lookup before the affine map.
Eigen::MatrixXd convert(const TokenSequence& tokens,
                        const DiscretizationScheme& scheme,
                        const LinearSynth& synth,
                        const std::optional<EmbeddingVector>& target_emb);

struct SpeakerProbe {
  Index predicted = 0;
  bool accepted = false;
};

/// Nearest speaker-centroid classification of the converted utterance.
SpeakerProbe probe_speaker(const Eigen::MatrixXd& converted,
                           const SynthCorpus& corpus, Index claimed);

/// Per-frame nearest content prototype after removing the utterance's own
/// mean speaker component.
double probe_content(const Eigen::MatrixXd& converted,
                     const SynthCorpus& corpus,
                     const std::vector<Index>& true_labels);

struct ConditionResult {
  double speaker_accept = 0.0;  // percentage
  double content_acc = 0.0;     // fraction
  double recon_mse = 0.0;       // synthesizer training residual
};

/// Full seeded experiment: train scheme (if any) on train-speaker features,
/// fit the synthesizer, convert held-out source to held-out target, probe.
ConditionResult run_experiment(const SimConfig& cfg);

// ---------------------------------------------------------------------------
// Sweep harness and file interfaces
// ---------------------------------------------------------------------------

struct SimSweep {
  SimConfig base;
  // One entry per condition; nullopt = continuous features.
  std::vector<std::optional<SchemeConfig>> conditions;
  int num_seeds = 1;  // seeds base.seed .. base.seed + num_seeds - 1
};

struct ExperimentRow {
  std::string mode;
  std::string scheme;    // "continuous", "single", "ensemble", "pq"
  std::string clusters;  // K, or K1+K2+... for ensembles; empty if continuous
  Index streams = 0;     // N_PQ / N_CE; 0 for continuous
  ConditionResult result;
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;
};

/// Runs every condition over the bundled seeds and averages per condition.
ExperimentReport run_sweep(const SimSweep& sweep);

/// Condition spec: "continuous", "single:K", "ensemble:K1+K2+...",
/// or "pq:K:N".
std::optional<SchemeConfig> parse_condition(const std::string& spec);

/// key=value lines, '#' comments. Unknown keys are rejected.
SimSweep load_sim_config(const std::filesystem::path& path);

void write_report_csv(const ExperimentReport& report,
                      const std::filesystem::path& path);

}  // namespace s3vc
