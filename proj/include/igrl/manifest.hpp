#pragma once

#include <optional>
#include <string>
#include <vector>

#include "igrl/classifier.hpp"
#include "igrl/corpus.hpp"
#include "igrl/evalsuite.hpp"
#include "igrl/model.hpp"
#include "igrl/objectives.hpp"

namespace igrl {

/// All experiment configuration in one JSON file; artifact paths are
/// resolved under out_dir. Stages embed the manifest hash in every output
/// and refuse mixed-hash inputs downstream.
struct ExperimentManifest {
  std::string out_dir = "runs/desk";
  std::uint64_t seed = 1;
  StyleSet styles;
  int vocab_max_size = 200;
  int eval_pairs = 500;  // generation sample size for evaluation

  SyntheticSpec synthetic;
  ModelConfig model;
  TrainingConfig training;
  ClassifierConfig classifier;
  std::vector<std::pair<std::string, std::string>> conflicts;
  std::string neutral_style;  // optional; empty = none

  std::string hash;  // filled at load/construction time

  std::string corpus_path() const { return out_dir + "/corpus.jsonl"; }
  std::string ground_truth_path() const { return out_dir + "/ground_truth.tsv"; }
  std::string styles_path() const { return out_dir + "/styles.json"; }
  std::string lexicon_path() const { return out_dir + "/lexicon.tsv"; }
  std::string thresholds_path() const { return out_dir + "/thresholds.json"; }
  std::string classifier_path() const { return out_dir + "/classifier.json"; }
  std::string pretrained_path() const { return out_dir + "/pretrained.ckpt.json"; }
  std::string trained_path(TrainingMode mode) const {
    return out_dir + "/trained_" + to_string(mode) + ".ckpt.json";
  }
  std::string loss_log_path(TrainingMode mode) const {
    return out_dir + "/train_log_" + to_string(mode) + ".csv";
  }
  std::string report_path(TrainingMode mode) const {
    return out_dir + "/report_" + to_string(mode) + ".csv";
  }

  /// Per-stage derived seed so stages are independently reproducible.
  std::uint64_t stage_seed(const std::string& stage) const;
};

ExperimentManifest default_desk_manifest();
ExperimentManifest load_manifest(const std::string& path);
void save_manifest(const ExperimentManifest& m, const std::string& path);
std::string manifest_hash(const ExperimentManifest& m);

// Pipeline stages. Each fails fast when an upstream artifact is missing
// and writes exactly its declared outputs plus <artifact>.meta.json hash
// sidecars for plain-text formats.
void cmd_synth(const ExperimentManifest& m);
void cmd_build_lexicon(const ExperimentManifest& m);
void cmd_train_classifier(const ExperimentManifest& m);
void cmd_pretrain(const ExperimentManifest& m);
void cmd_train(const ExperimentManifest& m, TrainingMode mode);
void cmd_generate(const ExperimentManifest& m, const std::string& queries_path,
                  const std::string& out_path, std::optional<TrainingMode> mode);
EvalReport cmd_evaluate(const ExperimentManifest& m, TrainingMode mode);

// Shared loaders used by the stages and tests.
std::vector<DialoguePair> load_stage_corpus(const ExperimentManifest& m);
Vocabulary stage_vocabulary(const ExperimentManifest& m,
                            const std::vector<DialoguePair>& corpus);

}  // namespace igrl
