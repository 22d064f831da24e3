// Stage-based pipeline driver: synth -> build-lexicon -> train-classifier
// -> pretrain -> train -> generate / evaluate. One command per process;
// every stage logs the manifest hash it ran under.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "igrl/manifest.hpp"

using namespace igrl;

int main(int argc, char** argv) {
  CLI::App app{"information-guided RL for stylistic dialogue generation"};
  app.require_subcommand(1);

  std::string manifest_path;
  std::string mode_str;
  std::string queries_path;
  std::string out_override;
  std::optional<std::uint64_t> seed_override;

  app.add_option("--manifest", manifest_path, "experiment manifest JSON")
      ->required();
  app.add_option("--seed", seed_override, "override the manifest's global seed");
  app.add_option("--out", out_override, "override the manifest's output directory");

  auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
  auto* lexicon = app.add_subcommand("build-lexicon", "compute the PMI lexicon");
  auto* classifier =
      app.add_subcommand("train-classifier", "train the style reward classifier");
  auto* pretrain_cmd = app.add_subcommand("pretrain", "MLE pretraining");
  auto* train = app.add_subcommand("train", "RL training from the pretrained model");
  train->add_option("--mode", mode_str, "ig-rl | unconstrained | random-mask")
      ->default_val("ig-rl");
  auto* generate = app.add_subcommand("generate", "decode responses for queries");
  generate->add_option("--queries", queries_path, "query file, one per line")
      ->required();
  generate->add_option("--mode", mode_str,
                       "use the trained checkpoint for this mode (default: pretrained)");
  std::string responses_path = "responses.txt";
  generate->add_option("--responses", responses_path, "output file");
  auto* evaluate = app.add_subcommand("evaluate", "run the automatic evaluation");
  evaluate->add_option("--mode", mode_str, "trained checkpoint to evaluate")
      ->default_val("ig-rl");

  CLI11_PARSE(app, argc, argv);
  const std::string stage = app.get_subcommands().front()->get_name();

  try {
    ExperimentManifest m = load_manifest(manifest_path);
    if (seed_override) m.seed = *seed_override;
    if (!out_override.empty()) m.out_dir = out_override;
    if (seed_override || !out_override.empty()) m.hash = manifest_hash(m);

    if (synth->parsed()) {
      cmd_synth(m);
    } else if (lexicon->parsed()) {
      cmd_build_lexicon(m);
    } else if (classifier->parsed()) {
      cmd_train_classifier(m);
    } else if (pretrain_cmd->parsed()) {
      cmd_pretrain(m);
    } else if (train->parsed()) {
      cmd_train(m, training_mode_from_string(mode_str));
    } else if (generate->parsed()) {
      std::optional<TrainingMode> mode;
      if (!mode_str.empty()) mode = training_mode_from_string(mode_str);
      cmd_generate(m, queries_path, responses_path, mode);
    } else if (evaluate->parsed()) {
      cmd_evaluate(m, training_mode_from_string(mode_str));
    }
  } catch (const std::exception& e) {
    std::cerr << "ERROR:" << stage << ":" << e.what() << "\n";
    return 1;
  }
  return 0;
}
