#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "igrl/autodiff.hpp"
#include "igrl/corpus.hpp"

namespace igrl {

struct ClassifierConfig {
  double learning_rate = 0.5;
  int epochs = 300;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 1;
};

/// Linear softmax over length-normalized bag-of-words response features.
/// Immutable after training; scores are distributions over the style set.
class StyleClassifier {
 public:
  StyleClassifier(int n_styles, int vocab_size, std::uint64_t vocab_hash);

  int n_styles() const { return static_cast<int>(w_.rows()); }
  int vocab_size() const { return static_cast<int>(w_.cols()); }
  std::uint64_t vocab_hash() const { return vocab_hash_; }
  double held_out_accuracy() const { return held_out_accuracy_; }

  /// Distribution over styles; reserved tokens are stripped first.
  Vec score(std::span<const int> response_ids) const;

  void save(const std::string& path, const std::string& manifest_hash = "") const;
  static StyleClassifier load(const std::string& path, std::uint64_t expected_vocab_hash);

  friend StyleClassifier classifier_train(
      const std::vector<std::pair<std::vector<int>, int>>& data, int n_styles,
      int vocab_size, std::uint64_t vocab_hash, const ClassifierConfig& cfg);

 private:
  Mat w_;  // S x V
  Vec b_;  // S
  std::uint64_t vocab_hash_;
  double held_out_accuracy_ = 0.0;

  Vec features(std::span<const int> response_ids) const;
};

/// Full-batch softmax regression from zero init; deterministic under seed.
/// Requires at least two styles present in the data.
StyleClassifier classifier_train(
    const std::vector<std::pair<std::vector<int>, int>>& data, int n_styles,
    int vocab_size, std::uint64_t vocab_hash, const ClassifierConfig& cfg);

}  // namespace igrl
