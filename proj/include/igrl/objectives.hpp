#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "igrl/classifier.hpp"
#include "igrl/corpus.hpp"
#include "igrl/lexicon.hpp"
#include "igrl/model.hpp"

namespace igrl {

enum class TrainingMode { kIgRl, kUnconstrainedRl, kRandomMask };

TrainingMode training_mode_from_string(const std::string& s);
std::string to_string(TrainingMode mode);

struct TrainingConfig {
  double alpha = 0.2;          // weight of the smoothing loss
  double beta = 0.25;          // weight of the RL loss
  double baseline_b = 0.3;
  int top_k = 20;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int pretrain_epochs = 3;
  int rl_epochs = 10;
  int target_style = 0;        // desired style s'
  TrainingMode mode = TrainingMode::kIgRl;
  double random_mask_p = 0.2;
  bool restrict_to_target_style = false;
  std::uint64_t seed = 1;
};

/// Sampled response aligned with its reference; copied positions carry the
/// reference token. Token ids include the terminal <eos>.
struct SamplingTrajectory {
  std::vector<int> tokens;
  std::vector<char> freed_mask;        // 1 = sampled, 0 = copied
  std::vector<double> step_log_probs;  // nats, every position
  double reward = 0.0;                 // filled after scoring
};

struct LossBreakdown {
  double mle = 0.0;
  double smo = 0.0;
  double rl = 0.0;
  double hybrid = 0.0;
  double mean_reward = 0.0;
};

/// Positions whose reference token is stylistic for style s are sampled
/// from the policy conditioned on the sampled prefix; neutral positions
/// copy the reference. The terminal <eos> is never freed.
SamplingTrajectory constrained_sample(Seq2SeqModel& model,
                                      std::span<const int> query_ids,
                                      std::span<const int> reference_ids, int style,
                                      const StyleLexicon& lexicon,
                                      std::mt19937_64& rng);

/// Every position freed; samples until <eos> or max_len.
SamplingTrajectory unconstrained_sample(Seq2SeqModel& model,
                                        std::span<const int> query_ids, int max_len,
                                        std::mt19937_64& rng);

/// Each non-terminal position freed independently with probability p.
SamplingTrajectory random_mask_sample(Seq2SeqModel& model,
                                      std::span<const int> query_ids,
                                      std::span<const int> reference_ids, double p,
                                      std::mt19937_64& rng);

/// -(r - b) * sum of step log-probs over all positions, copied included.
/// With include_copied = false only freed positions contribute (ablation).
double rl_loss(const SamplingTrajectory& traj, double baseline_b,
               bool include_copied = true);

double mle_loss(Seq2SeqModel& model, std::span<const int> query_ids,
                std::span<const int> reference_ids);

double smoothing_loss(Seq2SeqModel& model, std::span<const int> query_ids,
                      std::span<const int> reference_ids, const BigramTable& bigrams);

LossBreakdown hybrid_loss(double mle, double smo, double rl, double alpha,
                          double beta);

/// Per-epoch mean MLE loss during pretraining.
std::vector<double> pretrain(Seq2SeqModel& model,
                             const std::vector<DialoguePair>& corpus,
                             const Vocabulary& vocab, const TrainingConfig& config);

struct EpochLog {
  int epoch = 0;
  LossBreakdown losses;
};

std::vector<EpochLog> train_rl(Seq2SeqModel& model,
                               const std::vector<DialoguePair>& corpus,
                               const Vocabulary& vocab, const StyleLexicon& lexicon,
                               const StyleClassifier& classifier,
                               const BigramTable& bigrams,
                               const TrainingConfig& config);

void save_loss_log(const std::vector<EpochLog>& log, const std::string& path);

/// Reward of a trajectory: classifier score of the desired style on the
/// surface tokens (reserved stripped); 0 when nothing remains.
double trajectory_reward(const SamplingTrajectory& traj,
                         const StyleClassifier& classifier, int desired_style);

}  // namespace igrl
