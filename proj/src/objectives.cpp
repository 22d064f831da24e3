#include "igrl/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace igrl {

TrainingMode training_mode_from_string(const std::string& s) {
  if (s == "ig-rl") return TrainingMode::kIgRl;
  if (s == "unconstrained") return TrainingMode::kUnconstrainedRl;
  if (s == "random-mask") return TrainingMode::kRandomMask;
  throw std::runtime_error("unknown training mode: " + s +
                           " (expected ig-rl | unconstrained | random-mask)");
}

std::string to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::kIgRl: return "ig-rl";
    case TrainingMode::kUnconstrainedRl: return "unconstrained";
    case TrainingMode::kRandomMask: return "random-mask";
  }
  return "?";
}

namespace {

int sample_categorical(const Vec& log_probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  for (Eigen::Index i = 0; i < log_probs.size(); ++i) {
    u -= std::exp(log_probs[i]);
    if (u <= 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(log_probs.size()) - 1;
}

/// Shared body for the mask-driven samplers: positions with freed[i]=1 are
/// sampled from the policy conditioned on the sampled prefix, others copy
/// the reference.
SamplingTrajectory masked_sample(Seq2SeqModel& model, std::span<const int> query_ids,
                                 std::span<const int> reference_ids,
                                 const std::vector<char>& freed,
                                 std::mt19937_64& rng) {
  Tape tape;
  EncoderGraph enc = model.encode_graph(tape, query_ids);
  DecoderGraphState st = model.initial_decoder_state(tape, enc);
  SamplingTrajectory traj;
  traj.freed_mask = freed;
  int prev = Vocabulary::kSos;
  for (std::size_t i = 0; i < reference_ids.size(); ++i) {
    auto [log_probs, next] = model.decode_step_graph(tape, enc, st, prev);
    const Vec& lp = tape.value(log_probs);
    const int token = freed[i] ? sample_categorical(lp, rng) : reference_ids[i];
    traj.tokens.push_back(token);
    traj.step_log_probs.push_back(lp[token]);
    st = next;
    prev = token;
  }
  return traj;
}

}  // namespace

SamplingTrajectory constrained_sample(Seq2SeqModel& model,
                                      std::span<const int> query_ids,
                                      std::span<const int> reference_ids, int style,
                                      const StyleLexicon& lexicon,
                                      std::mt19937_64& rng) {
  if (reference_ids.empty() || reference_ids.back() != Vocabulary::kEos)
    throw std::runtime_error("reference must end with <eos>");
  std::vector<char> freed(reference_ids.size(), 0);
  for (std::size_t i = 0; i + 1 < reference_ids.size(); ++i)
    freed[i] = lexicon.is_stylistic(reference_ids[i], style) ? 1 : 0;
  return masked_sample(model, query_ids, reference_ids, freed, rng);
}

SamplingTrajectory unconstrained_sample(Seq2SeqModel& model,
                                        std::span<const int> query_ids, int max_len,
                                        std::mt19937_64& rng) {
  if (max_len < 1) throw std::runtime_error("max_len must be >= 1");
  Tape tape;
  EncoderGraph enc = model.encode_graph(tape, query_ids);
  DecoderGraphState st = model.initial_decoder_state(tape, enc);
  SamplingTrajectory traj;
  int prev = Vocabulary::kSos;
  for (int t = 0; t < max_len; ++t) {
    auto [log_probs, next] = model.decode_step_graph(tape, enc, st, prev);
    const Vec& lp = tape.value(log_probs);
    const int token = sample_categorical(lp, rng);
    traj.tokens.push_back(token);
    traj.freed_mask.push_back(1);
    traj.step_log_probs.push_back(lp[token]);
    st = next;
    prev = token;
    if (token == Vocabulary::kEos) break;
  }
  if (traj.tokens.back() != Vocabulary::kEos) {
    // length cap hit: close the trajectory on <eos> so it stays a valid
    // teacher-forcing target
    auto [log_probs, next] = model.decode_step_graph(tape, enc, st, prev);
    traj.tokens.push_back(Vocabulary::kEos);
    traj.freed_mask.push_back(1);
    traj.step_log_probs.push_back(tape.value(log_probs)[Vocabulary::kEos]);
  }
  return traj;
}

SamplingTrajectory random_mask_sample(Seq2SeqModel& model,
                                      std::span<const int> query_ids,
                                      std::span<const int> reference_ids, double p,
                                      std::mt19937_64& rng) {
  if (!(p > 0.0) || !(p < 1.0))
    throw std::runtime_error("random_mask_p must be in (0, 1)");
  if (reference_ids.empty() || reference_ids.back() != Vocabulary::kEos)
    throw std::runtime_error("reference must end with <eos>");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<char> freed(reference_ids.size(), 0);
  for (std::size_t i = 0; i + 1 < reference_ids.size(); ++i)
    freed[i] = unit(rng) < p ? 1 : 0;
  return masked_sample(model, query_ids, reference_ids, freed, rng);
}

double rl_loss(const SamplingTrajectory& traj, double baseline_b,
               bool include_copied) {
  double log_prob = 0.0;
  for (std::size_t i = 0; i < traj.step_log_probs.size(); ++i)
    if (include_copied || traj.freed_mask[i]) log_prob += traj.step_log_probs[i];
  return -(traj.reward - baseline_b) * log_prob;
}

double mle_loss(Seq2SeqModel& model, std::span<const int> query_ids,
                std::span<const int> reference_ids) {
  return -model.sequence_log_prob(query_ids, reference_ids).total;
}

double smoothing_loss(Seq2SeqModel& model, std::span<const int> query_ids,
                      std::span<const int> reference_ids,
                      const BigramTable& bigrams) {
  Tape tape;
  TeacherForcedPass pass = model.teacher_forced(tape, query_ids, reference_ids);
  double loss = 0.0;
  for (std::size_t i = 1; i < reference_ids.size(); ++i) {
    const int u = reference_ids[i - 1];
    if (bigrams.row_total(u) == 0) continue;
    const std::vector<double> f = bigrams.row_distribution(u);
    const Vec& lp = tape.value(pass.step_log_dists[i]);
    for (int v = 0; v < bigrams.vocab_size(); ++v)
      if (f[v] != 0.0) loss -= f[v] * lp[v];
  }
  return loss;
}

LossBreakdown hybrid_loss(double mle, double smo, double rl, double alpha,
                          double beta) {
  LossBreakdown out;
  out.mle = mle;
  out.smo = smo;
  out.rl = rl;
  out.hybrid = mle + alpha * smo + beta * rl;
  return out;
}

double trajectory_reward(const SamplingTrajectory& traj,
                         const StyleClassifier& classifier, int desired_style) {
  std::vector<int> surface;
  for (int id : traj.tokens)
    if (id >= Vocabulary::kNumReserved) surface.push_back(id);
  if (surface.empty()) return 0.0;
  return classifier.score(surface)[desired_style];
}

std::vector<double> pretrain(Seq2SeqModel& model,
                             const std::vector<DialoguePair>& corpus,
                             const Vocabulary& vocab, const TrainingConfig& config) {
  if (config.pretrain_epochs < 1)
    throw std::runtime_error("pretrain_epochs must be >= 1");
  std::vector<std::vector<int>> queries, targets;
  for (const auto& p : corpus) {
    queries.push_back(vocab.encode(p.query));
    targets.push_back(encode_with_eos(vocab, p.response));
  }

  AdamOptimizer adam(model.parameters(), config.learning_rate);
  std::mt19937_64 rng(config.seed);
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Tape tape;
      std::vector<Var> terms;
      for (std::size_t j = start; j < end; ++j) {
        const int i = order[j];
        TeacherForcedPass pass = model.teacher_forced(tape, queries[i], targets[i]);
        terms.push_back(tape.scale(tape.sum_scalars(pass.picked), -1.0));
      }
      Var batch_loss =
          tape.scale(tape.sum_scalars(terms), 1.0 / static_cast<double>(end - start));
      adam.zero_grads();
      tape.backward(batch_loss);
      adam.step();
      ++model.step;
      epoch_sum += tape.value(batch_loss)[0] * static_cast<double>(end - start);
    }
    epoch_losses.push_back(epoch_sum / static_cast<double>(order.size()));
  }
  return epoch_losses;
}

std::vector<EpochLog> train_rl(Seq2SeqModel& model,
                               const std::vector<DialoguePair>& corpus,
                               const Vocabulary& vocab, const StyleLexicon& lexicon,
                               const StyleClassifier& classifier,
                               const BigramTable& bigrams,
                               const TrainingConfig& config) {
  std::vector<std::vector<int>> queries, targets;
  std::vector<int> styles;
  for (const auto& p : corpus) {
    if (config.restrict_to_target_style && p.style != config.target_style) continue;
    queries.push_back(vocab.encode(p.query));
    targets.push_back(encode_with_eos(vocab, p.response));
    styles.push_back(p.style);
  }
  if (queries.empty()) throw std::runtime_error("no training pairs after filtering");

  // dense f rows, built once
  std::vector<Vec> f_rows(vocab.size());
  for (int u = 0; u < vocab.size(); ++u) {
    const std::vector<double> f = bigrams.row_distribution(u);
    f_rows[u] = Eigen::Map<const Vec>(f.data(), static_cast<Eigen::Index>(f.size()));
  }

  AdamOptimizer adam(model.parameters(), config.learning_rate);
  std::mt19937_64 rng(config.seed);
  std::vector<int> order(queries.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochLog> log;
  for (int epoch = 0; epoch < config.rl_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum_mle = 0.0, sum_smo = 0.0, sum_rl = 0.0, sum_reward = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double n = static_cast<double>(end - start);
      Tape tape;
      std::vector<Var> mle_terms, smo_terms, rl_terms;
      for (std::size_t j = start; j < end; ++j) {
        const int i = order[j];
        SamplingTrajectory traj;
        switch (config.mode) {
          case TrainingMode::kIgRl:
            traj = constrained_sample(model, queries[i], targets[i], styles[i],
                                      lexicon, rng);
            break;
          case TrainingMode::kUnconstrainedRl:
            traj = unconstrained_sample(model, queries[i],
                                        model.config().max_decode_len, rng);
            break;
          case TrainingMode::kRandomMask:
            traj = random_mask_sample(model, queries[i], targets[i],
                                      config.random_mask_p, rng);
            break;
        }
        traj.reward = trajectory_reward(traj, classifier, config.target_style);
        sum_reward += traj.reward;

        TeacherForcedPass tf = model.teacher_forced(tape, queries[i], targets[i]);
        mle_terms.push_back(tape.scale(tape.sum_scalars(tf.picked), -1.0));
        std::vector<Var> smo_step_terms;
        for (std::size_t t = 1; t < targets[i].size(); ++t) {
          const int u = targets[i][t - 1];
          if (bigrams.row_total(u) == 0) continue;
          smo_step_terms.push_back(
              tape.dot_const(tf.step_log_dists[t], f_rows[u]));
        }
        if (!smo_step_terms.empty())
          smo_terms.push_back(tape.scale(tape.sum_scalars(smo_step_terms), -1.0));

        TeacherForcedPass tf_traj =
            model.teacher_forced(tape, queries[i], traj.tokens);
        rl_terms.push_back(tape.scale(tape.sum_scalars(tf_traj.picked),
                                      -(traj.reward - config.baseline_b)));
      }
      Var mle = tape.scale(tape.sum_scalars(mle_terms), 1.0 / n);
      Var smo = smo_terms.empty() ? tape.constant(0.0)
                                  : tape.scale(tape.sum_scalars(smo_terms), 1.0 / n);
      Var rl = tape.scale(tape.sum_scalars(rl_terms), 1.0 / n);
      Var hybrid = tape.add(
          mle, tape.add(tape.scale(smo, config.alpha), tape.scale(rl, config.beta)));
      adam.zero_grads();
      tape.backward(hybrid);
      adam.step();
      ++model.step;
      sum_mle += tape.value(mle)[0] * n;
      sum_smo += tape.value(smo)[0] * n;
      sum_rl += tape.value(rl)[0] * n;
    }
    const double total = static_cast<double>(order.size());
    EpochLog row;
    row.epoch = epoch + 1;
    row.losses = hybrid_loss(sum_mle / total, sum_smo / total, sum_rl / total,
                             config.alpha, config.beta);
    row.losses.mean_reward = sum_reward / total;
    log.push_back(row);
  }
  return log;
}

void save_loss_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss log: " + path);
  out << "epoch,mle,smo,rl,hybrid,mean_reward\n";
  char buf[256];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n", row.epoch,
                  row.losses.mle, row.losses.smo, row.losses.rl, row.losses.hybrid,
                  row.losses.mean_reward);
    out << buf;
  }
}

}  // namespace igrl
