#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "igrl/autodiff.hpp"
#include "igrl/corpus.hpp"

namespace igrl {

struct ModelConfig {
  int embedding_dim = 32;
  int hidden_dim = 64;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int vocab_size = 0;
  int max_decode_len = 16;
};

struct LstmLayer {
  Param w;  // 4H x (in + H), gate order i,f,g,o
  Param b;  // 4H x 1
};

struct EncoderGraph {
  std::vector<Var> states;            // top-layer state per input position
  std::vector<Var> h_final, c_final;  // per layer
};

struct DecoderGraphState {
  std::vector<Var> h, c;  // per layer
  Var context;            // previous attention context (input feeding)
};

struct TeacherForcedPass {
  std::vector<Var> step_log_dists;  // log-softmax over V, one per position
  std::vector<Var> picked;          // scalar log p of the target token
};

struct SequenceLogProb {
  double total = 0.0;
  std::vector<double> per_position;
};

/// Attention-equipped LSTM encoder-decoder policy. Graph-building methods
/// record onto a caller-owned tape; gradients land in the Params once the
/// caller runs backward.
class Seq2SeqModel {
 public:
  Seq2SeqModel(ModelConfig cfg, std::uint64_t vocab_hash, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }
  long step = 0;  // training steps applied to the parameters

  std::vector<Param*> parameters();

  EncoderGraph encode_graph(Tape& tape, std::span<const int> query_ids);
  DecoderGraphState initial_decoder_state(Tape& tape, const EncoderGraph& enc);
  std::pair<Var, DecoderGraphState> decode_step_graph(Tape& tape,
                                                      const EncoderGraph& enc,
                                                      const DecoderGraphState& state,
                                                      int prev_token);

  /// Teacher-forced pass over target_ids (which must end with <eos>).
  TeacherForcedPass teacher_forced(Tape& tape, std::span<const int> query_ids,
                                   std::span<const int> target_ids);

  // -- inference conveniences (scratch tape, no backward) --
  std::vector<Vec> encode(std::span<const int> query_ids);
  SequenceLogProb sequence_log_prob(std::span<const int> query_ids,
                                    std::span<const int> target_ids);
  /// Emits surface ids; stops at <eos> (not included) or max_len steps.
  std::vector<int> top_k_sample_decode(std::span<const int> query_ids, int k,
                                       int max_len, std::mt19937_64& rng);

  double probe_digest();

  Param embedding;
  std::vector<LstmLayer> enc_layers, dec_layers;
  Param attn_w;                // H x H
  Param combine_w, combine_b;  // H x 2H, H
  Param out_w, out_b;          // V x H, V

 private:
  ModelConfig cfg_;
  std::uint64_t vocab_hash_;

  std::pair<Var, Var> lstm_cell(Tape& tape, LstmLayer& layer, Var input, Var h_prev,
                                Var c_prev);
};

/// Checkpoint round trip restores bit-identical forward outputs; load
/// refuses a vocabulary-hash mismatch.
void save_checkpoint(Seq2SeqModel& model, const std::string& path,
                     const std::string& manifest_hash = "");
Seq2SeqModel load_checkpoint(const std::string& path, std::uint64_t expected_vocab_hash);
std::string checkpoint_manifest_hash(const std::string& path);

}  // namespace igrl
