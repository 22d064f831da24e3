#include "igrl/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace igrl {

using nlohmann::json;

namespace {

void init_uniform(Param& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.08, 0.08);
  for (Eigen::Index c = 0; c < p.value.cols(); ++c)
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) p.value(r, c) = dist(rng);
}

}  // namespace

Seq2SeqModel::Seq2SeqModel(ModelConfig cfg, std::uint64_t vocab_hash,
                           std::uint64_t init_seed)
    : cfg_(cfg), vocab_hash_(vocab_hash) {
  if (cfg_.vocab_size <= Vocabulary::kNumReserved)
    throw std::runtime_error("vocab_size too small");
  if (cfg_.embedding_dim < 1 || cfg_.hidden_dim < 1 || cfg_.encoder_layers < 1 ||
      cfg_.decoder_layers < 1)
    throw std::runtime_error("model dimensions must be >= 1");

  const int E = cfg_.embedding_dim, H = cfg_.hidden_dim, V = cfg_.vocab_size;
  embedding = Param("embedding", E, V);
  for (int l = 0; l < cfg_.encoder_layers; ++l) {
    const int in = l == 0 ? E : H;
    enc_layers.push_back({Param("enc" + std::to_string(l) + ".w", 4 * H, in + H),
                          Param("enc" + std::to_string(l) + ".b", 4 * H, 1)});
  }
  for (int l = 0; l < cfg_.decoder_layers; ++l) {
    const int in = l == 0 ? E + H : H;  // input feeding: prev context on layer 0
    dec_layers.push_back({Param("dec" + std::to_string(l) + ".w", 4 * H, in + H),
                          Param("dec" + std::to_string(l) + ".b", 4 * H, 1)});
  }
  attn_w = Param("attn.w", H, H);
  combine_w = Param("combine.w", H, 2 * H);
  combine_b = Param("combine.b", H, 1);
  out_w = Param("out.w", V, H);
  out_b = Param("out.b", V, 1);

  std::mt19937_64 rng(init_seed);
  for (Param* p : parameters()) init_uniform(*p, rng);
}

std::vector<Param*> Seq2SeqModel::parameters() {
  std::vector<Param*> ps{&embedding};
  for (auto& l : enc_layers) {
    ps.push_back(&l.w);
    ps.push_back(&l.b);
  }
  for (auto& l : dec_layers) {
    ps.push_back(&l.w);
    ps.push_back(&l.b);
  }
  ps.push_back(&attn_w);
  ps.push_back(&combine_w);
  ps.push_back(&combine_b);
  ps.push_back(&out_w);
  ps.push_back(&out_b);
  return ps;
}

std::pair<Var, Var> Seq2SeqModel::lstm_cell(Tape& tape, LstmLayer& layer, Var input,
                                            Var h_prev, Var c_prev) {
  const int H = cfg_.hidden_dim;
  Var z = tape.add_bias(tape.matvec(layer.w, tape.concat(input, h_prev)), layer.b);
  Var i = tape.sigmoid(tape.slice(z, 0, H));
  Var f = tape.sigmoid(tape.slice(z, H, H));
  Var g = tape.tanh(tape.slice(z, 2 * H, H));
  Var o = tape.sigmoid(tape.slice(z, 3 * H, H));
  Var c = tape.add(tape.cmul(f, c_prev), tape.cmul(i, g));
  Var h = tape.cmul(o, tape.tanh(c));
  return {h, c};
}

EncoderGraph Seq2SeqModel::encode_graph(Tape& tape, std::span<const int> query_ids) {
  if (query_ids.empty()) throw std::runtime_error("cannot encode an empty query");
  const int H = cfg_.hidden_dim;
  const int L = cfg_.encoder_layers;
  std::vector<Var> h(L), c(L);
  for (int l = 0; l < L; ++l) {
    h[l] = tape.zeros(H);
    c[l] = tape.zeros(H);
  }
  EncoderGraph enc;
  for (int id : query_ids) {
    Var input = tape.embed(embedding, id);
    for (int l = 0; l < L; ++l) {
      auto [nh, nc] = lstm_cell(tape, enc_layers[l], input, h[l], c[l]);
      h[l] = nh;
      c[l] = nc;
      input = nh;
    }
    enc.states.push_back(h[L - 1]);
  }
  enc.h_final = h;
  enc.c_final = c;
  return enc;
}

DecoderGraphState Seq2SeqModel::initial_decoder_state(Tape& tape,
                                                      const EncoderGraph& enc) {
  DecoderGraphState st;
  const int L = cfg_.decoder_layers;
  const int EL = cfg_.encoder_layers;
  for (int l = 0; l < L; ++l) {
    // carry encoder finals over layer-by-layer; extra decoder layers start at zero
    if (l < EL) {
      st.h.push_back(enc.h_final[l]);
      st.c.push_back(enc.c_final[l]);
    } else {
      st.h.push_back(tape.zeros(cfg_.hidden_dim));
      st.c.push_back(tape.zeros(cfg_.hidden_dim));
    }
  }
  st.context = tape.zeros(cfg_.hidden_dim);
  return st;
}

std::pair<Var, DecoderGraphState> Seq2SeqModel::decode_step_graph(
    Tape& tape, const EncoderGraph& enc, const DecoderGraphState& state,
    int prev_token) {
  DecoderGraphState next = state;
  Var input = tape.concat(tape.embed(embedding, prev_token), state.context);
  for (int l = 0; l < cfg_.decoder_layers; ++l) {
    auto [nh, nc] = lstm_cell(tape, dec_layers[l], input, state.h[l], state.c[l]);
    next.h[l] = nh;
    next.c[l] = nc;
    input = nh;
  }
  Var h_top = next.h[cfg_.decoder_layers - 1];
  Var ctx = tape.attend(enc.states, tape.matvec(attn_w, h_top));
  Var combined =
      tape.tanh(tape.add_bias(tape.matvec(combine_w, tape.concat(ctx, h_top)), combine_b));
  Var log_probs = tape.log_softmax(tape.add_bias(tape.matvec(out_w, combined), out_b));
  next.context = ctx;
  return {log_probs, next};
}

TeacherForcedPass Seq2SeqModel::teacher_forced(Tape& tape,
                                               std::span<const int> query_ids,
                                               std::span<const int> target_ids) {
  if (target_ids.empty() || target_ids.back() != Vocabulary::kEos)
    throw std::runtime_error("target sequence must end with <eos>");
  EncoderGraph enc = encode_graph(tape, query_ids);
  DecoderGraphState st = initial_decoder_state(tape, enc);
  TeacherForcedPass pass;
  int prev = Vocabulary::kSos;
  for (int target : target_ids) {
    auto [log_probs, next] = decode_step_graph(tape, enc, st, prev);
    pass.step_log_dists.push_back(log_probs);
    pass.picked.push_back(tape.pick(log_probs, target));
    st = next;
    prev = target;
  }
  return pass;
}

std::vector<Vec> Seq2SeqModel::encode(std::span<const int> query_ids) {
  Tape tape;
  EncoderGraph enc = encode_graph(tape, query_ids);
  std::vector<Vec> out;
  for (Var v : enc.states) out.push_back(tape.value(v));
  return out;
}

SequenceLogProb Seq2SeqModel::sequence_log_prob(std::span<const int> query_ids,
                                                std::span<const int> target_ids) {
  Tape tape;
  TeacherForcedPass pass = teacher_forced(tape, query_ids, target_ids);
  SequenceLogProb out;
  for (Var v : pass.picked) {
    out.per_position.push_back(tape.value(v)[0]);
    out.total += tape.value(v)[0];
  }
  return out;
}

std::vector<int> Seq2SeqModel::top_k_sample_decode(std::span<const int> query_ids,
                                                   int k, int max_len,
                                                   std::mt19937_64& rng) {
  if (k < 1 || k > cfg_.vocab_size)
    throw std::runtime_error("top_k out of range [1, |V|]");
  Tape tape;
  EncoderGraph enc = encode_graph(tape, query_ids);
  DecoderGraphState st = initial_decoder_state(tape, enc);
  std::vector<int> out;
  int prev = Vocabulary::kSos;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < max_len; ++t) {
    auto [log_probs, next] = decode_step_graph(tape, enc, st, prev);
    const Vec& lp = tape.value(log_probs);
    std::vector<int> order(cfg_.vocab_size);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) {
                        if (lp[a] != lp[b]) return lp[a] > lp[b];
                        return a < b;  // ties to the lowest index
                      });
    int chosen;
    if (k == 1) {
      chosen = order[0];
    } else {
      double mass = 0.0;
      for (int i = 0; i < k; ++i) mass += std::exp(lp[order[i]]);
      double u = unit(rng) * mass;
      chosen = order[k - 1];
      for (int i = 0; i < k; ++i) {
        u -= std::exp(lp[order[i]]);
        if (u <= 0.0) {
          chosen = order[i];
          break;
        }
      }
    }
    if (chosen == Vocabulary::kEos) break;
    out.push_back(chosen);
    st = next;
    prev = chosen;
  }
  return out;
}

double Seq2SeqModel::probe_digest() {
  // fixed probe: a short sequence over low content ids
  const int a = Vocabulary::kNumReserved < cfg_.vocab_size ? Vocabulary::kNumReserved
                                                           : Vocabulary::kUnk;
  std::vector<int> x{a, Vocabulary::kUnk};
  std::vector<int> y{a, Vocabulary::kEos};
  return sequence_log_prob(x, y).total;
}

void save_checkpoint(Seq2SeqModel& model, const std::string& path,
                     const std::string& manifest_hash) {
  json obj;
  obj["format"] = "igrl-checkpoint-v1";
  const ModelConfig& c = model.config();
  obj["config"] = {{"embedding_dim", c.embedding_dim}, {"hidden_dim", c.hidden_dim},
                   {"encoder_layers", c.encoder_layers},
                   {"decoder_layers", c.decoder_layers}, {"vocab_size", c.vocab_size},
                   {"max_decode_len", c.max_decode_len}};
  obj["vocab_hash"] = model.vocab_hash();
  obj["step"] = model.step;
  obj["probe_digest"] = model.probe_digest();
  if (!manifest_hash.empty()) obj["manifest_hash"] = manifest_hash;
  json params = json::object();
  for (Param* p : model.parameters()) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index col = 0; col < p->value.cols(); ++col)
        row.push_back(p->value(r, col));
      rows.push_back(std::move(row));
    }
    params[p->name] = std::move(rows);
  }
  obj["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << obj.dump() << "\n";
}

Seq2SeqModel load_checkpoint(const std::string& path,
                             std::uint64_t expected_vocab_hash) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json obj = json::parse(in);
  if (obj.value("format", "") != std::string("igrl-checkpoint-v1"))
    throw std::runtime_error("unrecognized checkpoint format");
  const std::uint64_t stored_hash = obj["vocab_hash"].get<std::uint64_t>();
  if (stored_hash != expected_vocab_hash)
    throw std::runtime_error("vocabulary hash mismatch: checkpoint was built "
                             "against a different vocabulary");
  ModelConfig cfg;
  const json& jc = obj["config"];
  cfg.embedding_dim = jc["embedding_dim"];
  cfg.hidden_dim = jc["hidden_dim"];
  cfg.encoder_layers = jc["encoder_layers"];
  cfg.decoder_layers = jc["decoder_layers"];
  cfg.vocab_size = jc["vocab_size"];
  cfg.max_decode_len = jc["max_decode_len"];

  Seq2SeqModel model(cfg, stored_hash, /*init_seed=*/0);
  model.step = obj["step"].get<long>();
  const json& params = obj["params"];
  for (Param* p : model.parameters()) {
    if (!params.contains(p->name))
      throw std::runtime_error("checkpoint missing parameter: " + p->name);
    const json& rows = params[p->name];
    if (static_cast<Eigen::Index>(rows.size()) != p->value.rows())
      throw std::runtime_error("checkpoint shape mismatch for " + p->name);
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index col = 0; col < p->value.cols(); ++col)
        p->value(r, col) = rows[r][col].get<double>();
  }
  const double expected_probe = obj["probe_digest"].get<double>();
  if (model.probe_digest() != expected_probe)
    throw std::runtime_error("checkpoint probe digest mismatch");
  return model;
}

std::string checkpoint_manifest_hash(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json obj = json::parse(in);
  return obj.value("manifest_hash", "");
}

}  // namespace igrl
