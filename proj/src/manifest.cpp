#include "igrl/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace igrl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json manifest_to_json(const ExperimentManifest& m) {
  json j;
  j["out_dir"] = m.out_dir;
  j["seed"] = m.seed;
  j["styles"] = m.styles.names;
  j["vocab_max_size"] = m.vocab_max_size;
  j["eval_pairs"] = m.eval_pairs;
  j["synthetic"] = {{"n_styles", m.synthetic.n_styles},
                    {"n_neutral_tokens", m.synthetic.n_neutral_tokens},
                    {"n_stylistic_tokens_per_style", m.synthetic.n_stylistic_tokens_per_style},
                    {"slot_fill_bias", m.synthetic.slot_fill_bias},
                    {"corpus_size", m.synthetic.corpus_size}};
  if (!m.synthetic.skeleton_templates.empty()) {
    json t = json::array();
    for (const auto& tpl : m.synthetic.skeleton_templates) t.push_back(detokenize(tpl));
    j["synthetic"]["skeleton_templates"] = t;
  }
  j["model"] = {{"embedding_dim", m.model.embedding_dim},
                {"hidden_dim", m.model.hidden_dim},
                {"encoder_layers", m.model.encoder_layers},
                {"decoder_layers", m.model.decoder_layers},
                {"max_decode_len", m.model.max_decode_len}};
  j["training"] = {{"alpha", m.training.alpha},
                   {"beta", m.training.beta},
                   {"baseline_b", m.training.baseline_b},
                   {"top_k", m.training.top_k},
                   {"learning_rate", m.training.learning_rate},
                   {"batch_size", m.training.batch_size},
                   {"pretrain_epochs", m.training.pretrain_epochs},
                   {"rl_epochs", m.training.rl_epochs},
                   {"target_style", m.styles.name_of(m.training.target_style)},
                   {"mode", to_string(m.training.mode)},
                   {"random_mask_p", m.training.random_mask_p},
                   {"restrict_to_target_style", m.training.restrict_to_target_style}};
  j["classifier"] = {{"learning_rate", m.classifier.learning_rate},
                     {"epochs", m.classifier.epochs},
                     {"holdout_fraction", m.classifier.holdout_fraction}};
  json conflicts = json::array();
  for (const auto& [a, b] : m.conflicts) conflicts.push_back({a, b});
  j["conflicts"] = conflicts;
  if (!m.neutral_style.empty()) j["neutral_style"] = m.neutral_style;
  return j;
}

void require_artifact(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw std::runtime_error("missing " + what);
}

void write_meta(const std::string& artifact_path, const std::string& hash) {
  std::ofstream out(artifact_path + ".meta.json");
  if (!out) throw std::runtime_error("cannot write meta sidecar for " + artifact_path);
  json obj;
  obj["manifest_hash"] = hash;
  out << obj.dump() << "\n";
}

std::string read_meta(const std::string& artifact_path) {
  std::ifstream in(artifact_path + ".meta.json");
  if (!in) return "";
  json obj = json::parse(in);
  return obj.value("manifest_hash", "");
}

void check_meta(const std::string& artifact_path, const std::string& expected,
                const std::string& what) {
  const std::string found = read_meta(artifact_path);
  if (found != expected)
    throw std::runtime_error("manifest hash mismatch on " + what +
                             " (stale artifact from a different manifest)");
}

ConflictMatrix conflict_matrix_of(const ExperimentManifest& m) {
  ConflictMatrix cm = ConflictMatrix::none(m.styles);
  for (const auto& [a, b] : m.conflicts) {
    const int ia = m.styles.id_of(a);
    const int ib = m.styles.id_of(b);
    cm.conflicted[ia][ib] = cm.conflicted[ib][ia] = 1;
  }
  if (!m.neutral_style.empty()) cm.neutral_style = m.styles.id_of(m.neutral_style);
  return cm;
}

}  // namespace

std::uint64_t ExperimentManifest::stage_seed(const std::string& stage) const {
  return fnv1a(stage, seed ^ 0x9e3779b97f4a7c15ULL);
}

std::string manifest_hash(const ExperimentManifest& m) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(manifest_to_json(m).dump())));
  return buf;
}

ExperimentManifest default_desk_manifest() {
  ExperimentManifest m;
  m.styles.names = {"style0", "style1"};
  m.synthetic.seed = 0;  // overwritten by the stage seed
  m.training.target_style = 0;
  m.conflicts = {{"style0", "style1"}};
  m.hash = manifest_hash(m);
  return m;
}

ExperimentManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  json j = json::parse(in);
  ExperimentManifest m;
  m.out_dir = j.value("out_dir", m.out_dir);
  m.seed = j.value("seed", m.seed);
  m.styles.names = j.value("styles", std::vector<std::string>{"style0", "style1"});
  m.vocab_max_size = j.value("vocab_max_size", m.vocab_max_size);
  m.eval_pairs = j.value("eval_pairs", m.eval_pairs);
  if (j.contains("synthetic")) {
    const json& s = j["synthetic"];
    m.synthetic.n_styles = s.value("n_styles", m.synthetic.n_styles);
    m.synthetic.n_neutral_tokens = s.value("n_neutral_tokens", m.synthetic.n_neutral_tokens);
    m.synthetic.n_stylistic_tokens_per_style =
        s.value("n_stylistic_tokens_per_style", m.synthetic.n_stylistic_tokens_per_style);
    m.synthetic.slot_fill_bias = s.value("slot_fill_bias", m.synthetic.slot_fill_bias);
    m.synthetic.corpus_size = s.value("corpus_size", m.synthetic.corpus_size);
    if (s.contains("skeleton_templates"))
      for (const auto& line : s["skeleton_templates"])
        m.synthetic.skeleton_templates.push_back(tokenize(line.get<std::string>()));
  }
  if (j.contains("model")) {
    const json& c = j["model"];
    m.model.embedding_dim = c.value("embedding_dim", m.model.embedding_dim);
    m.model.hidden_dim = c.value("hidden_dim", m.model.hidden_dim);
    m.model.encoder_layers = c.value("encoder_layers", m.model.encoder_layers);
    m.model.decoder_layers = c.value("decoder_layers", m.model.decoder_layers);
    m.model.max_decode_len = c.value("max_decode_len", m.model.max_decode_len);
  }
  if (j.contains("training")) {
    const json& t = j["training"];
    m.training.alpha = t.value("alpha", m.training.alpha);
    m.training.beta = t.value("beta", m.training.beta);
    m.training.baseline_b = t.value("baseline_b", m.training.baseline_b);
    m.training.top_k = t.value("top_k", m.training.top_k);
    m.training.learning_rate = t.value("learning_rate", m.training.learning_rate);
    m.training.batch_size = t.value("batch_size", m.training.batch_size);
    m.training.pretrain_epochs = t.value("pretrain_epochs", m.training.pretrain_epochs);
    m.training.rl_epochs = t.value("rl_epochs", m.training.rl_epochs);
    if (t.contains("target_style"))
      m.training.target_style = m.styles.id_of(t["target_style"].get<std::string>());
    if (t.contains("mode"))
      m.training.mode = training_mode_from_string(t["mode"].get<std::string>());
    m.training.random_mask_p = t.value("random_mask_p", m.training.random_mask_p);
    m.training.restrict_to_target_style =
        t.value("restrict_to_target_style", m.training.restrict_to_target_style);
  }
  if (j.contains("classifier")) {
    const json& c = j["classifier"];
    m.classifier.learning_rate = c.value("learning_rate", m.classifier.learning_rate);
    m.classifier.epochs = c.value("epochs", m.classifier.epochs);
    m.classifier.holdout_fraction =
        c.value("holdout_fraction", m.classifier.holdout_fraction);
  }
  if (j.contains("conflicts"))
    for (const auto& pair : j["conflicts"])
      m.conflicts.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
  m.neutral_style = j.value("neutral_style", std::string());
  m.hash = manifest_hash(m);
  return m;
}

void save_manifest(const ExperimentManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << manifest_to_json(m).dump(2) << "\n";
}

std::vector<DialoguePair> load_stage_corpus(const ExperimentManifest& m) {
  require_artifact(m.corpus_path(), "corpus (run synth first)");
  check_meta(m.corpus_path(), m.hash, "corpus");
  return load_corpus(m.corpus_path(), m.styles);
}

Vocabulary stage_vocabulary(const ExperimentManifest& m,
                            const std::vector<DialoguePair>& corpus) {
  return build_vocabulary(corpus, m.vocab_max_size);
}

void cmd_synth(const ExperimentManifest& m) {
  fs::create_directories(m.out_dir);
  SyntheticSpec spec = m.synthetic;
  spec.seed = m.stage_seed("synth");
  SyntheticCorpus synth = generate_synthetic_corpus(spec);
  for (const auto& name : synth.styles.names)
    m.styles.id_of(name);  // corpus styles must be a subset of the manifest styles
  save_corpus(synth.pairs, synth.styles, m.corpus_path());
  write_meta(m.corpus_path(), m.hash);
  save_ground_truth(synth, m.ground_truth_path());
  write_meta(m.ground_truth_path(), m.hash);
  {
    std::ofstream out(m.styles_path());
    out << json(m.styles.names).dump() << "\n";
  }
  std::vector<long> per_style(synth.styles.size(), 0);
  for (const auto& p : synth.pairs) ++per_style[p.style];
  std::cout << "[synth] manifest " << m.hash << " wrote " << synth.pairs.size()
            << " pairs:";
  for (int s = 0; s < synth.styles.size(); ++s)
    std::cout << " " << synth.styles.name_of(s) << "=" << per_style[s];
  std::cout << "\n";
}

void cmd_build_lexicon(const ExperimentManifest& m) {
  std::vector<DialoguePair> corpus = load_stage_corpus(m);
  Vocabulary vocab = stage_vocabulary(m, corpus);
  StyleLexicon lex = build_lexicon(corpus, vocab, m.styles);
  save_lexicon(lex, vocab, m.lexicon_path(), m.thresholds_path());
  write_meta(m.lexicon_path(), m.hash);
  write_meta(m.thresholds_path(), m.hash);
  std::cout << "[build-lexicon] manifest " << m.hash << " wrote "
            << (vocab.size() - Vocabulary::kNumReserved) * m.styles.size()
            << " lexicon rows\n";
}

void cmd_train_classifier(const ExperimentManifest& m) {
  std::vector<DialoguePair> corpus = load_stage_corpus(m);
  Vocabulary vocab = stage_vocabulary(m, corpus);
  std::vector<std::pair<std::vector<int>, int>> data;
  for (const auto& p : corpus) data.emplace_back(vocab.encode(p.response), p.style);
  ClassifierConfig cfg = m.classifier;
  cfg.seed = m.stage_seed("classifier");
  StyleClassifier clf =
      classifier_train(data, m.styles.size(), vocab.size(), vocab.hash(), cfg);
  clf.save(m.classifier_path(), m.hash);
  std::cout << "[train-classifier] manifest " << m.hash << " held-out accuracy "
            << clf.held_out_accuracy() << "\n";
}

void cmd_pretrain(const ExperimentManifest& m) {
  std::vector<DialoguePair> corpus = load_stage_corpus(m);
  Vocabulary vocab = stage_vocabulary(m, corpus);
  ModelConfig cfg = m.model;
  cfg.vocab_size = vocab.size();
  Seq2SeqModel model(cfg, vocab.hash(), m.stage_seed("model-init"));
  TrainingConfig tc = m.training;
  tc.seed = m.stage_seed("pretrain");
  std::vector<double> losses = pretrain(model, corpus, vocab, tc);
  save_checkpoint(model, m.pretrained_path(), m.hash);
  std::cout << "[pretrain] manifest " << m.hash << " epochs " << losses.size()
            << " final mle " << losses.back() << "\n";
}

void cmd_train(const ExperimentManifest& m, TrainingMode mode) {
  std::vector<DialoguePair> corpus = load_stage_corpus(m);
  Vocabulary vocab = stage_vocabulary(m, corpus);
  require_artifact(m.pretrained_path(), "pretrained checkpoint");
  require_artifact(m.lexicon_path(), "lexicon");
  require_artifact(m.classifier_path(), "classifier");
  check_meta(m.lexicon_path(), m.hash, "lexicon");
  if (checkpoint_manifest_hash(m.pretrained_path()) != m.hash)
    throw std::runtime_error("manifest hash mismatch on pretrained checkpoint");

  Seq2SeqModel model = load_checkpoint(m.pretrained_path(), vocab.hash());
  StyleLexicon lex = load_lexicon(vocab, m.lexicon_path(), m.thresholds_path());
  StyleClassifier clf = StyleClassifier::load(m.classifier_path(), vocab.hash());
  BigramTable bigrams = build_bigram_table(corpus, vocab);

  TrainingConfig tc = m.training;
  tc.mode = mode;
  tc.seed = m.stage_seed("train-" + to_string(mode));
  std::vector<EpochLog> log = train_rl(model, corpus, vocab, lex, clf, bigrams, tc);
  save_checkpoint(model, m.trained_path(mode), m.hash);
  save_loss_log(log, m.loss_log_path(mode));
  write_meta(m.loss_log_path(mode), m.hash);
  std::cout << "[train] manifest " << m.hash << " mode " << to_string(mode)
            << " final mean reward " << log.back().losses.mean_reward << "\n";
}

void cmd_generate(const ExperimentManifest& m, const std::string& queries_path,
                  const std::string& out_path, std::optional<TrainingMode> mode) {
  std::vector<DialoguePair> corpus = load_stage_corpus(m);
  Vocabulary vocab = stage_vocabulary(m, corpus);
  const std::string ckpt =
      mode ? m.trained_path(*mode) : m.pretrained_path();
  require_artifact(ckpt, mode ? "trained checkpoint (" + to_string(*mode) + ")"
                              : "pretrained checkpoint");
  if (checkpoint_manifest_hash(ckpt) != m.hash)
    throw std::runtime_error("manifest hash mismatch on checkpoint " + ckpt);
  Seq2SeqModel model = load_checkpoint(ckpt, vocab.hash());

  std::ifstream in(queries_path);
  if (!in) throw std::runtime_error("cannot open queries file: " + queries_path);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write responses file: " + out_path);
  std::mt19937_64 rng(m.stage_seed("generate"));
  std::string line;
  long count = 0;
  while (std::getline(in, line)) {
    std::vector<Token> q = tokenize(line);
    if (q.empty()) throw std::runtime_error("empty query line");
    std::vector<int> ids = model.top_k_sample_decode(
        vocab.encode(q), m.training.top_k, m.model.max_decode_len, rng);
    std::vector<Token> toks;
    for (int id : ids) toks.push_back(vocab.token(id));
    out << detokenize(toks) << "\n";
    ++count;
  }
  write_meta(out_path, m.hash);
  std::cout << "[generate] manifest " << m.hash << " wrote " << count
            << " responses\n";
}

EvalReport cmd_evaluate(const ExperimentManifest& m, TrainingMode mode) {
  std::vector<DialoguePair> corpus = load_stage_corpus(m);
  Vocabulary vocab = stage_vocabulary(m, corpus);
  require_artifact(m.lexicon_path(), "lexicon");
  require_artifact(m.classifier_path(), "classifier");
  require_artifact(m.trained_path(mode), "trained checkpoint (" + to_string(mode) + ")");
  check_meta(m.lexicon_path(), m.hash, "lexicon");
  if (checkpoint_manifest_hash(m.trained_path(mode)) != m.hash)
    throw std::runtime_error("manifest hash mismatch on trained checkpoint");

  Seq2SeqModel model = load_checkpoint(m.trained_path(mode), vocab.hash());
  StyleLexicon lex = load_lexicon(vocab, m.lexicon_path(), m.thresholds_path());
  StyleClassifier clf = StyleClassifier::load(m.classifier_path(), vocab.hash());
  ConflictMatrix cm = conflict_matrix_of(m);

  const std::size_t n = std::min<std::size_t>(corpus.size(), m.eval_pairs);
  std::vector<DialoguePair> subset(corpus.begin(), corpus.begin() + n);
  std::mt19937_64 rng(m.stage_seed("evaluate"));
  std::vector<std::vector<int>> generated, references;
  std::vector<std::vector<Token>> generated_tokens;
  for (const auto& p : subset) {
    std::vector<int> ids = model.top_k_sample_decode(
        vocab.encode(p.query), m.training.top_k, m.model.max_decode_len, rng);
    generated.push_back(ids);
    references.push_back(vocab.encode(p.response));
    std::vector<Token> toks;
    for (int id : ids) toks.push_back(vocab.token(id));
    generated_tokens.push_back(std::move(toks));
  }

  auto row_for = [&](const std::string& name, const std::vector<std::size_t>& idx) {
    EvalRow row;
    row.style = name;
    std::vector<std::vector<Token>> gt;
    std::vector<std::vector<int>> g, r;
    std::vector<DialoguePair> sub;
    for (std::size_t i : idx) {
      gt.push_back(generated_tokens[i]);
      g.push_back(generated[i]);
      r.push_back(references[i]);
      sub.push_back(subset[i]);
    }
    row.distinct_1 = distinct_n(gt, 1);
    row.distinct_2 = distinct_n(gt, 2);
    row.a_sar = a_sar(g, m.training.target_style, clf, cm);
    // neutrality is judged by each reference's own style
    long neutral = 0, matches = 0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const int s = sub[j].style;
      for (std::size_t i = 0; i < r[j].size(); ++i) {
        if (lex.is_stylistic(r[j][i], s)) continue;
        ++neutral;
        if (i < g[j].size() && g[j][i] == r[j][i]) ++matches;
      }
    }
    row.skeleton_retention =
        neutral == 0 ? 0.0 : static_cast<double>(matches) / neutral;
    row.perplexity = perplexity(model, sub, vocab);
    row.sample_count = static_cast<long>(idx.size());
    return row;
  };

  EvalReport report;
  report.config_digest = m.hash;
  for (int s = 0; s < m.styles.size(); ++s) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < subset.size(); ++i)
      if (subset[i].style == s) idx.push_back(i);
    if (!idx.empty()) report.rows.push_back(row_for(m.styles.name_of(s), idx));
  }
  std::vector<std::size_t> all(subset.size());
  std::iota(all.begin(), all.end(), 0);
  report.rows.push_back(row_for("overall", all));

  emit_report(report, m.report_path(mode));
  write_meta(m.report_path(mode), m.hash);
  std::cout << "[evaluate] manifest " << m.hash << " mode " << to_string(mode)
            << " wrote " << m.report_path(mode) << "\n";
  return report;
}

}  // namespace igrl
