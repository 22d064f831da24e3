// Acceptance suite: one pass/fail line per criterion; exit code is the
// number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "igrl/evalsuite.hpp"
#include "igrl/manifest.hpp"
#include "igrl/objectives.hpp"

using namespace igrl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> body;
};

DialoguePair make_pair(const std::string& q, const std::string& r, int style) {
  return DialoguePair{tokenize(q), tokenize(r), style};
}

// ---------------------------------------------------------------------------
// C1: independent brute-force PMI oracle over string-keyed counts.
// ---------------------------------------------------------------------------

struct OraclePmi {
  std::map<std::string, std::map<int, long>> joint;
  std::map<std::string, long> token_count;
  std::vector<long> style_mass;
  long total = 0;

  OraclePmi(const std::vector<DialoguePair>& corpus, int n_styles)
      : style_mass(n_styles, 0) {
    for (const auto& p : corpus)
      for (const auto& tok : p.response) {
        ++joint[tok][p.style];
        ++token_count[tok];
        ++style_mass[p.style];
        ++total;
      }
  }

  double pmi(const std::string& tok, int style) const {
    auto it = joint.find(tok);
    const long j = it == joint.end() ? 0
                   : it->second.count(style) ? it->second.at(style)
                                             : 0;
    if (j == 0) return kPmiFloor;
    return std::log(double(j) * double(total) /
                    (double(token_count.at(tok)) * double(style_mass[style])));
  }
};

bool criterion_pmi_oracle(std::string& detail) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst_pmi = 0.0, worst_thresh = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n_styles = 2 + int(rng() % 2);
    const int n_tokens = 5 + int(rng() % 26);  // token types <= 30
    const int n_pairs = int(n_styles) + int(rng() % (50 - n_styles));
    std::vector<DialoguePair> corpus;
    for (int s = 0; s < n_styles; ++s)  // every style gets at least one pair
      corpus.push_back(make_pair("q", "t" + std::to_string(rng() % n_tokens), s));
    while (int(corpus.size()) < n_pairs) {
      std::string resp;
      const int len = 1 + int(rng() % 8);
      for (int j = 0; j < len; ++j) resp += "t" + std::to_string(rng() % n_tokens) + " ";
      corpus.push_back(make_pair("q", resp, int(rng() % n_styles)));
    }
    StyleSet styles;
    for (int s = 0; s < n_styles; ++s) styles.names.push_back("s" + std::to_string(s));
    Vocabulary vocab = build_vocabulary(corpus, 200);
    StyleLexicon lex = build_lexicon(corpus, vocab, styles);
    OraclePmi oracle(corpus, n_styles);
    for (int s = 0; s < n_styles; ++s) {
      double oracle_max = kPmiFloor;
      for (int x = Vocabulary::kNumReserved; x < vocab.size(); ++x) {
        const double expect = oracle.pmi(vocab.token(x), s);
        worst_pmi = std::max(worst_pmi, std::abs(lex.pmi[x][s] - expect));
        if (expect > kPmiFloor) oracle_max = std::max(oracle_max, expect);
      }
      worst_thresh =
          std::max(worst_thresh, std::abs(lex.threshold[s] - 0.75 * oracle_max));
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream out;
  out << "100 corpora, max |pmi - oracle| = " << worst_pmi
      << ", max threshold error = " << worst_thresh << ", " << secs << " s";
  detail = out.str();
  return worst_pmi <= 1e-9 && worst_thresh <= 1e-9 && secs < 10.0;
}

// ---------------------------------------------------------------------------
// C2: planted-lexicon recovery on the synthetic corpus.
// ---------------------------------------------------------------------------

bool criterion_lexicon_recovery(std::string& detail) {
  const auto t0 = Clock::now();
  SyntheticSpec spec;
  spec.corpus_size = 2000;
  spec.slot_fill_bias = 0.9;
  spec.seed = 404;
  SyntheticCorpus c = generate_synthetic_corpus(spec);
  Vocabulary vocab = build_vocabulary(c.pairs, 200);
  StyleLexicon lex = build_lexicon(c.pairs, vocab, c.styles);
  double min_precision = 1.0, min_recall = 1.0;
  for (int s = 0; s < c.styles.size(); ++s) {
    const auto& truth = c.planted.at(c.styles.name_of(s));
    long tp = 0, fp = 0;
    for (int x = Vocabulary::kNumReserved; x < vocab.size(); ++x) {
      if (!lex.is_stylistic(x, s)) continue;
      if (truth.count(vocab.token(x))) ++tp;
      else ++fp;
    }
    min_precision = std::min(min_precision,
                             tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp));
    min_recall = std::min(min_recall, double(tp) / double(truth.size()));
  }
  const double secs = seconds_since(t0);
  std::ostringstream out;
  out << "precision >= " << min_precision << ", recall >= " << min_recall << ", "
      << secs << " s";
  detail = out.str();
  return min_precision >= 0.95 && min_recall >= 0.95 && secs < 30.0;
}

// ---------------------------------------------------------------------------
// C3: constrained-sampling invariant over >= 10,000 trajectories.
// ---------------------------------------------------------------------------

bool criterion_sampling_invariant(std::string& detail) {
  SyntheticSpec spec;
  spec.corpus_size = 500;
  spec.seed = 7;
  SyntheticCorpus c = generate_synthetic_corpus(spec);
  Vocabulary vocab = build_vocabulary(c.pairs, 200);
  StyleLexicon lex = build_lexicon(c.pairs, vocab, c.styles);
  ModelConfig cfg;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 12;
  cfg.vocab_size = vocab.size();
  Seq2SeqModel model(cfg, vocab.hash(), 55);

  std::mt19937_64 rng(99);
  long violations = 0, trajectories = 0;
  std::vector<std::vector<std::vector<int>>> per_style_traj(c.styles.size());
  std::vector<std::vector<std::vector<int>>> per_style_ref(c.styles.size());
  while (trajectories < 10000) {
    const DialoguePair& p = c.pairs[trajectories % c.pairs.size()];
    const std::vector<int> query = vocab.encode(p.query);
    const std::vector<int> ref = encode_with_eos(vocab, p.response);
    SamplingTrajectory traj =
        constrained_sample(model, query, ref, p.style, lex, rng);
    ++trajectories;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const bool terminal = i + 1 == ref.size();
      const bool should_free = !terminal && lex.is_stylistic(ref[i], p.style);
      if (bool(traj.freed_mask[i]) != should_free) ++violations;
      if (!traj.freed_mask[i] && traj.tokens[i] != ref[i]) ++violations;
    }
    per_style_traj[p.style].push_back(traj.tokens);
    per_style_ref[p.style].push_back(ref);
  }
  double min_retention = 1.0;
  for (int s = 0; s < c.styles.size(); ++s)
    min_retention = std::min(
        min_retention,
        skeleton_retention(per_style_traj[s], per_style_ref[s], s, lex));
  std::ostringstream out;
  out << trajectories << " trajectories, " << violations
      << " violations, retention = " << min_retention;
  detail = out.str();
  return violations == 0 && min_retention == 1.0;
}

// ---------------------------------------------------------------------------
// C4: finite-difference check of the hybrid loss.
// ---------------------------------------------------------------------------

bool criterion_gradient(std::string& detail) {
  const auto t0 = Clock::now();
  std::vector<DialoguePair> corpus;
  for (int i = 0; i < 4; ++i) {
    corpus.push_back(make_pair("q", "n s0 n", 0));
    corpus.push_back(make_pair("q", "n s1 n", 1));
  }
  StyleSet styles{{"style0", "style1"}};
  Vocabulary vocab = build_vocabulary(corpus, 20);
  StyleLexicon lex = build_lexicon(corpus, vocab, styles);
  BigramTable bigrams = build_bigram_table(corpus, vocab);

  ModelConfig cfg;
  cfg.embedding_dim = 4;
  cfg.hidden_dim = 6;
  cfg.vocab_size = vocab.size();
  Seq2SeqModel model(cfg, vocab.hash(), 17);

  const std::vector<int> query = vocab.encode(tokenize("q"));
  const std::vector<int> ref = encode_with_eos(vocab, tokenize("n s0 n"));
  std::mt19937_64 rng(5);
  SamplingTrajectory traj = constrained_sample(model, query, ref, 0, lex, rng);
  const double reward = 0.7;  // fixed stub
  const double alpha = 0.2, beta = 0.25, baseline = 0.3;

  std::vector<Vec> f_rows(vocab.size());
  for (int u = 0; u < vocab.size(); ++u) {
    const std::vector<double> f = bigrams.row_distribution(u);
    f_rows[u] = Eigen::Map<const Vec>(f.data(), Eigen::Index(f.size()));
  }

  auto build = [&](Tape& tape) {
    TeacherForcedPass tf = model.teacher_forced(tape, query, ref);
    Var mle = tape.scale(tape.sum_scalars(tf.picked), -1.0);
    std::vector<Var> smo_terms;
    for (std::size_t t = 1; t < ref.size(); ++t)
      if (bigrams.row_total(ref[t - 1]) > 0)
        smo_terms.push_back(tape.dot_const(tf.step_log_dists[t], f_rows[ref[t - 1]]));
    Var smo = tape.scale(tape.sum_scalars(smo_terms), -1.0);
    TeacherForcedPass tf2 = model.teacher_forced(tape, query, traj.tokens);
    Var rl = tape.scale(tape.sum_scalars(tf2.picked), -(reward - baseline));
    return tape.add(mle,
                    tape.add(tape.scale(smo, alpha), tape.scale(rl, beta)));
  };
  auto loss_value = [&] {
    Tape tape;
    return tape.value(build(tape))[0];
  };
  {
    Tape tape;
    Var loss = build(tape);
    for (Param* p : model.parameters()) p->zero_grad();
    tape.backward(loss);
  }
  const double h = 1e-4;
  double max_rel = 0.0;
  long coords = 0;
  for (Param* p : model.parameters())
    for (Eigen::Index cc = 0; cc < p->value.cols(); ++cc)
      for (Eigen::Index rr = 0; rr < p->value.rows(); ++rr) {
        const double orig = p->value(rr, cc);
        p->value(rr, cc) = orig + h;
        const double up = loss_value();
        p->value(rr, cc) = orig - h;
        const double down = loss_value();
        p->value(rr, cc) = orig;
        const double fd = (up - down) / (2 * h);
        const double g = p->grad(rr, cc);
        const double denom = std::max({1e-6, std::abs(fd), std::abs(g)});
        max_rel = std::max(max_rel, std::abs(fd - g) / denom);
        ++coords;
      }
  const double secs = seconds_since(t0);
  std::ostringstream out;
  out << coords << " coordinates, max relative error = " << max_rel << ", " << secs
      << " s";
  detail = out.str();
  return max_rel <= 1e-3 && secs < 60.0;
}

// ---------------------------------------------------------------------------
// C5: REINFORCE unbiasedness on an enumerable toy policy.
// ---------------------------------------------------------------------------

bool criterion_reinforce_unbiased(std::string& detail) {
  // policy: two independent softmax steps over a 3-token vocabulary
  Param logits("logits", 3, 2);
  logits.value << 0.5, -0.3, 0.1, 0.8, -0.6, 0.2;
  const double reward[3][3] = {{0.9, 0.2, 0.1}, {0.4, 0.6, 0.3}, {0.05, 0.8, 0.5}};
  const double baseline = 0.3;

  auto grad_of = [&](int y0, int y1) {
    Tape tape;
    Var lp0 = tape.pick(tape.log_softmax(tape.embed(logits, 0)), y0);
    Var lp1 = tape.pick(tape.log_softmax(tape.embed(logits, 1)), y1);
    Var loss =
        tape.scale(tape.add(lp0, lp1), -(reward[y0][y1] - baseline));
    logits.zero_grad();
    tape.backward(loss);
    return std::pair<double, Mat>(tape.value(loss)[0], logits.grad);
  };

  Vec p0(3), p1(3);
  for (int t = 0; t < 2; ++t) {
    Vec z = logits.value.col(t);
    Vec e = (z.array() - z.maxCoeff()).exp();
    (t == 0 ? p0 : p1) = e / e.sum();
  }

  Mat exact = Mat::Zero(3, 2);
  Mat grads[3][3];
  for (int y0 = 0; y0 < 3; ++y0)
    for (int y1 = 0; y1 < 3; ++y1) {
      grads[y0][y1] = grad_of(y0, y1).second;
      exact += p0[y0] * p1[y1] * grads[y0][y1];
    }

  const long n = 50000;
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](const Vec& p) {
    double u = unit(rng);
    for (int i = 0; i < 3; ++i) {
      u -= p[i];
      if (u <= 0.0) return i;
    }
    return 2;
  };
  long counts[3][3] = {};
  for (long i = 0; i < n; ++i) ++counts[draw(p0)][draw(p1)];

  Mat mc_mean = Mat::Zero(3, 2), mc_sq = Mat::Zero(3, 2);
  for (int y0 = 0; y0 < 3; ++y0)
    for (int y1 = 0; y1 < 3; ++y1) {
      const double w = double(counts[y0][y1]) / double(n);
      mc_mean += w * grads[y0][y1];
      mc_sq += w * grads[y0][y1].cwiseProduct(grads[y0][y1]);
    }

  double worst_z = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c) {
      const double var = std::max(0.0, mc_sq(r, c) - mc_mean(r, c) * mc_mean(r, c));
      const double se = std::sqrt(var / double(n));
      const double dev = std::abs(mc_mean(r, c) - exact(r, c));
      worst_z = std::max(worst_z, se == 0.0 ? (dev == 0.0 ? 0.0 : 1e18) : dev / se);
    }
  std::ostringstream out;
  out << n << " samples, worst |mc - exact| / se = " << worst_z;
  detail = out.str();
  return worst_z <= 3.0;
}

// ---------------------------------------------------------------------------
// C6 + C7: shared desk-scale end-to-end experiment.
// ---------------------------------------------------------------------------

struct GenEval {
  double mean_reward = 0.0;
  double retention = 0.0;
  double perplexity = 0.0;
  double distinct2 = 0.0;
  double top_suffix_frac = 0.0;  // most frequent trailing n-gram (n = 2..4)
  std::string top_suffix;
};

struct DeskExperiment {
  SyntheticCorpus corpus;
  Vocabulary vocab;
  StyleLexicon lexicon;
  StyleClassifier classifier;
  Seq2SeqModel pretrained, ig_rl, unconstrained;
  double setup_seconds = 0.0;     // corpus + classifier + pretrain
  double ig_rl_seconds = 0.0;
  double unconstrained_seconds = 0.0;

  static DeskExperiment* instance();
  GenEval evaluate(Seq2SeqModel& model, int target_style);

 private:
  DeskExperiment();
};

DeskExperiment::DeskExperiment()
    : corpus([] {
        SyntheticSpec spec;
        spec.corpus_size = 2000;
        spec.slot_fill_bias = 0.9;
        spec.seed = 1234;
        return generate_synthetic_corpus(spec);
      }()),
      vocab(build_vocabulary(corpus.pairs, 200)),
      lexicon(build_lexicon(corpus.pairs, vocab, corpus.styles)),
      classifier([&] {
        std::vector<std::pair<std::vector<int>, int>> data;
        for (const auto& p : corpus.pairs)
          data.emplace_back(vocab.encode(p.response), p.style);
        ClassifierConfig cfg;
        cfg.seed = 77;
        // Trained long enough that stacking extra stylistic tokens keeps
        // raising the score: that gradient is what the unconstrained
        // baseline exploits, while references still score well apart.
        cfg.epochs = 800;
        cfg.learning_rate = 0.8;
        return classifier_train(data, corpus.styles.size(), vocab.size(),
                                vocab.hash(), cfg);
      }()),
      pretrained(
          [&] {
            ModelConfig cfg;
            cfg.vocab_size = vocab.size();
            return cfg;
          }(),
          vocab.hash(), 2718),
      ig_rl(pretrained),
      unconstrained(pretrained) {
  const auto t0 = Clock::now();
  TrainingConfig tc;
  tc.seed = 271828;
  tc.learning_rate = 0.01;  // the small corpus needs a hotter MLE phase
  tc.batch_size = 16;
  pretrain(pretrained, corpus.pairs, vocab, tc);
  ig_rl = pretrained;
  unconstrained = pretrained;
  setup_seconds = seconds_since(t0);

  BigramTable bigrams = build_bigram_table(corpus.pairs, vocab);
  // Both RL phases train the style-0 generator on its own style's pairs.
  tc.restrict_to_target_style = true;
  tc.rl_epochs = 20;

  const auto t1 = Clock::now();
  tc.mode = TrainingMode::kIgRl;
  tc.seed = 314159;
  tc.learning_rate = 0.003;  // gentle RL phase preserves the neutral skeleton
  train_rl(ig_rl, corpus.pairs, vocab, lexicon, classifier, bigrams, tc);
  ig_rl_seconds = seconds_since(t1);

  // Vanilla-RL baseline: no smoothing anchor and a reward term strong enough
  // to dominate the MLE anchor, which is what lets it hack the classifier.
  const auto t2 = Clock::now();
  tc.mode = TrainingMode::kUnconstrainedRl;
  tc.seed = 314159;
  tc.learning_rate = 0.01;
  tc.alpha = 0.0;
  tc.beta = 40.0;
  train_rl(unconstrained, corpus.pairs, vocab, lexicon, classifier, bigrams, tc);
  unconstrained_seconds = seconds_since(t2);
}

DeskExperiment* DeskExperiment::instance() {
  static DeskExperiment* self = new DeskExperiment();
  return self;
}

GenEval DeskExperiment::evaluate(Seq2SeqModel& model, int target_style) {
  const std::size_t n_eval = 400;
  std::mt19937_64 rng(8888);
  GenEval ev;
  std::vector<std::vector<Token>> surfaces;
  std::vector<DialoguePair> subset;
  long neutral = 0, matches = 0;
  std::map<std::vector<int>, long> suffix_counts[3];  // n = 2, 3, 4
  for (std::size_t i = 0; i < std::min(n_eval, corpus.pairs.size()); ++i) {
    const DialoguePair& p = corpus.pairs[i];
    subset.push_back(p);
    // Report-time decoding uses a small k; wide-k sampling noise would
    // otherwise swamp the skeleton-retention comparison between models.
    std::vector<int> gen = model.top_k_sample_decode(
        vocab.encode(p.query), 5, model.config().max_decode_len, rng);
    std::vector<int> content;
    std::vector<Token> toks;
    for (int id : gen) {
      toks.push_back(vocab.token(id));
      if (id >= Vocabulary::kNumReserved) content.push_back(id);
    }
    surfaces.push_back(toks);
    ev.mean_reward +=
        content.empty() ? 0.0 : classifier.score(content)[target_style];
    const std::vector<int> ref = vocab.encode(p.response);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (lexicon.is_stylistic(ref[j], p.style)) continue;
      ++neutral;
      if (j < gen.size() && gen[j] == ref[j]) ++matches;
    }
    for (int n = 2; n <= 4; ++n)
      if (int(gen.size()) >= n)
        ++suffix_counts[n - 2][std::vector<int>(gen.end() - n, gen.end())];
  }
  const double count = double(subset.size());
  ev.mean_reward /= count;
  ev.retention = neutral == 0 ? 0.0 : double(matches) / double(neutral);
  ev.perplexity = perplexity(model, subset, vocab);
  ev.distinct2 = distinct_n(surfaces, 2);
  for (int n = 2; n <= 4; ++n)
    for (const auto& [gram, c] : suffix_counts[n - 2])
      if (double(c) / count > ev.top_suffix_frac) {
        ev.top_suffix_frac = double(c) / count;
        std::string s;
        for (int id : gram) s += (s.empty() ? "" : " ") + vocab.token(id);
        ev.top_suffix = s;
      }
  return ev;
}

bool criterion_style_uplift(std::string& detail) {
  DeskExperiment* ex = DeskExperiment::instance();
  GenEval pre = ex->evaluate(ex->pretrained, 0);
  GenEval ig = ex->evaluate(ex->ig_rl, 0);
  const double uplift = ig.mean_reward - pre.mean_reward;
  const double retention_drop = pre.retention - ig.retention;
  const double ppl_growth = ig.perplexity / pre.perplexity - 1.0;
  const double secs = ex->setup_seconds + ex->ig_rl_seconds;
  std::ostringstream out;
  out << "reward " << pre.mean_reward << " -> " << ig.mean_reward << " (uplift "
      << uplift << "), retention " << pre.retention << " -> " << ig.retention
      << ", perplexity " << pre.perplexity << " -> " << ig.perplexity << " ("
      << 100.0 * ppl_growth << "% growth), train " << secs << " s";
  detail = out.str();
  return uplift >= 0.15 && std::abs(retention_drop) <= 0.05 &&
         ppl_growth <= 0.15 && secs <= 900.0;
}

bool criterion_diversity_ordering(std::string& detail) {
  DeskExperiment* ex = DeskExperiment::instance();
  GenEval ig = ex->evaluate(ex->ig_rl, 0);
  GenEval un = ex->evaluate(ex->unconstrained, 0);
  std::ostringstream out;
  out << "distinct-2 ig-rl " << ig.distinct2 << " vs unconstrained " << un.distinct2
      << "; top suffix n-gram: unconstrained \"" << un.top_suffix << "\" at "
      << un.top_suffix_frac << ", ig-rl \"" << ig.top_suffix << "\" at "
      << ig.top_suffix_frac;
  detail = out.str();
  return ig.distinct2 > un.distinct2 && un.top_suffix_frac > 0.25 &&
         ig.top_suffix_frac <= 0.25;
}

// ---------------------------------------------------------------------------
// C8: metric hand values.
// ---------------------------------------------------------------------------

bool criterion_metric_hand_values(std::string& detail) {
  auto tok_all = [](const std::vector<std::string>& lines) {
    std::vector<std::vector<Token>> out;
    for (const auto& s : lines) out.push_back(tokenize(s));
    return out;
  };
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  int failed = 0;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) {
      ++failed;
      std::fprintf(stderr, "  metric hand value failed: %s\n", what);
    }
  };

  expect(close(distinct_n(tok_all({"a b", "a b"}), 1), 0.5), "distinct-1 repeat");
  expect(close(distinct_n(tok_all({"a b", "c d"}), 2), 1.0), "distinct-2 unique");
  expect(close(distinct_n(tok_all({"a b c", "b c d"}), 2), 0.75), "distinct-2 3/4");

  std::vector<DialoguePair> corpus;
  for (int i = 0; i < 8; ++i) {
    corpus.push_back(make_pair("q", "n s0 n", 0));
    corpus.push_back(make_pair("q", "n s1 n", 1));
  }
  StyleSet styles{{"style0", "style1"}};
  Vocabulary vocab = build_vocabulary(corpus, 100);
  StyleLexicon lex = build_lexicon(corpus, vocab, styles);
  std::vector<std::pair<std::vector<int>, int>> data;
  for (const auto& p : corpus) data.emplace_back(vocab.encode(p.response), p.style);
  ClassifierConfig ccfg;
  ccfg.epochs = 200;
  StyleClassifier clf = classifier_train(data, 2, vocab.size(), vocab.hash(), ccfg);
  auto ids = [&](const std::string& s) { return vocab.encode(tokenize(s)); };

  ConflictMatrix cm = ConflictMatrix::none(styles);
  cm.conflicted[0][1] = cm.conflicted[1][0] = 1;
  std::vector<std::vector<int>> responses;
  for (int i = 0; i < 7; ++i) responses.push_back(ids("n s0 n"));
  for (int i = 0; i < 3; ++i) responses.push_back(ids("n s1 n"));
  expect(close(a_sar(responses, 0, clf, cm), 0.7), "a-sar 7/10");

  std::vector<std::vector<int>> refs{ids("n s0 n"), ids("n n s0")};
  expect(close(skeleton_retention(refs, refs, 0, lex), 1.0), "retention identity");
  std::vector<std::vector<int>> gen{ids("s1 s0 n"), ids("n n s1")};
  expect(close(skeleton_retention(gen, refs, 0, lex), 0.75), "retention 3/4");

  ModelConfig mcfg;
  mcfg.embedding_dim = 6;
  mcfg.hidden_dim = 8;
  mcfg.vocab_size = vocab.size();
  Seq2SeqModel uniform(mcfg, vocab.hash(), 1);
  for (Param* p : uniform.parameters()) p->value.setZero();
  expect(close(perplexity(uniform, corpus, vocab), double(vocab.size())),
         "perplexity uniform = |V|");

  detail = failed == 0 ? "all hand values match"
                       : std::to_string(failed) + " hand value(s) failed";
  return failed == 0;
}

// ---------------------------------------------------------------------------
// C9: pipeline determinism.
// ---------------------------------------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

bool criterion_determinism(std::string& detail) {
  auto mini = [](const std::string& dir) {
    ExperimentManifest m = default_desk_manifest();
    m.out_dir = dir;
    m.seed = 6;
    m.synthetic.corpus_size = 200;
    m.model.embedding_dim = 12;
    m.model.hidden_dim = 16;
    m.training.pretrain_epochs = 2;
    m.training.rl_epochs = 2;
    m.training.batch_size = 32;
    m.eval_pairs = 40;
    m.hash = manifest_hash(m);
    return m;
  };
  const std::string dir_a = (fs::temp_directory_path() / "igrl_accept_det_a").string();
  const std::string dir_b = (fs::temp_directory_path() / "igrl_accept_det_b").string();
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  ExperimentManifest a = mini(dir_a);
  ExperimentManifest b = mini(dir_b);
  b.hash = a.hash;  // out_dir aside, the manifests are identical
  const std::string queries = (fs::temp_directory_path() / "igrl_accept_q.txt").string();
  {
    std::ofstream out(queries);
    out << "about\ntopic1\ntopic2\ntopic3\n";
  }
  for (const ExperimentManifest* m : {&a, &b}) {
    cmd_synth(*m);
    cmd_build_lexicon(*m);
    cmd_train_classifier(*m);
    cmd_pretrain(*m);
    cmd_train(*m, TrainingMode::kIgRl);
    cmd_generate(*m, queries, m->out_dir + "/resp.txt", TrainingMode::kIgRl);
  }
  const bool logs_equal = slurp(a.loss_log_path(TrainingMode::kIgRl)) ==
                          slurp(b.loss_log_path(TrainingMode::kIgRl));
  const bool resp_equal = slurp(dir_a + "/resp.txt") == slurp(dir_b + "/resp.txt");
  const bool resp_nonempty = !slurp(dir_a + "/resp.txt").empty();
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove(queries);
  std::ostringstream out;
  out << "loss logs " << (logs_equal ? "identical" : "DIFFER") << ", responses "
      << (resp_equal ? "identical" : "DIFFER");
  detail = out.str();
  return logs_equal && resp_equal && resp_nonempty;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"C1 pmi oracle equivalence", criterion_pmi_oracle},
      {"C2 lexicon recovery", criterion_lexicon_recovery},
      {"C3 constrained-sampling invariant", criterion_sampling_invariant},
      {"C4 hybrid-loss gradient correctness", criterion_gradient},
      {"C5 reinforce unbiasedness", criterion_reinforce_unbiased},
      {"C6 end-to-end style uplift", criterion_style_uplift},
      {"C7 diversity ordering and reward hacking", criterion_diversity_ordering},
      {"C8 metric hand values", criterion_metric_hand_values},
      {"C9 pipeline determinism", criterion_determinism},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    std::string det;
    bool pass = false;
    try {
      pass = c.body(det);
    } catch (const std::exception& e) {
      det = std::string("exception: ") + e.what();
    }
    if (!pass) ++failures;
    std::printf("[%s] %s — %s\n", pass ? "PASS" : "FAIL", c.name.c_str(),
                det.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", int(criteria.size()) - failures,
              int(criteria.size()));
  return failures;
}
