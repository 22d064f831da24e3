#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "igrl/corpus.hpp"
#include "igrl/lexicon.hpp"

using namespace igrl;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

DialoguePair make_pair(const std::string& q, const std::string& r, int style) {
  return DialoguePair{tokenize(q), tokenize(r), style};
}

// Independent of CountStats: recounts the corpus with string keys.
double brute_force_pmi(const std::vector<DialoguePair>& corpus, const Token& x,
                       int style) {
  std::map<std::pair<Token, int>, long> joint;
  std::map<Token, long> tok;
  std::map<int, long> mass;
  long total = 0;
  for (const auto& p : corpus)
    for (const auto& t : p.response) {
      ++joint[{t, p.style}];
      ++tok[t];
      ++mass[p.style];
      ++total;
    }
  if (joint[{x, style}] == 0) return kPmiFloor;
  const double pxs = double(joint[{x, style}]) / total;
  const double px = double(tok[x]) / total;
  const double ps = double(mass[style]) / total;
  return std::log(pxs / (px * ps));
}

}  // namespace

TEST_CASE("count statistics under the occurrence convention") {
  std::vector<DialoguePair> corpus{make_pair("q", "a b b", 0), make_pair("q", "a c", 1)};
  Vocabulary v = build_vocabulary(corpus, 100);
  CountStats stats = count_statistics(corpus, v, 2);
  CHECK(stats.total_tokens == 5);
  CHECK(stats.style_token_mass[0] == 3);  // p(A) = 3/5
  CHECK(stats.token_count[v.encode("b")] == 2);
  CHECK(stats.token_style_count[v.encode("b")][0] == 2);
  // invariants
  for (int x = 0; x < v.size(); ++x) {
    long sum = 0;
    for (int s = 0; s < 2; ++s) sum += stats.token_style_count[x][s];
    CHECK(stats.token_count[x] == sum);
  }
  long mass_sum = 0;
  for (int s = 0; s < 2; ++s) mass_sum += stats.style_token_mass[s];
  CHECK(mass_sum == stats.total_tokens);
}

TEST_CASE("single-style corpus has p(s) = 1") {
  std::vector<DialoguePair> corpus{make_pair("q", "a b", 0)};
  Vocabulary v = build_vocabulary(corpus, 100);
  CountStats stats = count_statistics(corpus, v, 1);
  CHECK(stats.style_token_mass[0] == stats.total_tokens);
}

TEST_CASE("token absent from responses has zero count") {
  std::vector<DialoguePair> corpus{make_pair("only-in-query", "a", 0)};
  Vocabulary v = build_vocabulary(corpus, 100);
  CountStats stats = count_statistics(corpus, v, 1);
  CHECK(stats.token_count[v.encode("only-in-query")] == 0);
}

TEST_CASE("pmi hand example: ln(5/3)") {
  std::vector<DialoguePair> corpus{make_pair("q", "a b b", 0), make_pair("q", "a c", 1)};
  Vocabulary v = build_vocabulary(corpus, 100);
  CountStats stats = count_statistics(corpus, v, 2);
  CHECK(pmi(v.encode("b"), 0, stats) == doctest::Approx(std::log(5.0 / 3.0)).epsilon(1e-12));
  // a appears at exactly the corpus-average rate in neither style here, but
  // a token balanced across styles does: "a" has 1 of 3 in style A vs 2/5 overall
  CHECK(pmi(v.encode("b"), 0, stats) ==
        doctest::Approx(brute_force_pmi(corpus, "b", 0)).epsilon(1e-12));
}

TEST_CASE("pmi is zero at independence") {
  // style A: "a a b", style B: "a" -> p(a,A)=2/4, p(a)=3/4, p(A)=3/4 -> not 0
  // balanced construction: two styles, token appears proportionally to mass
  std::vector<DialoguePair> corpus{make_pair("q", "a b", 0), make_pair("q", "a c", 1)};
  Vocabulary v = build_vocabulary(corpus, 100);
  CountStats stats = count_statistics(corpus, v, 2);
  // p(a,A)=1/4, p(a)=2/4, p(A)=2/4 -> PMI = 0
  CHECK(pmi(v.encode("a"), 0, stats) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("style-exclusive token in a balanced corpus: pmi = ln(1/p(s))") {
  std::vector<DialoguePair> corpus{make_pair("q", "x y", 0), make_pair("q", "z w", 1)};
  Vocabulary v = build_vocabulary(corpus, 100);
  CountStats stats = count_statistics(corpus, v, 2);
  CHECK(pmi(v.encode("x"), 0, stats) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("zero-count pair gets the floor, never a numeric fault") {
  std::vector<DialoguePair> corpus{make_pair("q", "x", 0), make_pair("q", "y", 1)};
  Vocabulary v = build_vocabulary(corpus, 100);
  CountStats stats = count_statistics(corpus, v, 2);
  CHECK(pmi(v.encode("x"), 1, stats) == kPmiFloor);
  CHECK(pmi(v.encode("q"), 0, stats) == kPmiFloor);  // query-only token
}

TEST_CASE("pmi matches the brute-force oracle on random corpora") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int n_styles = 2 + static_cast<int>(rng() % 2);
    std::vector<DialoguePair> corpus;
    const int n_pairs = 2 + static_cast<int>(rng() % 48);
    for (int i = 0; i < n_pairs; ++i) {
      std::string resp;
      const int len = 1 + static_cast<int>(rng() % 6);
      for (int j = 0; j < len; ++j) resp += "t" + std::to_string(rng() % 30) + " ";
      corpus.push_back(make_pair("q", resp, i < n_styles ? i : int(rng() % n_styles)));
    }
    StyleSet styles;
    for (int s = 0; s < n_styles; ++s) styles.names.push_back("s" + std::to_string(s));
    Vocabulary v = build_vocabulary(corpus, 200);
    CountStats stats = count_statistics(corpus, v, n_styles);
    for (int x = Vocabulary::kNumReserved; x < v.size(); ++x)
      for (int s = 0; s < n_styles; ++s)
        CHECK(pmi(x, s, stats) ==
              doctest::Approx(brute_force_pmi(corpus, v.token(x), s)).epsilon(1e-11));
  }
}

TEST_CASE("pmi is invariant to corpus duplication") {
  std::vector<DialoguePair> corpus{make_pair("q", "a b b", 0), make_pair("q", "a c", 1)};
  std::vector<DialoguePair> dup;
  for (int k = 0; k < 5; ++k)
    for (const auto& p : corpus) dup.push_back(p);
  Vocabulary v = build_vocabulary(corpus, 100);
  CountStats s1 = count_statistics(corpus, v, 2);
  CountStats s2 = count_statistics(dup, v, 2);
  for (int x = Vocabulary::kNumReserved; x < v.size(); ++x)
    for (int s = 0; s < 2; ++s)
      CHECK(pmi(x, s, s1) == doctest::Approx(pmi(x, s, s2)).epsilon(1e-12));
}

TEST_CASE("thresholds are 0.75 x max and flags follow the >= rule") {
  SyntheticSpec spec;
  spec.corpus_size = 500;
  spec.seed = 9;
  SyntheticCorpus c = generate_synthetic_corpus(spec);
  Vocabulary v = build_vocabulary(c.pairs, 200);
  StyleLexicon lex = build_lexicon(c.pairs, v, c.styles);
  for (int s = 0; s < c.styles.size(); ++s) {
    double max_pmi = kPmiFloor;
    for (int x = Vocabulary::kNumReserved; x < v.size(); ++x)
      max_pmi = std::max(max_pmi, lex.pmi[x][s]);
    CHECK(lex.threshold[s] == doctest::Approx(0.75 * max_pmi).epsilon(1e-12));
    for (int x = Vocabulary::kNumReserved; x < v.size(); ++x)
      CHECK(lex.is_stylistic(x, s) == (lex.pmi[x][s] >= lex.threshold[s]));
  }
}

TEST_CASE("bias 1.0: exactly the planted tokens are stylistic") {
  SyntheticSpec spec;
  spec.slot_fill_bias = 1.0;
  spec.corpus_size = 1000;
  spec.seed = 13;
  SyntheticCorpus c = generate_synthetic_corpus(spec);
  Vocabulary v = build_vocabulary(c.pairs, 200);
  StyleLexicon lex = build_lexicon(c.pairs, v, c.styles);
  for (int s = 0; s < c.styles.size(); ++s) {
    const auto& truth = c.planted.at(c.styles.name_of(s));
    for (int x = Vocabulary::kNumReserved; x < v.size(); ++x) {
      const bool planted = truth.count(v.token(x)) > 0;
      const bool seen = lex.pmi[x][s] > kPmiFloor || !planted;
      if (planted && lex.pmi[x][s] == kPmiFloor) continue;  // never drawn (tiny pools)
      CHECK(lex.is_stylistic(x, s) == planted);
      (void)seen;
    }
  }
}

TEST_CASE("uniformly distributed tokens give near-zero thresholds") {
  // every response identical across styles: no style signal at all
  std::vector<DialoguePair> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(make_pair("q", "a b c", i % 2));
  StyleSet styles{{"s0", "s1"}};
  Vocabulary v = build_vocabulary(corpus, 100);
  StyleLexicon lex = build_lexicon(corpus, v, styles);
  for (int s = 0; s < 2; ++s) {
    CHECK(std::abs(lex.threshold[s]) < 1e-9);
    for (const char* t : {"a", "b", "c"})
      CHECK(std::abs(lex.pmi[v.encode(t)][s]) < 1e-9);
  }
}

TEST_CASE("reserved tokens are never stylistic") {
  SyntheticSpec spec;
  spec.corpus_size = 100;
  SyntheticCorpus c = generate_synthetic_corpus(spec);
  Vocabulary v = build_vocabulary(c.pairs, 200);
  StyleLexicon lex = build_lexicon(c.pairs, v, c.styles);
  for (int id = 0; id < Vocabulary::kNumReserved; ++id)
    for (int s = 0; s < c.styles.size(); ++s) CHECK_FALSE(lex.is_stylistic(id, s));
}

TEST_CASE("a style with zero responses is an error naming the style") {
  std::vector<DialoguePair> corpus{make_pair("q", "a", 0)};
  StyleSet styles{{"present", "absent"}};
  Vocabulary v = build_vocabulary(corpus, 100);
  CHECK_THROWS_WITH(build_lexicon(corpus, v, styles), "style has no responses: absent");
}

TEST_CASE("lexicon TSV round trip preserves flags and thresholds") {
  SyntheticSpec spec;
  spec.corpus_size = 300;
  spec.seed = 21;
  SyntheticCorpus c = generate_synthetic_corpus(spec);
  Vocabulary v = build_vocabulary(c.pairs, 200);
  StyleLexicon lex = build_lexicon(c.pairs, v, c.styles);
  const std::string tsv = temp_path("igrl_lex.tsv");
  const std::string thr = temp_path("igrl_thr.json");
  save_lexicon(lex, v, tsv, thr);

  // row count = content tokens x styles (+ header)
  std::ifstream in(tsv);
  std::string line;
  long rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1 + (v.size() - Vocabulary::kNumReserved) * c.styles.size());

  StyleLexicon loaded = load_lexicon(v, tsv, thr);
  for (int s = 0; s < c.styles.size(); ++s) {
    CHECK(loaded.threshold[s] == doctest::Approx(lex.threshold[s]).epsilon(1e-12));
    // thresholds recomputed from loaded PMI match stored thresholds
    double max_pmi = kPmiFloor;
    for (int x = Vocabulary::kNumReserved; x < v.size(); ++x) {
      CHECK(loaded.is_stylistic(x, s) == lex.is_stylistic(x, s));
      CHECK(loaded.pmi[x][s] == doctest::Approx(lex.pmi[x][s]).epsilon(1e-8));
      max_pmi = std::max(max_pmi, loaded.pmi[x][s]);
    }
    CHECK(std::abs(0.75 * max_pmi - loaded.threshold[s]) < 1e-8);
  }
  std::remove(tsv.c_str());
  std::remove(thr.c_str());
}

TEST_CASE("malformed lexicon rows report the row number") {
  StyleSet styles{{"s0"}};
  const std::string tsv = temp_path("igrl_lex_bad.tsv");
  const std::string thr = temp_path("igrl_thr_bad.json");
  {
    std::ofstream t(thr);
    t << R"({"s0": 0.5})";
    std::ofstream out(tsv);
    out << "token\tstyle_name\tpmi\tis_stylistic\n";
    out << "a\ts0\n";  // short row
  }
  std::vector<DialoguePair> corpus{DialoguePair{{"q"}, {"a"}, 0}};
  Vocabulary v = build_vocabulary(corpus, 100);
  CHECK_THROWS_WITH(load_lexicon(v, tsv, thr),
                    "lexicon row 2: expected 4 tab-separated columns");
  std::remove(tsv.c_str());
  std::remove(thr.c_str());
}
