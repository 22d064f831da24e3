#pragma once

#include <string>
#include <vector>

#include "igrl/corpus.hpp"

namespace igrl {

/// Token-occurrence counts over response tokens (queries excluded).
struct CountStats {
  // [token_id][style_id]
  std::vector<std::vector<long>> token_style_count;
  std::vector<long> token_count;       // per token, summed over styles
  std::vector<long> style_token_mass;  // per style, summed over tokens
  long total_tokens = 0;
};

CountStats count_statistics(const std::vector<DialoguePair>& corpus,
                            const Vocabulary& vocab, int n_styles);

/// PMI floor assigned to zero-count (token, style) pairs.
constexpr double kPmiFloor = -20.0;

/// PMI(x;s) = ln( p(x,s) / (p(x) p(s)) ) in nats, from raw occurrence
/// counts; zero-count pairs get kPmiFloor.
double pmi(int token_id, int style_id, const CountStats& stats);

struct StyleLexicon {
  StyleSet styles;
  // [token_id][style_id]; reserved tokens pinned to kPmiFloor / false.
  std::vector<std::vector<double>> pmi;
  std::vector<double> threshold;  // t_s = 0.75 * max content-token PMI
  std::vector<std::vector<char>> stylistic;

  bool is_stylistic(int token_id, int style_id) const;
};

StyleLexicon build_lexicon(const std::vector<DialoguePair>& corpus,
                           const Vocabulary& vocab, const StyleSet& styles);

/// TSV columns: token, style_name, pmi (9 dp), is_stylistic (0/1); header
/// row required. Thresholds go to a sidecar JSON {style_name: t_s}.
void save_lexicon(const StyleLexicon& lex, const Vocabulary& vocab,
                  const std::string& tsv_path, const std::string& thresholds_path);
StyleLexicon load_lexicon(const Vocabulary& vocab, const std::string& tsv_path,
                          const std::string& thresholds_path);

}  // namespace igrl
