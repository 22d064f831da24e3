#pragma once

#include <string>
#include <vector>

#include "igrl/classifier.hpp"
#include "igrl/corpus.hpp"
#include "igrl/lexicon.hpp"
#include "igrl/model.hpp"

namespace igrl {

/// Which predicted styles are unacceptable for a desired style. Symmetric
/// pairs; a style never conflicts with itself; the designated neutral
/// style conflicts with nothing.
struct ConflictMatrix {
  StyleSet styles;
  std::vector<std::vector<char>> conflicted;  // [predicted][desired]
  int neutral_style = -1;

  static ConflictMatrix none(const StyleSet& styles);
  bool is_conflicted(int predicted, int desired) const;
};

ConflictMatrix load_conflict_matrix(const std::string& path, const StyleSet& styles);
void save_conflict_matrix(const ConflictMatrix& m, const std::string& path);

/// Corpus-level distinct n-gram ratio: |distinct n-grams| / |n-grams|.
double distinct_n(const std::vector<std::vector<Token>>& responses, int n);

/// Fraction of responses whose classifier-argmax style does not conflict
/// with the desired style; empty responses count as unacceptable.
double a_sar(const std::vector<std::vector<int>>& response_ids, int desired_style,
             const StyleClassifier& classifier, const ConflictMatrix& conflicts);

/// Over neutral reference positions (PMI below threshold for style s), the
/// fraction where the generated token matches; positions past the end of a
/// shorter generation count as misses.
double skeleton_retention(const std::vector<std::vector<int>>& generated,
                          const std::vector<std::vector<int>>& references, int style,
                          const StyleLexicon& lexicon);

/// exp(total MLE loss / total token count), <eos> included in both.
double perplexity(Seq2SeqModel& model, const std::vector<DialoguePair>& corpus,
                  const Vocabulary& vocab);

struct EvalRow {
  std::string style;  // style name or "overall"
  double distinct_1 = 0.0;
  double distinct_2 = 0.0;
  double a_sar = 0.0;
  double skeleton_retention = 0.0;
  double perplexity = 0.0;
  long sample_count = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // per-style rows then "overall"
  std::string config_digest;
};

/// CSV (style, metric, value; ratios at 4 dp) plus a human-readable table
/// alongside it at <path>.txt.
void emit_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

}  // namespace igrl
