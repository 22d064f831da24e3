#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace igrl {

using Token = std::string;

// FNV-1a, used for vocabulary and manifest fingerprints.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 14695981039346656037ULL);

/// Ordered set of style names; position defines the id.
struct StyleSet {
  std::vector<std::string> names;

  int size() const { return static_cast<int>(names.size()); }
  int id_of(const std::string& name) const;       // throws on unknown style
  const std::string& name_of(int id) const;
};

struct DialoguePair {
  std::vector<Token> query;
  std::vector<Token> response;   // surface tokens, no reserved tokens
  int style = 0;                 // id into the StyleSet
};

/// Whitespace tokenization; never emits empty tokens.
std::vector<Token> tokenize(std::string_view text);
std::string detokenize(const std::vector<Token>& tokens);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumReserved = 4;

  Vocabulary();

  int size() const { return static_cast<int>(tokens_.size()); }
  int encode(const Token& t) const;               // OOV maps to kUnk
  std::vector<int> encode(const std::vector<Token>& ts) const;
  const Token& token(int id) const;
  bool is_reserved(int id) const { return id < kNumReserved; }
  bool contains(const Token& t) const { return index_.count(t) > 0; }
  std::uint64_t hash() const;

  void add(const Token& t);                       // no-op if present

 private:
  std::vector<Token> tokens_;
  std::unordered_map<Token, int> index_;
};

/// Encoded response with the implicit terminal <eos> appended.
std::vector<int> encode_with_eos(const Vocabulary& vocab,
                                 const std::vector<Token>& response);

/// Most-frequent tokens retained (queries and responses share one
/// vocabulary); ties broken lexicographically. max_size includes the
/// reserved tokens.
Vocabulary build_vocabulary(const std::vector<DialoguePair>& corpus, int max_size);

/// Adjacent-pair counts over encoded responses, including the pair ending
/// at <eos>; never across pair boundaries.
class BigramTable {
 public:
  explicit BigramTable(int vocab_size);

  void add(int u, int v);
  long count(int u, int v) const;
  long row_total(int u) const { return row_totals_[u]; }
  int vocab_size() const { return static_cast<int>(row_totals_.size()); }

  /// f(u, .) as a dense distribution; zero vector when row_total(u) == 0.
  std::vector<double> row_distribution(int u) const;

 private:
  std::vector<std::map<int, long>> counts_;
  std::vector<long> row_totals_;
};

BigramTable build_bigram_table(const std::vector<DialoguePair>& corpus,
                               const Vocabulary& vocab);

/// JSONL, one {"query", "response", "style"} object per line.
std::vector<DialoguePair> load_corpus(const std::string& path, const StyleSet& styles);
void save_corpus(const std::vector<DialoguePair>& pairs, const StyleSet& styles,
                 const std::string& path);

struct SyntheticSpec {
  int n_styles = 2;
  int n_neutral_tokens = 20;
  int n_stylistic_tokens_per_style = 5;
  // "<slot>" marks a fill position; empty -> deterministic defaults.
  std::vector<std::vector<Token>> skeleton_templates;
  double slot_fill_bias = 0.9;   // must be > 0.5
  int corpus_size = 2000;
  std::uint64_t seed = 1;
};

struct SyntheticCorpus {
  std::vector<DialoguePair> pairs;
  StyleSet styles;
  std::map<std::string, std::set<Token>> planted;  // style name -> stylistic tokens
  std::vector<std::vector<Token>> templates;       // templates actually used
};

/// Pure function of the spec (seed included); each response is a skeleton
/// template whose slots are filled by style-biased draws.
SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

/// Ground-truth TSV: token <TAB> style_name, one planted token per row.
void save_ground_truth(const SyntheticCorpus& corpus, const std::string& path);
std::map<std::string, std::set<Token>> load_ground_truth(const std::string& path);

}  // namespace igrl
