#include "igrl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace igrl {

using nlohmann::json;

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

int StyleSet::id_of(const std::string& name) const {
  for (int i = 0; i < size(); ++i)
    if (names[i] == name) return i;
  throw std::runtime_error("unknown style name: " + name);
}

const std::string& StyleSet::name_of(int id) const {
  if (id < 0 || id >= size()) throw std::runtime_error("style id out of range");
  return names[id];
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string detokenize(const std::vector<Token>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<sos>", "<eos>", "<unk>"}) add(t);
}

void Vocabulary::add(const Token& t) {
  if (index_.count(t)) return;
  index_[t] = static_cast<int>(tokens_.size());
  tokens_.push_back(t);
}

int Vocabulary::encode(const Token& t) const {
  auto it = index_.find(t);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<Token>& ts) const {
  std::vector<int> out;
  out.reserve(ts.size());
  for (const auto& t : ts) out.push_back(encode(t));
  return out;
}

const Token& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::runtime_error("token id out of range");
  return tokens_[id];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a("\n", h);
  }
  return h;
}

std::vector<int> encode_with_eos(const Vocabulary& vocab,
                                 const std::vector<Token>& response) {
  std::vector<int> ids = vocab.encode(response);
  ids.push_back(Vocabulary::kEos);
  return ids;
}

Vocabulary build_vocabulary(const std::vector<DialoguePair>& corpus, int max_size) {
  if (corpus.empty()) throw std::runtime_error("empty corpus");
  if (max_size <= Vocabulary::kNumReserved)
    throw std::runtime_error("max_size must exceed the reserved-token budget");

  std::map<Token, long> freq;
  for (const auto& p : corpus) {
    for (const auto& t : p.query) ++freq[t];
    for (const auto& t : p.response) ++freq[t];
  }
  std::vector<std::pair<Token, long>> by_freq(freq.begin(), freq.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  for (const auto& [tok, n] : by_freq) {
    if (v.size() >= max_size) break;
    v.add(tok);
  }
  return v;
}

BigramTable::BigramTable(int vocab_size)
    : counts_(vocab_size), row_totals_(vocab_size, 0) {}

void BigramTable::add(int u, int v) {
  ++counts_[u][v];
  ++row_totals_[u];
}

long BigramTable::count(int u, int v) const {
  auto it = counts_[u].find(v);
  return it == counts_[u].end() ? 0 : it->second;
}

std::vector<double> BigramTable::row_distribution(int u) const {
  std::vector<double> f(row_totals_.size(), 0.0);
  if (row_totals_[u] == 0) return f;
  const double total = static_cast<double>(row_totals_[u]);
  for (const auto& [v, n] : counts_[u]) f[v] = static_cast<double>(n) / total;
  return f;
}

BigramTable build_bigram_table(const std::vector<DialoguePair>& corpus,
                               const Vocabulary& vocab) {
  BigramTable table(vocab.size());
  for (const auto& p : corpus) {
    std::vector<int> ids = vocab.encode(p.response);
    ids.push_back(Vocabulary::kEos);
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) table.add(ids[i], ids[i + 1]);
  }
  return table;
}

std::vector<DialoguePair> load_corpus(const std::string& path, const StyleSet& styles) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<DialoguePair> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": malformed JSON: " + e.what());
    }
    for (const char* field : {"query", "response", "style"})
      if (!obj.contains(field))
        throw std::runtime_error("line " + std::to_string(lineno) +
                                 ": missing field \"" + field + "\"");
    DialoguePair p;
    p.query = tokenize(obj["query"].get<std::string>());
    p.response = tokenize(obj["response"].get<std::string>());
    const std::string style_name = obj["style"].get<std::string>();
    try {
      p.style = styles.id_of(style_name);
    } catch (const std::exception&) {
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": unknown style name: " + style_name);
    }
    if (p.query.empty() || p.response.empty())
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": query and response must be non-empty");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_corpus(const std::vector<DialoguePair>& pairs, const StyleSet& styles,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& p : pairs) {
    json obj;
    obj["query"] = detokenize(p.query);
    obj["response"] = detokenize(p.response);
    obj["style"] = styles.name_of(p.style);
    out << obj.dump() << "\n";
  }
}

namespace {

std::vector<std::vector<Token>> default_templates(int n_templates,
                                                  const std::vector<Token>& neutral) {
  const int P = static_cast<int>(neutral.size());
  std::vector<std::vector<Token>> templates;
  for (int k = 0; k < n_templates; ++k) {
    std::vector<Token> t;
    t.push_back(neutral[(4 * k) % P]);
    t.push_back("<slot>");
    t.push_back(neutral[(4 * k + 1) % P]);
    if (k % 2 == 1) {
      t.push_back("<slot>");
      t.push_back(neutral[(4 * k + 3) % P]);
    }
    t.push_back(neutral[(4 * k + 2) % P]);
    templates.push_back(std::move(t));
  }
  return templates;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.corpus_size <= 0) throw std::runtime_error("corpus_size must be positive");
  if (spec.n_styles < 1) throw std::runtime_error("n_styles must be >= 1");
  if (!(spec.slot_fill_bias > 0.5) || spec.slot_fill_bias > 1.0)
    throw std::runtime_error("slot_fill_bias must be in (0.5, 1.0]");
  if (spec.n_neutral_tokens < 4 || spec.n_stylistic_tokens_per_style < 1)
    throw std::runtime_error("token pools too small");

  SyntheticCorpus out;
  for (int s = 0; s < spec.n_styles; ++s)
    out.styles.names.push_back("style" + std::to_string(s));

  std::vector<Token> neutral;
  for (int i = 0; i < spec.n_neutral_tokens; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "n%02d", i);
    neutral.emplace_back(buf);
  }
  std::vector<std::vector<Token>> stylistic(spec.n_styles);
  for (int s = 0; s < spec.n_styles; ++s) {
    for (int i = 0; i < spec.n_stylistic_tokens_per_style; ++i) {
      Token t = "s" + std::to_string(s) + "_" + std::to_string(i);
      stylistic[s].push_back(t);
      out.planted[out.styles.name_of(s)].insert(t);
    }
  }

  out.templates = spec.skeleton_templates.empty()
                      ? default_templates(8, neutral)
                      : spec.skeleton_templates;
  const int n_templates = static_cast<int>(out.templates.size());

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int i = 0; i < spec.corpus_size; ++i) {
    const int t = static_cast<int>(rng() % n_templates);
    const int style = static_cast<int>(rng() % spec.n_styles);
    DialoguePair p;
    p.style = style;
    p.query = {"about", "topic" + std::to_string(t)};
    for (const Token& tok : out.templates[t]) {
      if (tok != "<slot>") {
        p.response.push_back(tok);
        continue;
      }
      int fill_style = style;
      if (spec.n_styles > 1 && unit(rng) >= spec.slot_fill_bias) {
        // draw from the other styles' pools
        int alt = static_cast<int>(rng() % (spec.n_styles - 1));
        fill_style = alt >= style ? alt + 1 : alt;
      }
      const auto& pool = stylistic[fill_style];
      p.response.push_back(pool[rng() % pool.size()]);
    }
    out.pairs.push_back(std::move(p));
  }
  return out;
}

void save_ground_truth(const SyntheticCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ground-truth file: " + path);
  out << "token\tstyle_name\n";
  for (const auto& [style, tokens] : corpus.planted)
    for (const auto& t : tokens) out << t << "\t" << style << "\n";
}

std::map<std::string, std::set<Token>> load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ground-truth file: " + path);
  std::map<std::string, std::set<Token>> planted;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;  // header
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("ground-truth row " + std::to_string(lineno) +
                               ": expected token<TAB>style_name");
    planted[line.substr(tab + 1)].insert(line.substr(0, tab));
  }
  return planted;
}

}  // namespace igrl
