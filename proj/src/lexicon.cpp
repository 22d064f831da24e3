#include "igrl/lexicon.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace igrl {

CountStats count_statistics(const std::vector<DialoguePair>& corpus,
                            const Vocabulary& vocab, int n_styles) {
  if (corpus.empty()) throw std::runtime_error("empty corpus");
  CountStats stats;
  stats.token_style_count.assign(vocab.size(), std::vector<long>(n_styles, 0));
  stats.token_count.assign(vocab.size(), 0);
  stats.style_token_mass.assign(n_styles, 0);
  for (const auto& p : corpus) {
    if (p.style < 0 || p.style >= n_styles)
      throw std::runtime_error("style id out of range in corpus");
    for (const auto& tok : p.response) {
      const int id = vocab.encode(tok);
      ++stats.token_style_count[id][p.style];
      ++stats.token_count[id];
      ++stats.style_token_mass[p.style];
      ++stats.total_tokens;
    }
  }
  return stats;
}

double pmi(int token_id, int style_id, const CountStats& stats) {
  const long joint = stats.token_style_count[token_id][style_id];
  const long tok = stats.token_count[token_id];
  const long mass = stats.style_token_mass[style_id];
  if (joint == 0 || tok == 0 || mass == 0) return kPmiFloor;
  const double total = static_cast<double>(stats.total_tokens);
  // log( (joint/T) / ((tok/T)(mass/T)) ) = log( joint*T / (tok*mass) )
  return std::log(static_cast<double>(joint) * total /
                  (static_cast<double>(tok) * static_cast<double>(mass)));
}

bool StyleLexicon::is_stylistic(int token_id, int style_id) const {
  if (token_id < Vocabulary::kNumReserved) return false;
  if (token_id >= static_cast<int>(stylistic.size())) return false;
  return stylistic[token_id][style_id] != 0;
}

StyleLexicon build_lexicon(const std::vector<DialoguePair>& corpus,
                           const Vocabulary& vocab, const StyleSet& styles) {
  const int n_styles = styles.size();
  CountStats stats = count_statistics(corpus, vocab, n_styles);
  for (int s = 0; s < n_styles; ++s)
    if (stats.style_token_mass[s] == 0)
      throw std::runtime_error("style has no responses: " + styles.name_of(s));

  StyleLexicon lex;
  lex.styles = styles;
  lex.pmi.assign(vocab.size(), std::vector<double>(n_styles, kPmiFloor));
  lex.threshold.assign(n_styles, 0.0);
  lex.stylistic.assign(vocab.size(), std::vector<char>(n_styles, 0));

  for (int s = 0; s < n_styles; ++s) {
    double max_pmi = kPmiFloor;
    for (int x = Vocabulary::kNumReserved; x < vocab.size(); ++x) {
      lex.pmi[x][s] = pmi(x, s, stats);
      if (stats.token_style_count[x][s] > 0 && lex.pmi[x][s] > max_pmi)
        max_pmi = lex.pmi[x][s];
    }
    lex.threshold[s] = 0.75 * max_pmi;
    for (int x = Vocabulary::kNumReserved; x < vocab.size(); ++x)
      lex.stylistic[x][s] = lex.pmi[x][s] >= lex.threshold[s] ? 1 : 0;
  }
  return lex;
}

void save_lexicon(const StyleLexicon& lex, const Vocabulary& vocab,
                  const std::string& tsv_path, const std::string& thresholds_path) {
  std::ofstream out(tsv_path);
  if (!out) throw std::runtime_error("cannot write lexicon file: " + tsv_path);
  out << "token\tstyle_name\tpmi\tis_stylistic\n";
  char buf[64];
  for (int x = Vocabulary::kNumReserved; x < vocab.size(); ++x) {
    for (int s = 0; s < lex.styles.size(); ++s) {
      std::snprintf(buf, sizeof(buf), "%.9f", lex.pmi[x][s]);
      out << vocab.token(x) << "\t" << lex.styles.name_of(s) << "\t" << buf << "\t"
          << (lex.stylistic[x][s] ? 1 : 0) << "\n";
    }
  }
  std::ofstream tout(thresholds_path);
  if (!tout) throw std::runtime_error("cannot write thresholds file: " + thresholds_path);
  nlohmann::json obj;
  for (int s = 0; s < lex.styles.size(); ++s)
    obj[lex.styles.name_of(s)] = lex.threshold[s];
  tout << obj.dump(2) << "\n";
}

StyleLexicon load_lexicon(const Vocabulary& vocab, const std::string& tsv_path,
                          const std::string& thresholds_path) {
  std::ifstream tin(thresholds_path);
  if (!tin) throw std::runtime_error("cannot open thresholds file: " + thresholds_path);
  nlohmann::json tobj = nlohmann::json::parse(tin);

  StyleLexicon lex;
  for (auto& [name, value] : tobj.items()) {
    lex.styles.names.push_back(name);
    lex.threshold.push_back(value.get<double>());
  }
  const int n_styles = lex.styles.size();
  lex.pmi.assign(vocab.size(), std::vector<double>(n_styles, kPmiFloor));
  lex.stylistic.assign(vocab.size(), std::vector<char>(n_styles, 0));

  std::ifstream in(tsv_path);
  if (!in) throw std::runtime_error("cannot open lexicon file: " + tsv_path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::istringstream row(line);
    std::string token, style_name, pmi_str, flag_str;
    if (!std::getline(row, token, '\t') || !std::getline(row, style_name, '\t') ||
        !std::getline(row, pmi_str, '\t') || !std::getline(row, flag_str))
      throw std::runtime_error("lexicon row " + std::to_string(lineno) +
                               ": expected 4 tab-separated columns");
    const int x = vocab.encode(token);
    if (x == Vocabulary::kUnk && token != vocab.token(Vocabulary::kUnk))
      throw std::runtime_error("lexicon row " + std::to_string(lineno) +
                               ": token not in vocabulary: " + token);
    int s;
    try {
      s = lex.styles.id_of(style_name);
    } catch (const std::exception&) {
      throw std::runtime_error("lexicon row " + std::to_string(lineno) +
                               ": unknown style name: " + style_name);
    }
    try {
      lex.pmi[x][s] = std::stod(pmi_str);
      lex.stylistic[x][s] = std::stoi(flag_str) ? 1 : 0;
    } catch (const std::exception&) {
      throw std::runtime_error("lexicon row " + std::to_string(lineno) +
                               ": malformed numeric column");
    }
  }
  return lex;
}

}  // namespace igrl
