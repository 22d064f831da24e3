#include "igrl/evalsuite.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "igrl/objectives.hpp"
#include "json.hpp"

namespace igrl {

using nlohmann::json;

ConflictMatrix ConflictMatrix::none(const StyleSet& styles) {
  ConflictMatrix m;
  m.styles = styles;
  m.conflicted.assign(styles.size(), std::vector<char>(styles.size(), 0));
  return m;
}

bool ConflictMatrix::is_conflicted(int predicted, int desired) const {
  if (predicted == desired) return false;
  if (predicted == neutral_style || desired == neutral_style) return false;
  return conflicted[predicted][desired] != 0;
}

ConflictMatrix load_conflict_matrix(const std::string& path, const StyleSet& styles) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open conflict matrix: " + path);
  json obj = json::parse(in);
  ConflictMatrix m = ConflictMatrix::none(styles);
  for (const auto& pair : obj["conflicts"]) {
    const int a = styles.id_of(pair[0].get<std::string>());
    const int b = styles.id_of(pair[1].get<std::string>());
    m.conflicted[a][b] = m.conflicted[b][a] = 1;
  }
  if (obj.contains("neutral") && !obj["neutral"].is_null())
    m.neutral_style = styles.id_of(obj["neutral"].get<std::string>());
  return m;
}

void save_conflict_matrix(const ConflictMatrix& m, const std::string& path) {
  json obj;
  obj["conflicts"] = json::array();
  for (int a = 0; a < m.styles.size(); ++a)
    for (int b = a + 1; b < m.styles.size(); ++b)
      if (m.conflicted[a][b])
        obj["conflicts"].push_back({m.styles.name_of(a), m.styles.name_of(b)});
  if (m.neutral_style >= 0) obj["neutral"] = m.styles.name_of(m.neutral_style);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write conflict matrix: " + path);
  out << obj.dump(2) << "\n";
}

double distinct_n(const std::vector<std::vector<Token>>& responses, int n) {
  if (n < 1) throw std::runtime_error("n must be >= 1");
  std::set<std::vector<Token>> seen;
  long total = 0;
  for (const auto& r : responses) {
    for (std::size_t i = 0; i + n <= r.size(); ++i) {
      seen.insert(std::vector<Token>(r.begin() + i, r.begin() + i + n));
      ++total;
    }
  }
  if (total == 0) throw std::runtime_error("no n-grams");
  return static_cast<double>(seen.size()) / static_cast<double>(total);
}

double a_sar(const std::vector<std::vector<int>>& response_ids, int desired_style,
             const StyleClassifier& classifier, const ConflictMatrix& conflicts) {
  if (response_ids.empty()) throw std::runtime_error("empty response list");
  long acceptable = 0;
  for (const auto& ids : response_ids) {
    bool has_content = false;
    for (int id : ids)
      if (id >= Vocabulary::kNumReserved) has_content = true;
    if (!has_content) continue;  // empty generation: unacceptable
    const Vec p = classifier.score(ids);
    int predicted = 0;
    for (int s = 1; s < classifier.n_styles(); ++s)
      if (p[s] > p[predicted]) predicted = s;  // ties to the lowest style id
    if (!conflicts.is_conflicted(predicted, desired_style)) ++acceptable;
  }
  return static_cast<double>(acceptable) / static_cast<double>(response_ids.size());
}

double skeleton_retention(const std::vector<std::vector<int>>& generated,
                          const std::vector<std::vector<int>>& references, int style,
                          const StyleLexicon& lexicon) {
  if (generated.empty() || generated.size() != references.size())
    throw std::runtime_error("generated and reference sets must align 1:1");
  long neutral_positions = 0, matches = 0;
  for (std::size_t k = 0; k < references.size(); ++k) {
    const auto& ref = references[k];
    const auto& gen = generated[k];
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (ref[i] == Vocabulary::kEos) continue;
      if (lexicon.is_stylistic(ref[i], style)) continue;
      ++neutral_positions;
      if (i < gen.size() && gen[i] == ref[i]) ++matches;
    }
  }
  if (neutral_positions == 0) throw std::runtime_error("no neutral positions");
  return static_cast<double>(matches) / static_cast<double>(neutral_positions);
}

double perplexity(Seq2SeqModel& model, const std::vector<DialoguePair>& corpus,
                  const Vocabulary& vocab) {
  if (corpus.empty()) throw std::runtime_error("empty corpus");
  double total_loss = 0.0;
  long total_tokens = 0;
  for (const auto& p : corpus) {
    const std::vector<int> q = vocab.encode(p.query);
    const std::vector<int> y = encode_with_eos(vocab, p.response);
    total_loss += mle_loss(model, q, y);
    total_tokens += static_cast<long>(y.size());
  }
  return std::exp(total_loss / static_cast<double>(total_tokens));
}

namespace {

std::string format_value(const std::string& metric, double value, long count) {
  char buf[64];
  if (metric == "sample_count") {
    std::snprintf(buf, sizeof(buf), "%ld", count);
  } else if (metric == "perplexity") {
    std::snprintf(buf, sizeof(buf), "%.9g", value);
  } else {
    std::snprintf(buf, sizeof(buf), "%.4f", value);
  }
  return buf;
}

}  // namespace

void emit_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << "style,metric,value\n";
  for (const auto& row : report.rows) {
    out << row.style << ",distinct_1," << format_value("r", row.distinct_1, 0) << "\n";
    out << row.style << ",distinct_2," << format_value("r", row.distinct_2, 0) << "\n";
    out << row.style << ",a_sar," << format_value("r", row.a_sar, 0) << "\n";
    out << row.style << ",skeleton_retention,"
        << format_value("r", row.skeleton_retention, 0) << "\n";
    out << row.style << ",perplexity,"
        << format_value("perplexity", row.perplexity, 0) << "\n";
    out << row.style << ",sample_count,"
        << format_value("sample_count", 0, row.sample_count) << "\n";
  }
  if (!report.config_digest.empty())
    out << "overall,config_digest," << report.config_digest << "\n";

  std::ofstream table(path + ".txt");
  if (!table) throw std::runtime_error("cannot write report table: " + path + ".txt");
  char buf[256];
  table << "style        distinct-1  distinct-2  a-sar   retention  ppl        n\n";
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%-12s %-11.4f %-11.4f %-7.4f %-10.4f %-10.4g %ld\n",
                  row.style.c_str(), row.distinct_1, row.distinct_2, row.a_sar,
                  row.skeleton_retention, row.perplexity, row.sample_count);
    table << buf;
  }
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report: " + path);
  EvalReport report;
  std::string line;
  int lineno = 0;
  auto row_for = [&report](const std::string& style) -> EvalRow& {
    for (auto& r : report.rows)
      if (r.style == style) return r;
    report.rows.push_back(EvalRow{style});
    return report.rows.back();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::istringstream row(line);
    std::string style, metric, value;
    if (!std::getline(row, style, ',') || !std::getline(row, metric, ',') ||
        !std::getline(row, value))
      throw std::runtime_error("report row " + std::to_string(lineno) + ": malformed");
    if (metric == "config_digest") {
      report.config_digest = value;
      continue;
    }
    EvalRow& r = row_for(style);
    if (metric == "distinct_1") r.distinct_1 = std::stod(value);
    else if (metric == "distinct_2") r.distinct_2 = std::stod(value);
    else if (metric == "a_sar") r.a_sar = std::stod(value);
    else if (metric == "skeleton_retention") r.skeleton_retention = std::stod(value);
    else if (metric == "perplexity") r.perplexity = std::stod(value);
    else if (metric == "sample_count") r.sample_count = std::stol(value);
    else throw std::runtime_error("report row " + std::to_string(lineno) +
                                  ": unknown metric " + metric);
  }
  return report;
}

}  // namespace igrl
