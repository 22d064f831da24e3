#include "igrl/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace igrl {

using nlohmann::json;

StyleClassifier::StyleClassifier(int n_styles, int vocab_size, std::uint64_t vocab_hash)
    : w_(Mat::Zero(n_styles, vocab_size)), b_(Vec::Zero(n_styles)),
      vocab_hash_(vocab_hash) {}

Vec StyleClassifier::features(std::span<const int> response_ids) const {
  Vec x = Vec::Zero(vocab_size());
  int n = 0;
  for (int id : response_ids) {
    if (id < Vocabulary::kNumReserved) continue;
    if (id >= vocab_size()) throw std::runtime_error("token id out of range");
    x[id] += 1.0;
    ++n;
  }
  if (n == 0) throw std::runtime_error("cannot score an empty response");
  return x / static_cast<double>(n);
}

Vec StyleClassifier::score(std::span<const int> response_ids) const {
  Vec logits = w_ * features(response_ids) + b_;
  const double mx = logits.maxCoeff();
  Vec p = (logits.array() - mx).exp();
  return p / p.sum();
}

StyleClassifier classifier_train(
    const std::vector<std::pair<std::vector<int>, int>>& data, int n_styles,
    int vocab_size, std::uint64_t vocab_hash, const ClassifierConfig& cfg) {
  if (data.empty()) throw std::runtime_error("empty classifier training data");
  std::set<int> styles_present;
  for (const auto& [ids, s] : data) styles_present.insert(s);
  if (styles_present.size() < 2)
    throw std::runtime_error("classifier training needs at least two styles");

  StyleClassifier clf(n_styles, vocab_size, vocab_hash);

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_holdout =
      std::min<int>(static_cast<int>(data.size()) - 1,
                    static_cast<int>(std::lround(cfg.holdout_fraction * data.size())));
  const int n_train = static_cast<int>(data.size()) - n_holdout;

  std::vector<Vec> feats;
  feats.reserve(data.size());
  for (int i : order) feats.push_back(clf.features(data[i].first));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Mat gw = Mat::Zero(n_styles, vocab_size);
    Vec gb = Vec::Zero(n_styles);
    for (int i = 0; i < n_train; ++i) {
      Vec logits = clf.w_ * feats[i] + clf.b_;
      const double mx = logits.maxCoeff();
      Vec p = (logits.array() - mx).exp();
      p /= p.sum();
      p[data[order[i]].second] -= 1.0;  // dCE/dlogits
      gw += p * feats[i].transpose();
      gb += p;
    }
    clf.w_ -= (cfg.learning_rate / n_train) * gw;
    clf.b_ -= (cfg.learning_rate / n_train) * gb;
  }

  int correct = 0;
  const int n_eval = n_holdout > 0 ? n_holdout : n_train;
  const int start = n_holdout > 0 ? n_train : 0;
  for (int i = start; i < start + n_eval; ++i) {
    Vec p = clf.w_ * feats[i] + clf.b_;
    int best = 0;
    for (int s = 1; s < n_styles; ++s)
      if (p[s] > p[best]) best = s;
    if (best == data[order[i]].second) ++correct;
  }
  clf.held_out_accuracy_ = static_cast<double>(correct) / n_eval;
  return clf;
}

void StyleClassifier::save(const std::string& path,
                           const std::string& manifest_hash) const {
  json obj;
  obj["format"] = "igrl-classifier-v1";
  obj["vocab_hash"] = vocab_hash_;
  obj["held_out_accuracy"] = held_out_accuracy_;
  if (!manifest_hash.empty()) obj["manifest_hash"] = manifest_hash;
  json rows = json::array();
  for (Eigen::Index r = 0; r < w_.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < w_.cols(); ++c) row.push_back(w_(r, c));
    rows.push_back(std::move(row));
  }
  obj["w"] = std::move(rows);
  json bias = json::array();
  for (Eigen::Index s = 0; s < b_.size(); ++s) bias.push_back(b_[s]);
  obj["b"] = std::move(bias);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write classifier: " + path);
  out << obj.dump() << "\n";
}

StyleClassifier StyleClassifier::load(const std::string& path,
                                      std::uint64_t expected_vocab_hash) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open classifier: " + path);
  json obj = json::parse(in);
  if (obj.value("format", "") != std::string("igrl-classifier-v1"))
    throw std::runtime_error("unrecognized classifier format");
  const std::uint64_t stored_hash = obj["vocab_hash"].get<std::uint64_t>();
  if (stored_hash != expected_vocab_hash)
    throw std::runtime_error("vocabulary hash mismatch: classifier was built "
                             "against a different vocabulary");
  const json& rows = obj["w"];
  const int n_styles = static_cast<int>(rows.size());
  const int vocab = static_cast<int>(rows[0].size());
  StyleClassifier clf(n_styles, vocab, stored_hash);
  for (int r = 0; r < n_styles; ++r)
    for (int c = 0; c < vocab; ++c) clf.w_(r, c) = rows[r][c].get<double>();
  for (int s = 0; s < n_styles; ++s) clf.b_[s] = obj["b"][s].get<double>();
  clf.held_out_accuracy_ = obj["held_out_accuracy"].get<double>();
  return clf;
}

}  // namespace igrl
