#include "vaxcast/evaluation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "vaxcast/error.hpp"

namespace vaxcast {

ConfusionMatrix confusion(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> truth) {
  if (predictions.size() != truth.size())
    throw Error("evaluation", "prediction/truth length mismatch (" + std::to_string(predictions.size()) + " vs " +
                                  std::to_string(truth.size()) + ")");
  if (predictions.empty()) throw Error("evaluation", "empty prediction vector");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool pred = predictions[i] != 0, actual = truth[i] != 0;
    if (pred)
      ++(actual ? m.tp : m.fp);
    else
      ++(actual ? m.fn : m.tn);
  }
  return m;
}

MetricsReport metrics(const ConfusionMatrix& m) {
  if (m.total() == 0) throw Error("evaluation", "metrics of an empty confusion matrix");
  MetricsReport r;
  r.matrix = m;
  r.n = m.total();
  if (m.tp + m.fp > 0) r.ppv = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  if (m.tn + m.fn > 0) r.npv = static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fn);
  r.acc = static_cast<double>(m.tp + m.tn) / static_cast<double>(r.n);
  return r;
}

MetricsReport metrics(const ConfusionMatrix& m, std::span<const double> scores, std::span<const std::uint8_t> truth) {
  MetricsReport r = metrics(m);
  if (scores.size() != truth.size()) throw Error("evaluation", "score/truth length mismatch");
  r.auc = auc(scores, truth);
  return r;
}

std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw Error("evaluation", "score/truth length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of midranks of the positives.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (truth[order[k]]) {
        positive_rank_sum += midrank;
        ++positives;
      }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const double p = static_cast<double>(positives), q = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw Error("evaluation", "score/truth length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto positives = static_cast<double>(std::count_if(truth.begin(), truth.end(), [](auto t) { return t != 0; }));
  const double negatives = static_cast<double>(truth.size()) - positives;
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (truth[order[i]] ? tp : fp) += 1.0;
      ++i;
    }
    out.push_back({s, positives > 0 ? tp / positives : 0.0, negatives > 0 ? fp / negatives : 0.0});
  }
  return out;
}

nlohmann::json to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"ppv", opt(r.ppv)},
          {"npv", opt(r.npv)},
          {"acc", r.acc},
          {"auc", opt(r.auc)},
          {"n", r.n},
          {"matrix", {{"tp", r.matrix.tp}, {"fp", r.matrix.fp}, {"tn", r.matrix.tn}, {"fn", r.matrix.fn}}}};
}

}  // namespace vaxcast
