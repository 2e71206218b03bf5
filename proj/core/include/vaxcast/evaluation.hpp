#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace vaxcast {

// Positive class = recently vaccinated.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> truth);

// PPV / NPV stay empty when their denominator is zero.
struct MetricsReport {
  std::optional<double> ppv;
  std::optional<double> npv;
  double acc = 0.0;
  std::optional<double> auc;
  ConfusionMatrix matrix;
  std::size_t n = 0;
};

MetricsReport metrics(const ConfusionMatrix& matrix);
MetricsReport metrics(const ConfusionMatrix& matrix, std::span<const double> scores, std::span<const std::uint8_t> truth);

// Area under the ROC curve as the Mann-Whitney statistic; tied scores count
// one half. Empty when either class is absent.
std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

// One point per distinct score (predict positive when score >= threshold),
// plus the (0, 0) corner.
std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const std::uint8_t> truth);

nlohmann::json to_json(const MetricsReport& report);

}  // namespace vaxcast
