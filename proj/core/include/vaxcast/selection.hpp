#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vaxcast/data.hpp"
#include "vaxcast/evaluation.hpp"
#include "vaxcast/forest.hpp"

namespace vaxcast::selection {

// Equal-frequency discretization. A value falls in bin k when exactly k cut
// points are <= it.
struct Binning {
  std::vector<double> cuts;

  std::size_t bins() const noexcept { return cuts.size() + 1; }
  std::size_t bin(double value) const;
};

Binning equal_frequency_bins(std::span<const double> values, std::size_t bins = 10);

// Shannon entropy in bits of a 0/1 label vector.
double entropy(std::span<const std::uint8_t> labels);
double entropy_of(double p) noexcept;

enum class RankMethod { info_gain, gain_ratio, chi_squared, symmetric_uncertainty };

std::string_view to_string(RankMethod method) noexcept;
RankMethod parse_rank_method(std::string_view text);
std::vector<RankMethod> all_rank_methods();

struct FeatureRanking {
  RankMethod method = RankMethod::info_gain;
  std::vector<std::string> features;  // schema order
  std::vector<double> scores;         // aligned with `features`
  std::vector<std::string> order;     // descending score, ties by schema order

  double score(std::string_view feature) const;
  std::size_t position(std::string_view feature) const;  // 0-based rank
};

// Scores every schema feature against the outcome. Continuous features are
// cut into 10 equal-frequency bins first.
FeatureRanking rank(const Dataset& data, const std::string& outcome, RankMethod method);

struct NaiveBayesSpec {};
struct SingleTreeSpec {
  std::size_t max_depth = 20;
  std::uint64_t seed = 0;
};
using ClassifierSpec = std::variant<forest::ForestConfig, NaiveBayesSpec, SingleTreeSpec>;

std::string_view classifier_name(const ClassifierSpec& spec) noexcept;

// Trains `spec` on `features` of train and scores test.
MetricsReport train_and_evaluate(const Dataset& train, const Dataset& test, std::span<const std::string> features,
                                 const ClassifierSpec& spec);

struct CurvePoint {
  std::size_t n_features = 0;
  std::vector<std::string> features;
  MetricsReport metrics;
};

// One point per prefix size of ranking.order. The ranking must come from
// training data only.
std::vector<CurvePoint> incremental_eval(const Dataset& train, const Dataset& test, const FeatureRanking& ranking,
                                         std::span<const std::size_t> step_sizes, const ClassifierSpec& spec);

nlohmann::json to_json(const FeatureRanking& ranking);
FeatureRanking ranking_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const CurvePoint& point);

}  // namespace vaxcast::selection
