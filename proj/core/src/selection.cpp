#include "vaxcast/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "vaxcast/error.hpp"
#include "vaxcast/rng.hpp"

namespace vaxcast::selection {

using nlohmann::json;

std::size_t Binning::bin(double value) const {
  return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}

Binning equal_frequency_bins(std::span<const double> values, std::size_t bins) {
  if (bins < 1) throw Error("selection", "need at least one bin");
  std::vector<double> sorted;
  sorted.reserve(values.size());
  for (double v : values)
    if (!is_missing(v)) sorted.push_back(v);
  std::sort(sorted.begin(), sorted.end());
  Binning b;
  if (sorted.empty()) return b;
  const std::size_t n = sorted.size();
  for (std::size_t k = 1; k < bins; ++k) {
    const double cut = sorted[k * n / bins];
    if (cut > sorted.front() && (b.cuts.empty() || cut > b.cuts.back())) b.cuts.push_back(cut);
  }
  return b;
}

double entropy_of(double p) noexcept {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

double entropy(std::span<const std::uint8_t> labels) {
  if (labels.empty()) throw Error("selection", "entropy of an empty label vector");
  const auto ones = std::count_if(labels.begin(), labels.end(), [](std::uint8_t v) { return v != 0; });
  return entropy_of(static_cast<double>(ones) / static_cast<double>(labels.size()));
}

std::string_view to_string(RankMethod method) noexcept {
  switch (method) {
    case RankMethod::info_gain:
      return "info_gain";
    case RankMethod::gain_ratio:
      return "gain_ratio";
    case RankMethod::chi_squared:
      return "chi_squared";
    case RankMethod::symmetric_uncertainty:
      break;
  }
  return "symmetric_uncertainty";
}

RankMethod parse_rank_method(std::string_view text) {
  for (auto m : all_rank_methods())
    if (text == to_string(m)) return m;
  throw Error("selection", "unknown ranking method '" + std::string(text) + "'");
}

std::vector<RankMethod> all_rank_methods() {
  return {RankMethod::info_gain, RankMethod::gain_ratio, RankMethod::chi_squared, RankMethod::symmetric_uncertainty};
}

double FeatureRanking::score(std::string_view feature) const {
  for (std::size_t i = 0; i < features.size(); ++i)
    if (features[i] == feature) return scores[i];
  throw Error("selection", "feature '" + std::string(feature) + "' not ranked");
}

std::size_t FeatureRanking::position(std::string_view feature) const {
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] == feature) return i;
  throw Error("selection", "feature '" + std::string(feature) + "' not ranked");
}

namespace {

double plogp_sum(std::span<const double> counts, double total) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  return h;
}

double score_feature(const std::vector<std::array<double, 2>>& table, RankMethod method) {
  double n = 0.0, ones = 0.0;
  std::vector<double> row_totals;
  for (const auto& cell : table) {
    row_totals.push_back(cell[0] + cell[1]);
    n += cell[0] + cell[1];
    ones += cell[1];
  }
  const double hy = entropy_of(ones / n);
  const double hx = plogp_sum(row_totals, n);
  double hy_given_x = 0.0;
  for (const auto& cell : table) {
    const double r = cell[0] + cell[1];
    if (r > 0.0) hy_given_x += (r / n) * entropy_of(cell[1] / r);
  }
  const double ig = std::max(0.0, hy - hy_given_x);
  switch (method) {
    case RankMethod::info_gain:
      return ig;
    case RankMethod::gain_ratio:
      return hx > 0.0 ? ig / hx : 0.0;
    case RankMethod::symmetric_uncertainty:
      return hx + hy > 0.0 ? 2.0 * ig / (hx + hy) : 0.0;
    case RankMethod::chi_squared:
      break;
  }
  const double col[2] = {n - ones, ones};
  double chi2 = 0.0;
  for (const auto& cell : table) {
    const double r = cell[0] + cell[1];
    for (int c = 0; c < 2; ++c) {
      const double expected = r * col[c] / n;
      if (expected > 0.0) chi2 += (cell[c] - expected) * (cell[c] - expected) / expected;
    }
  }
  return chi2;
}

}  // namespace

FeatureRanking rank(const Dataset& data, const std::string& outcome, RankMethod method) {
  const auto& schema = data.schema();
  if (outcome != schema.outcome_name()) throw SchemaMismatchError("unknown outcome '" + outcome + "'");
  const auto labels = data.labels();
  if (labels.empty()) throw Error("selection", "cannot rank features on an empty dataset");
  const auto ones = std::count(labels.begin(), labels.end(), std::uint8_t{1});
  if (ones == 0 || static_cast<std::size_t>(ones) == labels.size())
    throw Error("selection", "outcome is constant; rankings are undefined");

  FeatureRanking out;
  out.method = method;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& spec = schema.feature(j);
    const auto col = data.column(j);
    std::vector<std::array<double, 2>> table;
    if (spec.kind == FeatureKind::binary) {
      table.assign(2, {0.0, 0.0});
      for (std::size_t i = 0; i < col.size(); ++i) {
        if (is_missing(col[i])) throw Error("selection", "missing value in '" + spec.name + "'");
        table[col[i] != 0.0 ? 1 : 0][labels[i]] += 1.0;
      }
    } else {
      const auto binning = equal_frequency_bins(col);
      table.assign(binning.bins(), {0.0, 0.0});
      for (std::size_t i = 0; i < col.size(); ++i) {
        if (is_missing(col[i])) throw Error("selection", "missing value in '" + spec.name + "'");
        table[binning.bin(col[i])][labels[i]] += 1.0;
      }
    }
    out.features.push_back(spec.name);
    out.scores.push_back(score_feature(table, method));
  }
  std::vector<std::size_t> idx(out.features.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return out.scores[a] > out.scores[b]; });
  for (auto i : idx) out.order.push_back(out.features[i]);
  return out;
}

std::string_view classifier_name(const ClassifierSpec& spec) noexcept {
  switch (spec.index()) {
    case 0:
      return "random_forest";
    case 1:
      return "naive_bayes";
    default:
      return "entropy_tree";
  }
}

MetricsReport train_and_evaluate(const Dataset& train, const Dataset& test, std::span<const std::string> features,
                                 const ClassifierSpec& spec) {
  const auto& outcome = train.schema().outcome_name();
  const auto truth = test.labels();
  std::vector<std::uint8_t> predicted(test.size());
  std::vector<double> scores(test.size());
  if (const auto* config = std::get_if<forest::ForestConfig>(&spec)) {
    const auto model = forest::train_forest(train, outcome, *config, features);
    const auto preds = forest::predict_all(model, test);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      predicted[i] = preds[i].cls;
      scores[i] = preds[i].score;
    }
  } else if (std::holds_alternative<NaiveBayesSpec>(spec)) {
    const auto model = forest::train_naive_bayes(train, outcome, features);
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto p = forest::predict_nb(model, test, i);
      predicted[i] = p.cls;
      scores[i] = p.score;
    }
  } else {
    const auto& tree_spec = std::get<SingleTreeSpec>(spec);
    forest::ForestConfig single;
    single.n_trees = 1;
    single.bagging = false;
    single.max_depth = tree_spec.max_depth;
    single.features_per_split = forest::FeaturesPerSplit::all();
    single.seed = tree_spec.seed;
    single.threads = 1;
    const auto model = forest::train_forest(train, outcome, single, features);
    const auto preds = forest::predict_all(model, test);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      predicted[i] = preds[i].cls;
      scores[i] = preds[i].score;
    }
  }
  return metrics(confusion(predicted, truth), scores, truth);
}

std::vector<CurvePoint> incremental_eval(const Dataset& train, const Dataset& test, const FeatureRanking& ranking,
                                         std::span<const std::size_t> step_sizes, const ClassifierSpec& spec) {
  if (train.schema().fingerprint() != test.schema().fingerprint())
    throw SchemaMismatchError("train and test schemas differ");
  std::vector<CurvePoint> curve;
  for (const std::size_t k : step_sizes) {
    if (k < 1 || k > ranking.order.size())
      throw Error("selection", "prefix size " + std::to_string(k) + " outside [1, " +
                                   std::to_string(ranking.order.size()) + "]");
    CurvePoint point;
    point.n_features = k;
    point.features.assign(ranking.order.begin(), ranking.order.begin() + static_cast<std::ptrdiff_t>(k));
    point.metrics = train_and_evaluate(train, test, point.features, spec);
    curve.push_back(std::move(point));
  }
  return curve;
}

json to_json(const FeatureRanking& r) {
  json scores = json::object();
  for (std::size_t i = 0; i < r.features.size(); ++i) scores[r.features[i]] = r.scores[i];
  return {{"method", to_string(r.method)}, {"features", r.features}, {"scores", std::move(scores)}, {"order", r.order}};
}

FeatureRanking ranking_from_json(const json& doc) {
  FeatureRanking r;
  try {
    r.method = parse_rank_method(doc.at("method").get<std::string>());
    r.features = doc.at("features").get<std::vector<std::string>>();
    for (const auto& f : r.features) r.scores.push_back(doc.at("scores").at(f).get<double>());
    r.order = doc.at("order").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error("selection", std::string("malformed ranking document: ") + e.what());
  }
  return r;
}

json to_json(const CurvePoint& p) {
  return {{"n_features", p.n_features}, {"features", p.features}, {"metrics", to_json(p.metrics)}};
}

}  // namespace vaxcast::selection
