#include "vaxcast/pipeline.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "vaxcast/error.hpp"
#include "vaxcast/evaluation.hpp"
#include "vaxcast/rng.hpp"

namespace vaxcast::pipeline {

using nlohmann::json;

namespace {

forest::ForestConfig old_config(const forest::ForestConfig& config) {
  auto c = config;
  c.seed = derive_seed(config.seed, 1);
  return c;
}

MetricsReport score(const forest::Forest& model, const Dataset& test) {
  const auto preds = forest::predict_all(model, test);
  std::vector<std::uint8_t> predicted(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) predicted[i] = preds[i].cls;
  return metrics(confusion(predicted, test.labels()));
}

}  // namespace

SplitSearchResult split_search(const Dataset& train, const Dataset& test, std::span<const int> grid,
                               const forest::ForestConfig& config) {
  if (grid.empty()) throw Error("pipeline", "boundary grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end()) || std::adjacent_find(grid.begin(), grid.end()) != grid.end())
    throw Error("pipeline", "boundary grid must be strictly ascending");
  if (train.schema().fingerprint() != test.schema().fingerprint())
    throw SchemaMismatchError("train and test schemas differ");
  const auto& outcome = train.schema().outcome_name();

  SplitSearchResult result;
  result.grid.assign(grid.begin(), grid.end());
  std::optional<double> best;
  for (const int b : grid) {
    const auto train_young = train.age_at_most(b);
    const auto train_old = train.age_above(b);
    const auto test_young = test.age_at_most(b);
    const auto test_old = test.age_above(b);
    if (train_young.empty() || train_old.empty() || test_young.empty() || test_old.empty()) {
      result.skipped.push_back({b, "empty subset"});
      continue;
    }
    const auto young = forest::train_forest(train_young, outcome, config);
    const auto old = forest::train_forest(train_old, outcome, old_config(config));
    BoundaryMetrics m;
    m.young_ppv = score(young, test_young).ppv;
    m.old_npv = score(old, test_old).npv;
    m.young_n = test_young.size();
    m.old_n = test_old.size();
    result.per_boundary[b] = m;
    if (!m.young_ppv || !m.old_npv) {
      result.skipped.push_back({b, "undefined metric"});
      continue;
    }
    const double crit = std::min(*m.young_ppv, *m.old_npv);
    if (!best || crit > *best) {
      best = crit;
      result.chosen_boundary = b;
    }
  }
  if (!best) throw Error("pipeline", "every boundary in the grid was skipped");
  return result;
}

std::string_view to_string(YoungTraining mode) noexcept { return mode == YoungTraining::full ? "full" : "subset"; }

YoungTraining parse_young_training(std::string_view text) {
  if (text == "full") return YoungTraining::full;
  if (text == "subset") return YoungTraining::subset;
  throw Error("pipeline", "unknown young training mode '" + std::string(text) + "'");
}

std::string_view to_string(Expert expert) noexcept { return expert == Expert::old ? "old_model" : "young_model"; }

CompositeModel train_composite(const Dataset& train, int boundary, const forest::ForestConfig& config,
                               YoungTraining young_training) {
  const auto old = train.age_above(boundary);
  if (old.empty()) throw Error("pipeline", "no training records above age " + std::to_string(boundary));
  const auto& outcome = train.schema().outcome_name();
  CompositeModel model;
  model.boundary = boundary;
  model.young_training = young_training;
  model.schema_fingerprint = train.schema().fingerprint();
  if (young_training == YoungTraining::full) {
    model.young_model = forest::train_forest(train, outcome, config);
  } else {
    const auto young = train.age_at_most(boundary);
    if (young.empty()) throw Error("pipeline", "no training records at or below age " + std::to_string(boundary));
    model.young_model = forest::train_forest(young, outcome, config);
  }
  model.old_model = forest::train_forest(old, outcome, old_config(config));
  return model;
}

CompositePrediction predict_composite(const CompositeModel& model, const Schema& schema, const Record& record) {
  if (record.values.size() != schema.size())
    throw SchemaMismatchError("record has " + std::to_string(record.values.size()) + " values, schema has " +
                              std::to_string(schema.size()));
  CompositePrediction out;
  out.expert_used = model.route(record.values[schema.age_index()]);
  const auto p = forest::predict(model.expert(out.expert_used), schema, record);
  out.cls = p.cls;
  out.score = p.score;
  return out;
}

CompositePrediction predict_composite(const CompositeModel& model, const Dataset& data, std::size_t row) {
  CompositePrediction out;
  out.expert_used = model.route(data.ages()[row]);
  const auto p = forest::predict(model.expert(out.expert_used), data, row);
  out.cls = p.cls;
  out.score = p.score;
  return out;
}

std::vector<CompositePrediction> predict_composite_all(const CompositeModel& model, const Dataset& data) {
  std::vector<CompositePrediction> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(predict_composite(model, data, i));
  return out;
}

std::string_view to_string(Policy policy) noexcept {
  switch (policy) {
    case Policy::policy1_target:
      return "policy1_target";
    case Policy::policy2_no_promotion:
      return "policy2_no_promotion";
    case Policy::policy2_community_pool:
      break;
  }
  return "policy2_community_pool";
}

Policy policy_for(Expert age_band, std::uint8_t predicted) noexcept {
  if (predicted == 1) return Policy::policy2_no_promotion;
  return age_band == Expert::old ? Policy::policy1_target : Policy::policy2_community_pool;
}

PolicyAssignment assign_policy(const CompositeModel& model, const Schema& schema, const Record& record) {
  const auto p = predict_composite(model, schema, record);
  return {policy_for(p.expert_used, p.cls), p.expert_used, p.cls, p.score};
}

PolicyAssignment assign_policy(const CompositeModel& model, const Dataset& data, std::size_t row) {
  const auto p = predict_composite(model, data, row);
  return {policy_for(p.expert_used, p.cls), p.expert_used, p.cls, p.score};
}

json to_json(const SplitSearchResult& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json rows = json::array();
  for (const auto& [b, m] : r.per_boundary)
    rows.push_back({{"boundary", b},
                    {"young_ppv", opt(m.young_ppv)},
                    {"old_npv", opt(m.old_npv)},
                    {"young_n", m.young_n},
                    {"old_n", m.old_n}});
  json skipped = json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"boundary", s.boundary}, {"reason", s.reason}});
  return {{"grid", r.grid}, {"per_boundary", std::move(rows)}, {"skipped", std::move(skipped)},
          {"chosen_boundary", r.chosen_boundary}};
}

json to_json(const CompositeModel& m) {
  return {{"kind", "composite"},
          {"boundary", m.boundary},
          {"young_training", to_string(m.young_training)},
          {"schema_fingerprint", m.schema_fingerprint},
          {"young_model", forest::to_json(m.young_model)},
          {"old_model", forest::to_json(m.old_model)}};
}

CompositeModel composite_from_json(const json& doc) {
  CompositeModel m;
  try {
    if (doc.at("kind").get<std::string>() != "composite") throw Error("pipeline", "document is not a composite model");
    m.boundary = doc.at("boundary").get<int>();
    m.young_training = parse_young_training(doc.at("young_training").get<std::string>());
    m.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    m.young_model = forest::forest_from_json(doc.at("young_model"));
    m.old_model = forest::forest_from_json(doc.at("old_model"));
  } catch (const json::exception& e) {
    throw Error("pipeline", std::string("malformed composite model: ") + e.what());
  }
  if (m.young_model.schema_fingerprint != m.schema_fingerprint || m.old_model.schema_fingerprint != m.schema_fingerprint)
    throw FingerprintMismatchError("composite experts disagree on the schema fingerprint");
  return m;
}

}  // namespace vaxcast::pipeline
