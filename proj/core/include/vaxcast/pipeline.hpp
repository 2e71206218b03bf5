#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vaxcast/data.hpp"
#include "vaxcast/forest.hpp"

namespace vaxcast::pipeline {

struct BoundaryMetrics {
  std::optional<double> young_ppv;
  std::optional<double> old_npv;
  std::size_t young_n = 0;  // test records with age <= boundary
  std::size_t old_n = 0;    // test records with age > boundary
};

struct SkippedBoundary {
  int boundary = 0;
  std::string reason;
};

struct SplitSearchResult {
  std::vector<int> grid;
  std::map<int, BoundaryMetrics> per_boundary;
  std::vector<SkippedBoundary> skipped;
  int chosen_boundary = 0;
};

// For each boundary trains a young expert on train records with age <= b and
// an old expert on age > b, then scores young PPV and old NPV on the matching
// test subsets. Picks the boundary maximising min(young PPV, old NPV); ties go
// to the smaller boundary. Boundaries with an empty subset or an undefined
// metric are skipped.
SplitSearchResult split_search(const Dataset& train, const Dataset& test, std::span<const int> grid,
                               const forest::ForestConfig& config);

enum class YoungTraining { full, subset };

std::string_view to_string(YoungTraining mode) noexcept;
YoungTraining parse_young_training(std::string_view text);

enum class Expert { young, old };

std::string_view to_string(Expert expert) noexcept;

struct CompositeModel {
  int boundary = 60;
  YoungTraining young_training = YoungTraining::full;
  forest::Forest young_model;
  forest::Forest old_model;
  std::string schema_fingerprint;

  Expert route(double age) const noexcept { return age > boundary ? Expert::old : Expert::young; }
  const forest::Forest& expert(Expert e) const noexcept { return e == Expert::old ? old_model : young_model; }
};

// The young expert uses config.seed, the old expert derive_seed(config.seed, 1).
CompositeModel train_composite(const Dataset& train, int boundary, const forest::ForestConfig& config,
                               YoungTraining young_training = YoungTraining::full);

struct CompositePrediction {
  std::uint8_t cls = 0;
  double score = 0.0;
  Expert expert_used = Expert::young;
};

CompositePrediction predict_composite(const CompositeModel& model, const Schema& schema, const Record& record);
CompositePrediction predict_composite(const CompositeModel& model, const Dataset& data, std::size_t row);
std::vector<CompositePrediction> predict_composite_all(const CompositeModel& model, const Dataset& data);

enum class Policy { policy1_target, policy2_no_promotion, policy2_community_pool };

std::string_view to_string(Policy policy) noexcept;

struct PolicyAssignment {
  Policy policy = Policy::policy2_community_pool;
  Expert age_band = Expert::young;
  std::uint8_t predicted = 0;
  double score = 0.0;
};

Policy policy_for(Expert age_band, std::uint8_t predicted) noexcept;
PolicyAssignment assign_policy(const CompositeModel& model, const Schema& schema, const Record& record);
PolicyAssignment assign_policy(const CompositeModel& model, const Dataset& data, std::size_t row);

nlohmann::json to_json(const SplitSearchResult& result);
nlohmann::json to_json(const CompositeModel& model);
CompositeModel composite_from_json(const nlohmann::json& doc);

}  // namespace vaxcast::pipeline
