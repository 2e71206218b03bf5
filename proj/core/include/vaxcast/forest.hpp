#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vaxcast/data.hpp"
#include "vaxcast/rng.hpp"

namespace vaxcast::forest {

// Candidate features drawn at each node: ceil(sqrt(F)), all F, or a fixed count.
struct FeaturesPerSplit {
  enum class Mode { sqrt, all, fixed };
  Mode mode = Mode::sqrt;
  std::size_t count = 0;

  std::size_t resolve(std::size_t feature_count) const;
  std::string to_string() const;
  static FeaturesPerSplit parse(std::string_view text);
  static FeaturesPerSplit all() { return {Mode::all, 0}; }
  static FeaturesPerSplit fixed(std::size_t k) { return {Mode::fixed, k}; }
};

struct ForestConfig {
  std::size_t n_trees = 25;
  std::size_t max_depth = 20;
  FeaturesPerSplit features_per_split;
  bool bagging = true;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency; never affects results
};

struct Prediction {
  std::uint8_t cls = 0;
  double score = 0.0;
};

class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // schema index; -1 marks a leaf
    double threshold = 0.0;
    int left = -1;  // value <= threshold
    int right = -1;
    std::uint8_t cls = 0;
    std::array<std::uint32_t, 2> counts{};

    bool is_leaf() const noexcept { return feature < 0; }
  };

  DecisionTree() = default;
  explicit DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  std::span<const Node> nodes() const noexcept { return nodes_; }
  std::size_t depth() const;
  std::size_t leaves() const;

  // `value(j)` returns the value of schema feature j for the record.
  template <typename ValueOf>
  std::uint8_t predict(ValueOf&& value) const {
    int at = 0;
    while (!nodes_[static_cast<std::size_t>(at)].is_leaf()) {
      const auto& n = nodes_[static_cast<std::size_t>(at)];
      at = value(static_cast<std::size_t>(n.feature)) <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(at)].cls;
  }

  friend bool operator==(const DecisionTree& a, const DecisionTree& b);

 private:
  std::vector<Node> nodes_;
};

struct TreeOptions {
  std::size_t max_depth = 20;
  FeaturesPerSplit features_per_split = FeaturesPerSplit::all();
  std::vector<std::string> features;  // empty = every schema feature
};

// Greedy entropy tree. At each node a fresh candidate subset is drawn without
// replacement; the split with the largest information gain wins (ties go to
// the lowest schema index, then the lowest threshold). Growth stops at
// max_depth, at a pure node, or when no split has positive gain.
DecisionTree train_tree(const Dataset& data, const std::string& outcome, const TreeOptions& options, Rng& rng);

struct Forest {
  std::vector<DecisionTree> trees;
  ForestConfig config;
  std::string schema_fingerprint;
  std::vector<std::string> features;
  std::vector<std::size_t> feature_index;  // schema positions of `features`
  std::vector<double> oob_fraction;        // per tree; 0 without bagging
  std::size_t n_train = 0;
};

// Tree t uses its own stream derive_seed(config.seed, t), so the result does
// not depend on thread count or scheduling.
Forest train_forest(const Dataset& data, const std::string& outcome, const ForestConfig& config,
                    std::span<const std::string> features = {});

// score = fraction of trees voting 1; class 1 iff score > 0.5.
Prediction predict(const Forest& forest, const Dataset& data, std::size_t row);
Prediction predict(const Forest& forest, const Schema& schema, const Record& record);
std::vector<Prediction> predict_all(const Forest& forest, const Dataset& data);

struct NaiveBayesModel {
  std::vector<std::string> features;
  std::vector<std::size_t> feature_index;
  std::vector<std::vector<double>> cuts;  // bin edges; empty for binary features
  std::array<double, 2> log_prior{};
  // log_likelihood[f][class][level]
  std::vector<std::array<std::vector<double>, 2>> log_likelihood;
  std::string schema_fingerprint;
};

// Class-conditional categorical model with add-one smoothing. Binary features
// have levels {0, 1}; continuous features use 10 equal-frequency bins.
NaiveBayesModel train_naive_bayes(const Dataset& data, const std::string& outcome,
                                  std::span<const std::string> features = {});
Prediction predict_nb(const NaiveBayesModel& model, const Dataset& data, std::size_t row);
Prediction predict_nb(const NaiveBayesModel& model, const Schema& schema, const Record& record);

nlohmann::json to_json(const ForestConfig& config);
ForestConfig forest_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Forest& forest);
Forest forest_from_json(const nlohmann::json& doc);

}  // namespace vaxcast::forest
