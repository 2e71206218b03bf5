#include <algorithm>
#include <numeric>

#include "tree_internal.hpp"
#include "vaxcast/error.hpp"
#include "vaxcast/parallel.hpp"

namespace vaxcast::forest {

Forest train_forest(const Dataset& data, const std::string& outcome, const ForestConfig& config,
                    std::span<const std::string> features) {
  if (config.n_trees < 1) throw Error("forest", "n_trees must be at least 1");
  if (outcome != data.schema().outcome_name()) throw SchemaMismatchError("unknown outcome '" + outcome + "'");
  Forest forest;
  forest.config = config;
  forest.schema_fingerprint = data.schema().fingerprint();
  forest.feature_index = detail::resolve_features(data.schema(), features);
  for (auto j : forest.feature_index) forest.features.push_back(data.schema().feature(j).name);
  forest.n_train = data.size();
  const std::size_t mtry = config.features_per_split.resolve(forest.feature_index.size());

  const auto matrix = detail::encode(data, forest.feature_index);
  const std::size_t n = data.size();
  forest.trees.resize(config.n_trees);
  forest.oob_fraction.assign(config.n_trees, 0.0);
  parallel_for(config.n_trees, config.threads, [&](std::size_t t) {
    Rng rng(derive_seed(config.seed, t));
    std::vector<std::uint32_t> rows(n);
    if (config.bagging) {
      std::vector<std::uint8_t> drawn(n, 0);
      for (auto& r : rows) {
        r = static_cast<std::uint32_t>(rng.below(n));
        drawn[r] = 1;
      }
      const auto in_bag = static_cast<std::size_t>(std::count(drawn.begin(), drawn.end(), std::uint8_t{1}));
      forest.oob_fraction[t] = static_cast<double>(n - in_bag) / static_cast<double>(n);
    } else {
      std::iota(rows.begin(), rows.end(), 0u);
    }
    forest.trees[t] = detail::grow(matrix, std::move(rows), config.max_depth, mtry, rng);
  });
  return forest;
}

namespace {

template <typename ValueOf>
Prediction vote(const Forest& forest, ValueOf&& value) {
  if (forest.trees.empty()) throw Error("forest", "forest has no trees");
  for (std::size_t k = 0; k < forest.feature_index.size(); ++k)
    if (is_missing(value(forest.feature_index[k])))
      throw Error("forest", "missing value in feature '" + forest.features[k] + "'");
  std::size_t ones = 0;
  for (const auto& tree : forest.trees) ones += tree.predict(value);
  Prediction p;
  p.score = static_cast<double>(ones) / static_cast<double>(forest.trees.size());
  p.cls = 2 * ones > forest.trees.size() ? 1 : 0;
  return p;
}

void check_fingerprint(const Forest& forest, const Schema& schema) {
  const auto fp = schema.fingerprint();
  if (fp != forest.schema_fingerprint)
    throw FingerprintMismatchError("schema fingerprint mismatch: model expects " + forest.schema_fingerprint +
                                   ", data has " + fp);
}

}  // namespace

Prediction predict(const Forest& forest, const Dataset& data, std::size_t row) {
  check_fingerprint(forest, data.schema());
  return vote(forest, [&](std::size_t j) { return data.value(row, j); });
}

Prediction predict(const Forest& forest, const Schema& schema, const Record& record) {
  check_fingerprint(forest, schema);
  if (record.values.size() != schema.size()) throw SchemaMismatchError("record width does not match schema");
  return vote(forest, [&](std::size_t j) { return record.values[j]; });
}

std::vector<Prediction> predict_all(const Forest& forest, const Dataset& data) {
  check_fingerprint(forest, data.schema());
  std::vector<Prediction> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out[i] = vote(forest, [&](std::size_t j) { return data.value(i, j); });
  return out;
}

}  // namespace vaxcast::forest
