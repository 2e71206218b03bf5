#include <nlohmann/json.hpp>

#include "vaxcast/error.hpp"
#include "vaxcast/forest.hpp"

namespace vaxcast::forest {

using nlohmann::json;

json to_json(const ForestConfig& c) {
  return {{"n_trees", c.n_trees},
          {"max_depth", c.max_depth},
          {"features_per_split", c.features_per_split.to_string()},
          {"bagging", c.bagging},
          {"seed", c.seed}};
}

ForestConfig forest_config_from_json(const json& doc) {
  ForestConfig c;
  try {
    c.n_trees = doc.value("n_trees", c.n_trees);
    c.max_depth = doc.value("max_depth", c.max_depth);
    if (doc.contains("features_per_split"))
      c.features_per_split = FeaturesPerSplit::parse(doc.at("features_per_split").get<std::string>());
    c.bagging = doc.value("bagging", c.bagging);
    c.seed = doc.value("seed", c.seed);
    c.threads = doc.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw Error("forest", std::string("malformed forest config: ") + e.what());
  }
  if (c.n_trees < 1) throw Error("forest", "n_trees must be at least 1");
  return c;
}

// Node layout: [feature, threshold, left, right, class, count0, count1].
json to_json(const Forest& f) {
  json trees = json::array();
  for (const auto& tree : f.trees) {
    json nodes = json::array();
    for (const auto& n : tree.nodes())
      nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.cls, n.counts[0], n.counts[1]}));
    trees.push_back(std::move(nodes));
  }
  return {{"kind", "forest"},
          {"config", to_json(f.config)},
          {"schema_fingerprint", f.schema_fingerprint},
          {"features", f.features},
          {"feature_index", f.feature_index},
          {"n_train", f.n_train},
          {"oob_fraction", f.oob_fraction},
          {"trees", std::move(trees)}};
}

Forest forest_from_json(const json& doc) {
  Forest f;
  try {
    if (doc.at("kind").get<std::string>() != "forest") throw Error("forest", "document is not a forest model");
    f.config = forest_config_from_json(doc.at("config"));
    f.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    f.features = doc.at("features").get<std::vector<std::string>>();
    f.feature_index = doc.at("feature_index").get<std::vector<std::size_t>>();
    f.n_train = doc.at("n_train").get<std::size_t>();
    f.oob_fraction = doc.at("oob_fraction").get<std::vector<double>>();
    for (const auto& jt : doc.at("trees")) {
      std::vector<DecisionTree::Node> nodes;
      for (const auto& jn : jt) {
        DecisionTree::Node n;
        n.feature = jn.at(0).get<int>();
        n.threshold = jn.at(1).get<double>();
        n.left = jn.at(2).get<int>();
        n.right = jn.at(3).get<int>();
        n.cls = jn.at(4).get<std::uint8_t>();
        n.counts = {jn.at(5).get<std::uint32_t>(), jn.at(6).get<std::uint32_t>()};
        nodes.push_back(n);
      }
      const auto count = static_cast<int>(nodes.size());
      for (const auto& n : nodes)
        if (!n.is_leaf() && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count))
          throw Error("forest", "tree node refers outside its tree");
      if (nodes.empty()) throw Error("forest", "empty tree in forest model");
      f.trees.emplace_back(std::move(nodes));
    }
  } catch (const json::exception& e) {
    throw Error("forest", std::string("malformed forest model: ") + e.what());
  }
  if (f.features.size() != f.feature_index.size()) throw Error("forest", "feature list and index disagree");
  return f;
}

}  // namespace vaxcast::forest
