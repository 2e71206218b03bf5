#include "doctest.h"
#include "fixtures.hpp"
#include "vaxcast/error.hpp"
#include "vaxcast/forest.hpp"
#include "vaxcast/synth.hpp"

#include <nlohmann/json.hpp>

using namespace vaxcast;

namespace {

Dataset sample(std::size_t n, std::uint64_t seed) { return synth::generate(fixtures::small_generator(n, seed)); }

}  // namespace

TEST_SUITE("forest") {
  TEST_CASE("features per split resolves") {
    CHECK(forest::FeaturesPerSplit{}.resolve(47) == 7);
    CHECK(forest::FeaturesPerSplit::all().resolve(47) == 47);
    CHECK(forest::FeaturesPerSplit::parse("3").resolve(47) == 3);
    CHECK(forest::FeaturesPerSplit::parse("all").mode == forest::FeaturesPerSplit::Mode::all);
    CHECK_THROWS(forest::FeaturesPerSplit::fixed(50).resolve(47));
  }

  TEST_CASE("depth zero is a majority leaf") {
    const auto d = sample(500, 1);
    Rng rng(1);
    forest::TreeOptions opt;
    opt.max_depth = 0;
    const auto t = forest::train_tree(d, "flushot", opt, rng);
    CHECK(t.nodes().size() == 1);
    double ones = 0;
    for (double y : d.outcome()) ones += y;
    CHECK(t.nodes()[0].cls == (2 * ones > d.size() ? 1 : 0));
  }

  TEST_CASE("trees respect the depth limit") {
    const auto d = sample(3000, 2);
    for (std::size_t depth : {1u, 3u, 6u}) {
      Rng rng(depth);
      forest::TreeOptions opt;
      opt.max_depth = depth;
      CHECK(forest::train_tree(d, "flushot", opt, rng).depth() <= depth);
    }
  }

  TEST_CASE("leaf counts sum to the training size") {
    const auto d = sample(1000, 3);
    Rng rng(3);
    const auto t = forest::train_tree(d, "flushot", {}, rng);
    std::size_t total = 0;
    for (const auto& n : t.nodes())
      if (n.is_leaf()) total += n.counts[0] + n.counts[1];
    CHECK(total == d.size());
  }

  TEST_CASE("score is the fraction of trees voting one") {
    const auto d = sample(2000, 4);
    forest::ForestConfig cfg;
    cfg.n_trees = 9;
    cfg.seed = 5;
    const auto f = forest::train_forest(d, "flushot", cfg);
    for (std::size_t i = 0; i < 50; ++i) {
      std::size_t votes = 0;
      for (const auto& t : f.trees) votes += t.predict([&](std::size_t j) { return d.value(i, j); });
      const auto p = forest::predict(f, d, i);
      CHECK(p.score == doctest::Approx(votes / 9.0));
      CHECK(p.cls == (votes >= 5 ? 1 : 0));
    }
  }

  TEST_CASE("thread count does not change the forest") {
    const auto d = sample(3000, 6);
    forest::ForestConfig cfg;
    cfg.seed = 17;
    cfg.n_trees = 8;
    cfg.threads = 1;
    const auto a = forest::train_forest(d, "flushot", cfg);
    cfg.threads = 4;
    const auto b = forest::train_forest(d, "flushot", cfg);
    CHECK(forest::to_json(a) == forest::to_json(b));
  }

  TEST_CASE("json round trip predicts identically") {
    const auto d = sample(1500, 7);
    forest::ForestConfig cfg;
    cfg.seed = 2;
    cfg.n_trees = 5;
    const auto f = forest::train_forest(d, "flushot", cfg);
    const auto g = forest::forest_from_json(nlohmann::json::parse(forest::to_json(f).dump()));
    CHECK(g.trees.size() == f.trees.size());
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(forest::predict(f, d, i).score == forest::predict(g, d, i).score);
  }

  TEST_CASE("corrupt node references are rejected") {
    const auto d = sample(500, 8);
    forest::ForestConfig cfg;
    cfg.n_trees = 1;
    auto doc = forest::to_json(forest::train_forest(d, "flushot", cfg));
    doc["trees"][0][0][2] = 9999;
    CHECK_THROWS(forest::forest_from_json(doc));
  }

  TEST_CASE("schema fingerprint mismatch is an error") {
    const auto d = sample(500, 9);
    forest::ForestConfig cfg;
    cfg.n_trees = 2;
    const auto f = forest::train_forest(d, "flushot", cfg);
    using K = FeatureKind;
    const Schema other({{"age", K::continuous, "demographics", ""}, {"x", K::binary, "g", ""}});
    Record r{{40, 1}, std::nullopt};
    CHECK_THROWS_AS(forest::predict(f, other, r), FingerprintMismatchError);
  }

  TEST_CASE("naive bayes learns the dominant effect") {
    const auto d = sample(20000, 10);
    const std::vector<std::string> feats{"diabetes", "asthma"};
    const auto m = forest::train_naive_bayes(d, "flushot", feats);
    // Closed-form posterior ordering: diabetes without asthma is the most likely positive.
    Record hi{{40, 1000, 0, 0, 1, 0}, std::nullopt}, lo{{40, 1000, 0, 0, 0, 1}, std::nullopt};
    CHECK(forest::predict_nb(m, d.schema(), hi).score > forest::predict_nb(m, d.schema(), lo).score);
    CHECK(forest::predict_nb(m, d.schema(), hi).cls == 1);
    CHECK(forest::predict_nb(m, d.schema(), lo).cls == 0);
  }
}
