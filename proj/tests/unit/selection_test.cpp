#include <cmath>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "fixtures.hpp"
#include "vaxcast/selection.hpp"
#include "vaxcast/synth.hpp"

using namespace vaxcast;

namespace {

double h2(double p) { return p <= 0 || p >= 1 ? 0.0 : -(p * std::log2(p) + (1 - p) * std::log2(1 - p)); }

// Independent 2x2 oracle for a binary feature against the outcome.
struct Table {
  double n[2][2] = {{0, 0}, {0, 0}};  // [feature][outcome]
  double total() const { return n[0][0] + n[0][1] + n[1][0] + n[1][1]; }
  double info_gain() const {
    const double t = total();
    const double py = (n[0][1] + n[1][1]) / t;
    double cond = 0.0;
    for (int x : {0, 1}) {
      const double nx = n[x][0] + n[x][1];
      if (nx > 0) cond += nx / t * h2(n[x][1] / nx);
    }
    return h2(py) - cond;
  }
  double feature_entropy() const { return h2((n[1][0] + n[1][1]) / total()); }
  double outcome_entropy() const { return h2((n[0][1] + n[1][1]) / total()); }
  double chi2() const {
    const double t = total();
    double s = 0.0;
    for (int x : {0, 1})
      for (int y : {0, 1}) {
        const double e = (n[x][0] + n[x][1]) * (n[0][y] + n[1][y]) / t;
        s += (n[x][y] - e) * (n[x][y] - e) / e;
      }
    return s;
  }
};

}  // namespace

TEST_SUITE("selection") {
  TEST_CASE("entropy of the base rate") {
    CHECK(selection::entropy_of(0.418) == doctest::Approx(0.98065).epsilon(1e-4));
    CHECK(selection::entropy_of(0.5) == doctest::Approx(1.0));
    CHECK(selection::entropy_of(0.0) == 0.0);
    const std::vector<std::uint8_t> y{1, 0, 0, 0};
    CHECK(selection::entropy(y) == doctest::Approx(h2(0.25)));
  }

  TEST_CASE("equal frequency binning") {
    std::vector<double> v;
    for (int i = 0; i < 100; ++i) v.push_back(i);
    const auto b = selection::equal_frequency_bins(v, 10);
    CHECK(b.bins() == 10);
    std::vector<int> counts(b.bins(), 0);
    for (double x : v) ++counts[b.bin(x)];
    for (int c : counts) CHECK(c == 10);
    const std::vector<double> constant(50, 3.0);
    CHECK(selection::equal_frequency_bins(constant, 10).bins() == 1);
  }

  TEST_CASE("binary scores match the contingency oracle") {
    const auto d = synth::generate(fixtures::small_generator(5000, 21));
    Table t;
    const auto col = d.column("diabetes");
    for (std::size_t i = 0; i < d.size(); ++i) t.n[static_cast<int>(col[i])][static_cast<int>(d.outcome()[i])] += 1;
    const double ig = t.info_gain();
    using M = selection::RankMethod;
    CHECK(selection::rank(d, "flushot", M::info_gain).score("diabetes") == doctest::Approx(ig).epsilon(1e-12));
    CHECK(selection::rank(d, "flushot", M::gain_ratio).score("diabetes") ==
          doctest::Approx(ig / t.feature_entropy()).epsilon(1e-12));
    CHECK(selection::rank(d, "flushot", M::symmetric_uncertainty).score("diabetes") ==
          doctest::Approx(2 * ig / (t.feature_entropy() + t.outcome_entropy())).epsilon(1e-12));
    CHECK(selection::rank(d, "flushot", M::chi_squared).score("diabetes") == doctest::Approx(t.chi2()).epsilon(1e-10));
  }

  TEST_CASE("informative features rank above noise") {
    const auto d = synth::generate(fixtures::small_generator(20000, 22));
    for (auto m : selection::all_rank_methods()) {
      const auto r = selection::rank(d, "flushot", m);
      CHECK(r.position("diabetes") < 2);
      CHECK(r.position("asthma") < 2);
      CHECK(r.order.size() == d.schema().size());
    }
  }

  TEST_CASE("constant outcome is rejected") {
    const auto s = fixtures::small_schema();
    const auto d = fixtures::from_rows(s, {{30, 1, 0, 0, 0, 1}, {40, 2, 1, 1, 1, 0}}, {1, 1});
    CHECK_THROWS(selection::rank(d, "flushot", selection::RankMethod::info_gain));
  }

  TEST_CASE("method names round trip") {
    for (auto m : selection::all_rank_methods())
      CHECK(selection::parse_rank_method(selection::to_string(m)) == m);
    CHECK_THROWS(selection::parse_rank_method("bogus"));
  }

  TEST_CASE("ranking json round trip") {
    const auto d = synth::generate(fixtures::small_generator(2000, 23));
    const auto r = selection::rank(d, "flushot", selection::RankMethod::gain_ratio);
    const auto back = selection::ranking_from_json(selection::to_json(r));
    CHECK(back.order == r.order);
    CHECK(back.method == r.method);
  }

  TEST_CASE("curve has one point per prefix") {
    const auto train = synth::generate(fixtures::small_generator(3000, 24));
    const auto test = synth::generate(fixtures::small_generator(1000, 25));
    const auto r = selection::rank(train, "flushot", selection::RankMethod::info_gain);
    const std::vector<std::size_t> steps{1, 3, 6};
    const auto curve = selection::incremental_eval(train, test, r, steps, selection::NaiveBayesSpec{});
    REQUIRE(curve.size() == 3);
    CHECK(curve[1].features == std::vector<std::string>(r.order.begin(), r.order.begin() + 3));
    const std::vector<std::size_t> bad{7};
    CHECK_THROWS(selection::incremental_eval(train, test, r, bad, selection::NaiveBayesSpec{}));
  }
}
