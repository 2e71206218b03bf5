#include <cmath>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "fixtures.hpp"
#include "vaxcast/error.hpp"
#include "vaxcast/normal.hpp"
#include "vaxcast/synth.hpp"

using namespace vaxcast;

namespace {

bool same(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t j = 0; j < a.schema().size(); ++j)
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double x = a.value(i, j), y = b.value(i, j);
      if (!(x == y || (is_missing(x) && is_missing(y)))) return false;
    }
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a.outcome()[i] == b.outcome()[i] || (is_missing(a.outcome()[i]) && is_missing(b.outcome()[i]))))
      return false;
  return true;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("generation is a pure function of the seed") {
    auto c = fixtures::small_generator(2000, 42);
    c.missingness = {{"income", 0.05}};
    CHECK(same(synth::generate(c), synth::generate(c)));
    auto other = c;
    other.seed = 43;
    CHECK_FALSE(same(synth::generate(c), synth::generate(other)));
  }

  TEST_CASE("outcome rate matches the simulated prevalence") {
    const auto c = fixtures::small_generator(100000, 1);
    const auto d = synth::generate(c);
    double ones = 0.0;
    for (double y : d.outcome()) ones += y;
    const double expected = synth::simulated_prevalence(c, 200000, 2);
    // Closed form for independent binaries: average of Phi over the four cells.
    double exact = 0.0;
    for (int a : {0, 1})
      for (int b : {0, 1})
        exact += (a ? 0.3 : 0.7) * (b ? 0.4 : 0.6) * norm_cdf(-0.2 + 0.9 * a - 0.6 * b);
    CHECK(expected == doctest::Approx(exact).epsilon(0.01));
    CHECK(ones / d.size() == doctest::Approx(exact).epsilon(0.02));
  }

  TEST_CASE("continuous draws respect clamp and resolution") {
    const auto d = synth::generate(fixtures::small_generator(5000, 3));
    for (double v : d.column("income")) {
      CHECK(v >= 0.0);
      CHECK(v <= 200000.0);
      CHECK(std::fmod(v, 100.0) == doctest::Approx(0.0));
    }
    for (double a : d.ages()) {
      CHECK(a >= 18);
      CHECK(a <= 90);
    }
  }

  TEST_CASE("categorical members are mutually exclusive") {
    using K = FeatureKind;
    synth::GeneratorConfig c;
    c.schema = Schema({{"age", K::continuous, "demographics", ""},
                       {"a", K::binary, "block", ""},
                       {"b", K::binary, "block", ""},
                       {"c", K::binary, "block", ""}});
    c.n = 20000;
    c.feature_params = {{"a", synth::BinaryParams{0.2}}, {"b", synth::BinaryParams{0.3}},
                        {"c", synth::BinaryParams{0.4}}};
    c.categoricals = {{"block", {"a", "b", "c"}}};
    const auto d = synth::generate(c);
    double share_b = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(d.value(i, 1) + d.value(i, 2) + d.value(i, 3) <= 1.0);
      share_b += d.value(i, 2);
    }
    CHECK(share_b / d.size() == doctest::Approx(0.3).epsilon(0.05));
  }

  TEST_CASE("elder shift applies strictly above the boundary") {
    auto c = fixtures::small_generator(1, 0);
    c.elder_shift = {{"intercept", 1.0}};
    std::vector<double> rec{60, 1000, 0, 0, 0, 0};
    CHECK(synth::latent_index(c, rec) == doctest::Approx(-0.2));
    rec[0] = 61;
    CHECK(synth::latent_index(c, rec) == doctest::Approx(0.8));
  }

  TEST_CASE("age-linked prevalence must stay a probability") {
    auto c = fixtures::small_generator(10, 0);
    c.feature_params["diabetes"] = synth::BinaryParams{0.3, 0.2};
    CHECK_THROWS_AS(c.validate(), Error);
    c.feature_params["diabetes"] = synth::BinaryParams{0.3, 0.05};
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("age cannot carry a latent coefficient") {
    auto c = fixtures::small_generator(10, 0);
    c.latent_coefficients["age"] = 0.01;
    CHECK_THROWS_AS(c.validate(), Error);
  }

  TEST_CASE("config json round trip") {
    auto c = fixtures::small_generator(10, 9);
    c.elder_shift = {{"diabetes", 0.2}};
    const auto back = synth::GeneratorConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
  }

  TEST_CASE("single AME target has a closed-form coefficient") {
    // With intercept 0 and nothing else in the index, AME = Phi(b) - 1/2.
    auto c = fixtures::small_generator(10, 0);
    c.latent_coefficients = {{"intercept", 0.0}};
    const std::map<std::string, double> targets{{"diabetes", 0.3413}};
    synth::CalibrationOptions opt;
    opt.n = 20000;
    const auto r = synth::calibrate(targets, c, opt);
    CHECK(r.config.coefficient("diabetes") == doctest::Approx(norm_quantile(0.8413)).epsilon(1e-3));
    CHECK(r.achieved.at("diabetes") == doctest::Approx(0.3413).epsilon(1e-3));
  }

  TEST_CASE("prevalence target solves the intercept") {
    auto c = fixtures::small_generator(10, 0);
    c.latent_coefficients = {{"intercept", 0.0}};
    const std::map<std::string, double> targets{{"diabetes", 0.0}};
    synth::CalibrationOptions opt;
    opt.n = 20000;
    opt.prevalence = 0.418;
    const auto r = synth::calibrate(targets, c, opt);
    CHECK(r.config.coefficient("intercept") == doctest::Approx(norm_quantile(0.418)).epsilon(1e-3));
    CHECK(r.achieved_prevalence == doctest::Approx(0.418).epsilon(1e-3));
  }

  TEST_CASE("unreachable target names the feature") {
    auto c = fixtures::small_generator(10, 0);
    const std::map<std::string, double> targets{{"diabetes", 0.9}};
    synth::CalibrationOptions opt;
    opt.n = 2000;
    try {
      synth::calibrate(targets, c, opt);
      FAIL("expected CalibrationError");
    } catch (const CalibrationError& e) {
      CHECK(e.worst_feature() == "diabetes");
    }
  }
}
