#pragma once

#include <cstdint>
#include <vector>

#include "vaxcast/rng.hpp"
#include "vaxcast/synth.hpp"

namespace vaxcast::synth::detail {

// Generator config resolved against the schema: everything indexed by
// feature position so per-record sampling is a flat loop.
struct Plan {
  enum class Kind : std::uint8_t { age, binary, age_linked, continuous, categorical };

  struct Column {
    Kind kind = Kind::binary;
    double p = 0.0;
    double slope = 0.0;
    double offset = 0.0;  // mean age for age-linked features
    ContinuousParams continuous;
    int group = -1;  // categorical block index
  };

  struct Block {
    std::vector<std::size_t> members;
    std::vector<double> cumulative;  // running sum of member probabilities
  };

  std::vector<Column> columns;
  std::vector<Block> blocks;
  std::vector<double> age_cdf;  // cumulative weights, normalized
  int min_age = 18;
  std::size_t age_index = 0;

  std::vector<double> beta;
  std::vector<double> shift;
  double intercept = 0.0;
  double shift_intercept = 0.0;
  int elder_boundary = 60;

  explicit Plan(const GeneratorConfig& config);

  // Fills `row` (schema order) with one complete feature draw.
  void draw_features(Rng& rng, std::vector<double>& row) const;

  double index(const std::vector<double>& row) const;
  double index(const double* row) const;
};

// Row-major feature sample of n records.
struct FeatureSample {
  std::size_t n = 0;
  std::size_t width = 0;
  std::vector<double> values;
  const double* row(std::size_t i) const { return values.data() + i * width; }
};

FeatureSample sample_features(const Plan& plan, std::size_t n, std::uint64_t seed);

}  // namespace vaxcast::synth::detail
