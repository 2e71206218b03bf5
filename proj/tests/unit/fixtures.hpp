#pragma once

#include <vector>

#include "vaxcast/data.hpp"
#include "vaxcast/synth.hpp"

namespace fixtures {

// Six-column schema: age, income, one education member, one marital member
// and two health flags.
inline vaxcast::Schema small_schema() {
  using vaxcast::FeatureKind;
  return vaxcast::Schema({{"age", FeatureKind::continuous, "demographics", ""},
                          {"income", FeatureKind::continuous, "income", ""},
                          {"post_secondary", FeatureKind::binary, "education", ""},
                          {"married", FeatureKind::binary, "marital", ""},
                          {"diabetes", FeatureKind::binary, "health", ""},
                          {"asthma", FeatureKind::binary, "health", ""}});
}

inline vaxcast::Dataset from_rows(const vaxcast::Schema& schema, const std::vector<std::vector<double>>& rows,
                                  const std::vector<double>& outcome) {
  std::vector<std::vector<double>> columns(schema.size());
  for (const auto& r : rows)
    for (std::size_t j = 0; j < schema.size(); ++j) columns[j].push_back(r[j]);
  std::vector<int> years(rows.size(), 2014);
  std::vector<double> weights(rows.size(), 1.0);
  return vaxcast::Dataset(schema, std::move(columns), outcome, std::move(years), std::move(weights),
                          vaxcast::Source::synthetic);
}

inline vaxcast::synth::GeneratorConfig small_generator(std::size_t n, std::uint64_t seed) {
  vaxcast::synth::GeneratorConfig c;
  c.schema = small_schema();
  c.n = n;
  c.seed = seed;
  c.feature_params["income"] = vaxcast::synth::ContinuousParams{40000, 20000, 0, 200000, 100};
  c.feature_params["post_secondary"] = vaxcast::synth::BinaryParams{0.5};
  c.feature_params["married"] = vaxcast::synth::BinaryParams{0.5};
  c.feature_params["diabetes"] = vaxcast::synth::BinaryParams{0.3};
  c.feature_params["asthma"] = vaxcast::synth::BinaryParams{0.4};
  c.latent_coefficients = {{"intercept", -0.2}, {"diabetes", 0.9}, {"asthma", -0.6}};
  return c;
}

}  // namespace fixtures
