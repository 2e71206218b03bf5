#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vaxcast/data.hpp"

namespace vaxcast::synth {

inline constexpr const char* kIntercept = "intercept";

// Marginal prevalence `p`. With a nonzero `age_slope` the prevalence is linear
// in age, p + age_slope * (age - mean age) / 10, so the population prevalence
// is still exactly `p`; it must stay inside [0, 1] over the age range.
struct BinaryParams {
  double p = 0.0;
  double age_slope = 0.0;
};

// Normal(mean, sd) clamped to [min, max], optionally rounded to a multiple of
// `resolution`.
struct ContinuousParams {
  double mean = 0.0;
  double sd = 1.0;
  double min = 0.0;
  double max = 1.0;
  double resolution = 0.0;
};

using FeatureParams = std::variant<BinaryParams, ContinuousParams>;

// One-hot block: at most one member is 1. Member probabilities come from
// their BinaryParams; the remainder is the omitted reference category.
struct CategoricalGroup {
  std::string name;
  std::vector<std::string> members;
};

// Discrete distribution over consecutive integer ages.
struct AgeDistribution {
  int min_age = 18;
  std::vector<double> weights;

  static AgeDistribution uniform(int lo, int hi);
  int max_age() const noexcept { return min_age + static_cast<int>(weights.size()) - 1; }
  double total() const;
  double mean() const;
};

struct GeneratorConfig {
  Schema schema;
  std::size_t n = 1000;
  int year = 2014;
  std::uint64_t seed = 0;
  std::map<std::string, FeatureParams> feature_params;
  std::vector<CategoricalGroup> categoricals;
  // Probit index weights keyed by feature name, plus "intercept". Age may not
  // carry a weight: the outcome depends on age only through `elder_shift`.
  std::map<std::string, double> latent_coefficients{{kIntercept, 0.0}};
  AgeDistribution age_distribution = AgeDistribution::uniform(18, 90);
  // Added to latent_coefficients for records with age > elder_boundary.
  std::map<std::string, double> elder_shift;
  int elder_boundary = 60;
  // Column name (feature or outcome) -> probability a cell is blanked.
  std::map<std::string, double> missingness;

  // Throws Error("synth", ...) describing the first invalid parameter.
  void validate() const;

  double coefficient(const std::string& name) const;
  double shift(const std::string& name) const;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& doc);
  static GeneratorConfig load(const std::string& path);
};

// Draws `config.n` records. Per record, in order: age, features in schema
// order, the latent noise, then missingness. Deterministic in config.seed.
Dataset generate(const GeneratorConfig& config);

// config.n records per year; year y is drawn with seed derive_seed(config.seed, y).
Dataset generate_years(const GeneratorConfig& config, std::span<const int> years);

// Probit index alpha + x'beta (+ elder shift) of one complete record.
double latent_index(const GeneratorConfig& config, std::span<const double> values);

// Average marginal effects of the true process for binary `features`, over a
// fresh feature sample of size n: mean of Phi(index | x_d = 1) - Phi(index | x_d = 0).
std::map<std::string, double> simulated_ames(const GeneratorConfig& config, std::span<const std::string> features,
                                             std::size_t n, std::uint64_t seed);

// Mean of Phi(index) over a fresh feature sample.
double simulated_prevalence(const GeneratorConfig& config, std::size_t n, std::uint64_t seed);

struct CalibrationOptions {
  std::size_t n = 200000;
  std::uint64_t seed = 20240601;
  double tolerance = 1e-4;  // probability units
  int max_sweeps = 60;
  // When set, the intercept is re-solved every sweep so mean Phi(index) hits it.
  std::optional<double> prevalence;
};

struct CalibrationResult {
  GeneratorConfig config;
  std::map<std::string, double> achieved;
  double achieved_prevalence = 0.0;
  int sweeps = 0;
};

// Coordinate root-finding on each targeted coefficient (AME is monotone in
// its own coefficient) until every simulated AME is within tolerance.
// Throws CalibrationError naming the worst feature when the sweep budget runs out.
CalibrationResult calibrate(const std::map<std::string, double>& targets, const GeneratorConfig& base,
                            const CalibrationOptions& options = {});

GeneratorConfig calibrate_to_targets(const std::map<std::string, double>& targets, const GeneratorConfig& base,
                                     const CalibrationOptions& options = {});

}  // namespace vaxcast::synth
