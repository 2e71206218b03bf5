#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "synth_internal.hpp"
#include "vaxcast/error.hpp"
#include "vaxcast/normal.hpp"

namespace vaxcast::synth {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw Error("synth", message); }

bool in_unit(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

AgeDistribution AgeDistribution::uniform(int lo, int hi) {
  AgeDistribution d;
  d.min_age = lo;
  d.weights.assign(static_cast<std::size_t>(hi - lo + 1), 1.0);
  return d;
}

double AgeDistribution::total() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

double AgeDistribution::mean() const {
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) acc += weights[k] * static_cast<double>(min_age + static_cast<int>(k));
  return acc / total();
}

double GeneratorConfig::coefficient(const std::string& name) const {
  const auto it = latent_coefficients.find(name);
  return it == latent_coefficients.end() ? 0.0 : it->second;
}

double GeneratorConfig::shift(const std::string& name) const {
  const auto it = elder_shift.find(name);
  return it == elder_shift.end() ? 0.0 : it->second;
}

void GeneratorConfig::validate() const {
  if (n == 0) fail("n must be at least 1");
  if (year < 2009 || year > 2014) fail("year must be in [2009, 2014]");
  if (schema.size() == 0) fail("config has an empty schema");

  if (age_distribution.weights.empty()) fail("age distribution is empty");
  if (age_distribution.min_age < 12 || age_distribution.max_age() > 110)
    fail("age distribution must lie within [12, 110]");
  for (double w : age_distribution.weights)
    if (!(w >= 0.0) || !std::isfinite(w)) fail("age distribution weights must be nonnegative");
  if (!(age_distribution.total() > 0.0)) fail("age distribution has zero mass");

  for (const auto& [name, params] : feature_params) {
    const auto j = schema.index_of(name);
    if (!j) fail("feature_params names unknown feature '" + name + "'");
    if (*j == schema.age_index()) fail("age is drawn from age_distribution, not feature_params");
    const bool binary = schema.feature(*j).kind == FeatureKind::binary;
    if (binary != std::holds_alternative<BinaryParams>(params))
      fail("parameters for '" + name + "' do not match its kind");
    if (const auto* b = std::get_if<BinaryParams>(&params)) {
      if (!in_unit(b->p)) fail("Bernoulli p for '" + name + "' outside [0, 1]");
      if (!std::isfinite(b->age_slope)) fail("age_slope for '" + name + "' is not finite");
      if (b->age_slope != 0.0) {
        const double mean = age_distribution.mean();
        for (const int age : {age_distribution.min_age, age_distribution.max_age()})
          if (!in_unit(b->p + b->age_slope * (age - mean) / 10.0))
            fail("age-linked prevalence of '" + name + "' leaves [0, 1] at age " + std::to_string(age));
      }
    } else {
      const auto& c = std::get<ContinuousParams>(params);
      if (!std::isfinite(c.mean) || !(c.sd >= 0.0) || !(c.min <= c.max) || !(c.resolution >= 0.0))
        fail("invalid continuous parameters for '" + name + "'");
    }
  }
  for (std::size_t j = 0; j < schema.size(); ++j)
    if (j != schema.age_index() && !feature_params.contains(schema.feature(j).name))
      fail("no parameters for feature '" + schema.feature(j).name + "'");

  std::set<std::string> grouped;
  for (const auto& g : categoricals) {
    double sum = 0.0;
    for (const auto& m : g.members) {
      const auto it = feature_params.find(m);
      if (it == feature_params.end()) fail("categorical '" + g.name + "' member '" + m + "' has no parameters");
      const auto* b = std::get_if<BinaryParams>(&it->second);
      if (!b) fail("categorical member '" + m + "' must be binary");
      if (b->age_slope != 0.0) fail("categorical member '" + m + "' cannot be age-linked");
      if (!grouped.insert(m).second) fail("feature '" + m + "' belongs to two categorical groups");
      sum += b->p;
    }
    if (sum > 1.0 + 1e-12) fail("member probabilities of '" + g.name + "' sum above 1");
  }

  if (!latent_coefficients.contains(kIntercept)) fail("latent_coefficients lacks 'intercept'");
  for (const auto* table : {&latent_coefficients, &elder_shift}) {
    for (const auto& [name, value] : *table) {
      if (!std::isfinite(value)) fail("coefficient for '" + name + "' is not finite");
      if (name == kIntercept) continue;
      const auto j = schema.index_of(name);
      if (!j) fail("coefficient names unknown feature '" + name + "'");
      if (*j == schema.age_index()) fail("age may not carry a latent coefficient; use elder_shift");
    }
  }
  for (const auto& [name, rate] : missingness) {
    if (!in_unit(rate)) fail("missingness rate for '" + name + "' outside [0, 1]");
    if (name == schema.outcome_name()) continue;
    const auto j = schema.index_of(name);
    if (!j) fail("missingness names unknown column '" + name + "'");
    if (*j == schema.age_index()) fail("age cannot be missing");
  }
}

namespace detail {

Plan::Plan(const GeneratorConfig& config) {
  config.validate();
  const auto& schema = config.schema;
  const std::size_t width = schema.size();
  columns.resize(width);
  beta.assign(width, 0.0);
  shift.assign(width, 0.0);
  age_index = schema.age_index();
  min_age = config.age_distribution.min_age;
  elder_boundary = config.elder_boundary;
  intercept = config.coefficient(kIntercept);
  shift_intercept = config.shift(kIntercept);

  const double total = config.age_distribution.total();
  double run = 0.0;
  for (double w : config.age_distribution.weights) {
    run += w;
    age_cdf.push_back(run / total);
  }
  age_cdf.back() = 1.0;

  for (const auto& g : config.categoricals) {
    Block block;
    double cum = 0.0;
    for (const auto& m : g.members) {
      const std::size_t j = schema.require(m);
      cum += std::get<BinaryParams>(config.feature_params.at(m)).p;
      block.members.push_back(j);
      block.cumulative.push_back(cum);
      columns[j].kind = Kind::categorical;
      columns[j].group = static_cast<int>(blocks.size());
    }
    blocks.push_back(std::move(block));
  }

  for (std::size_t j = 0; j < width; ++j) {
    const auto& name = schema.feature(j).name;
    beta[j] = config.coefficient(name);
    shift[j] = config.shift(name);
    auto& col = columns[j];
    if (j == age_index) {
      col.kind = Kind::age;
      continue;
    }
    if (col.kind == Kind::categorical) continue;
    const auto& params = config.feature_params.at(name);
    if (const auto* b = std::get_if<BinaryParams>(&params)) {
      col.p = b->p;
      col.slope = b->age_slope;
      col.kind = b->age_slope != 0.0 ? Kind::age_linked : Kind::binary;
      if (col.kind == Kind::age_linked) col.offset = config.age_distribution.mean();
    } else {
      col.kind = Kind::continuous;
      col.continuous = std::get<ContinuousParams>(params);
    }
  }
}

void Plan::draw_features(Rng& rng, std::vector<double>& row) const {
  row.assign(columns.size(), 0.0);
  const double u_age = rng.uniform();
  const auto age_pos = static_cast<std::size_t>(std::upper_bound(age_cdf.begin(), age_cdf.end(), u_age) - age_cdf.begin());
  const double age = min_age + static_cast<double>(std::min(age_pos, age_cdf.size() - 1));
  row[age_index] = age;

  std::vector<bool> block_done(blocks.size(), false);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto& col = columns[j];
    switch (col.kind) {
      case Kind::age:
        break;
      case Kind::binary:
        row[j] = rng.uniform() < col.p ? 1.0 : 0.0;
        break;
      case Kind::age_linked:
        row[j] = rng.uniform() < col.p + col.slope * (age - col.offset) / 10.0 ? 1.0 : 0.0;
        break;
      case Kind::continuous: {
        const auto& c = col.continuous;
        double v = c.mean + c.sd * rng.normal();
        if (c.resolution > 0.0) v = std::round(v / c.resolution) * c.resolution;
        row[j] = std::clamp(v, c.min, c.max);
        break;
      }
      case Kind::categorical: {
        const auto g = static_cast<std::size_t>(col.group);
        if (block_done[g]) break;
        block_done[g] = true;
        const auto& block = blocks[g];
        const double u = rng.uniform();
        for (std::size_t k = 0; k < block.members.size(); ++k) {
          if (u < block.cumulative[k]) {
            row[block.members[k]] = 1.0;
            break;
          }
        }
        break;
      }
    }
  }
}

double Plan::index(const double* row) const {
  const bool elder = row[age_index] > elder_boundary;
  double eta = intercept + (elder ? shift_intercept : 0.0);
  for (std::size_t j = 0; j < beta.size(); ++j) {
    const double w = beta[j] + (elder ? shift[j] : 0.0);
    if (w != 0.0) eta += w * row[j];
  }
  return eta;
}

double Plan::index(const std::vector<double>& row) const { return index(row.data()); }

FeatureSample sample_features(const Plan& plan, std::size_t n, std::uint64_t seed) {
  FeatureSample s;
  s.n = n;
  s.width = plan.columns.size();
  s.values.resize(n * s.width);
  Rng rng(seed);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    plan.draw_features(rng, row);
    std::copy(row.begin(), row.end(), s.values.begin() + static_cast<std::ptrdiff_t>(i * s.width));
  }
  return s;
}

}  // namespace detail

Dataset generate(const GeneratorConfig& config) {
  const detail::Plan plan(config);
  const auto& schema = config.schema;
  const std::size_t n = config.n;
  const std::size_t width = schema.size();

  // Missingness columns in a fixed order: schema order, then the outcome.
  std::vector<std::pair<std::size_t, double>> blank;  // (column, rate); width means outcome
  for (std::size_t j = 0; j < width; ++j)
    if (auto it = config.missingness.find(schema.feature(j).name); it != config.missingness.end() && it->second > 0.0)
      blank.emplace_back(j, it->second);
  if (auto it = config.missingness.find(schema.outcome_name()); it != config.missingness.end() && it->second > 0.0)
    blank.emplace_back(width, it->second);

  std::vector<std::vector<double>> columns(width, std::vector<double>(n));
  std::vector<double> outcome(n);
  Rng rng(config.seed);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    plan.draw_features(rng, row);
    const double latent = plan.index(row) + rng.normal();
    double y = latent > 0.0 ? 1.0 : 0.0;
    for (const auto& [j, rate] : blank) {
      if (rng.uniform() < rate) {
        if (j == width)
          y = kMissing;
        else
          row[j] = kMissing;
      }
    }
    for (std::size_t j = 0; j < width; ++j) columns[j][i] = row[j];
    outcome[i] = y;
  }
  return Dataset(schema, std::move(columns), std::move(outcome), std::vector<int>(n, config.year),
                 std::vector<double>(n, 1.0), Source::synthetic);
}

Dataset generate_years(const GeneratorConfig& config, std::span<const int> years) {
  if (years.empty()) throw Error("synth", "no years requested");
  std::vector<Dataset> parts;
  for (const int y : years) {
    auto c = config;
    c.year = y;
    c.seed = derive_seed(config.seed, static_cast<std::uint64_t>(y));
    parts.push_back(generate(c));
  }
  return Dataset::concat(parts);
}

double latent_index(const GeneratorConfig& config, std::span<const double> values) {
  const detail::Plan plan(config);
  if (values.size() != plan.columns.size()) throw Error("synth", "record width does not match schema");
  return plan.index(values.data());
}

std::map<std::string, double> simulated_ames(const GeneratorConfig& config, std::span<const std::string> features,
                                             std::size_t n, std::uint64_t seed) {
  const detail::Plan plan(config);
  const auto sample = detail::sample_features(plan, n, seed);
  std::map<std::string, double> out;
  for (const auto& name : features) {
    const std::size_t d = config.schema.require(name);
    if (config.schema.feature(d).kind != FeatureKind::binary)
      throw Error("synth", "AME target '" + name + "' is not binary");
    long double acc = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = sample.row(i);
      const bool elder = row[plan.age_index] > plan.elder_boundary;
      const double w = plan.beta[d] + (elder ? plan.shift[d] : 0.0);
      const double without = plan.index(row) - w * row[d];
      acc += norm_cdf(without + w) - norm_cdf(without);
    }
    out[name] = static_cast<double>(acc / static_cast<long double>(n));
  }
  return out;
}

double simulated_prevalence(const GeneratorConfig& config, std::size_t n, std::uint64_t seed) {
  const detail::Plan plan(config);
  const auto sample = detail::sample_features(plan, n, seed);
  long double acc = 0.0L;
  for (std::size_t i = 0; i < n; ++i) acc += norm_cdf(plan.index(sample.row(i)));
  return static_cast<double>(acc / static_cast<long double>(n));
}

json GeneratorConfig::to_json() const {
  json features = json::object();
  for (const auto& [name, params] : feature_params) {
    if (const auto* b = std::get_if<BinaryParams>(&params)) {
      json entry = {{"p", b->p}};
      if (b->age_slope != 0.0) entry["age_slope"] = b->age_slope;
      features[name] = std::move(entry);
    } else {
      const auto& c = std::get<ContinuousParams>(params);
      json entry = {{"mean", c.mean}, {"sd", c.sd}, {"min", c.min}, {"max", c.max}};
      if (c.resolution > 0.0) entry["resolution"] = c.resolution;
      features[name] = std::move(entry);
    }
  }
  json cats = json::array();
  for (const auto& g : categoricals) cats.push_back({{"name", g.name}, {"members", g.members}});
  return {{"schema", schema.to_json()},
          {"n", n},
          {"year", year},
          {"seed", seed},
          {"feature_params", std::move(features)},
          {"categoricals", std::move(cats)},
          {"latent_coefficients", latent_coefficients},
          {"age_distribution", {{"min_age", age_distribution.min_age}, {"weights", age_distribution.weights}}},
          {"elder_shift", elder_shift},
          {"elder_boundary", elder_boundary},
          {"missingness", missingness}};
}

GeneratorConfig GeneratorConfig::from_json(const json& doc) {
  GeneratorConfig c;
  try {
    c.schema = Schema::from_json(doc.at("schema"));
    c.n = doc.value("n", c.n);
    c.year = doc.value("year", c.year);
    c.seed = doc.value("seed", c.seed);
    for (const auto& [name, entry] : doc.at("feature_params").items()) {
      if (entry.contains("p")) {
        c.feature_params[name] = BinaryParams{entry.at("p").get<double>(), entry.value("age_slope", 0.0)};
      } else {
        c.feature_params[name] =
            ContinuousParams{entry.at("mean").get<double>(), entry.at("sd").get<double>(), entry.at("min").get<double>(),
                             entry.at("max").get<double>(), entry.value("resolution", 0.0)};
      }
    }
    for (const auto& g : doc.value("categoricals", json::array()))
      c.categoricals.push_back({g.at("name").get<std::string>(), g.at("members").get<std::vector<std::string>>()});
    c.latent_coefficients = doc.at("latent_coefficients").get<std::map<std::string, double>>();
    if (doc.contains("age_distribution")) {
      const auto& a = doc.at("age_distribution");
      c.age_distribution.min_age = a.at("min_age").get<int>();
      c.age_distribution.weights = a.at("weights").get<std::vector<double>>();
    }
    c.elder_shift = doc.value("elder_shift", std::map<std::string, double>{});
    c.elder_boundary = doc.value("elder_boundary", c.elder_boundary);
    c.missingness = doc.value("missingness", std::map<std::string, double>{});
  } catch (const json::exception& e) {
    throw Error("synth", std::string("malformed generator config: ") + e.what());
  }
  c.validate();
  return c;
}

GeneratorConfig GeneratorConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open generator config '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("generator config '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

}  // namespace vaxcast::synth
