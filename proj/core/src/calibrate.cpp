#include <cmath>
#include <functional>
#include <vector>

#include "synth_internal.hpp"
#include "vaxcast/error.hpp"
#include "vaxcast/normal.hpp"

namespace vaxcast::synth {
namespace {

// Root of an increasing function on [lo, hi] by the Illinois variant of
// regula falsi. Assumes f(lo) <= 0 <= f(hi).
double solve_increasing(const std::function<double(double)>& f, double lo, double hi, double ftol) {
  double flo = f(lo), fhi = f(hi);
  int side = 0;
  for (int it = 0; it < 200; ++it) {
    double x = (lo * fhi - hi * flo) / (fhi - flo);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    const double fx = f(x);
    if (std::fabs(fx) <= ftol || hi - lo < 1e-13) return x;
    if (fx < 0.0) {
      lo = x;
      flo = fx;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = x;
      fhi = fx;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

CalibrationResult calibrate(const std::map<std::string, double>& targets, const GeneratorConfig& base,
                            const CalibrationOptions& options) {
  base.validate();
  if (options.n == 0) throw Error("synth", "calibration sample size must be positive");
  const auto& schema = base.schema;
  struct Target {
    std::string name;
    std::size_t column;
    double value;
  };
  std::vector<Target> list;
  for (const auto& [name, value] : targets) {
    const auto j = schema.index_of(name);
    if (!j) throw Error("synth", "AME target '" + name + "' is not in the schema");
    if (schema.feature(*j).kind != FeatureKind::binary) throw Error("synth", "AME target '" + name + "' is not binary");
    if (!(value > -1.0 && value < 1.0)) throw Error("synth", "AME target for '" + name + "' outside (-1, 1)");
    list.push_back({name, *j, value});
  }
  if (options.prevalence && !(*options.prevalence > 0.0 && *options.prevalence < 1.0))
    throw Error("synth", "prevalence target must lie in (0, 1)");

  CalibrationResult result{base, {}, 0.0, 0};
  auto& config = result.config;
  detail::Plan plan(config);
  const auto sample = detail::sample_features(plan, options.n, options.seed);
  const std::size_t n = sample.n;
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> eta(n);
  std::vector<bool> elder(n);
  for (std::size_t i = 0; i < n; ++i) {
    eta[i] = plan.index(sample.row(i));
    elder[i] = sample.row(i)[plan.age_index] > plan.elder_boundary;
  }

  auto ame_of = [&](const Target& t, std::vector<double>* base_out) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = plan.beta[t.column] + (elder[i] ? plan.shift[t.column] : 0.0);
      const double b = eta[i] - w * sample.row(i)[t.column];
      if (base_out) (*base_out)[i] = b;
      acc += norm_cdf(b + w) - norm_cdf(b);
    }
    return static_cast<double>(acc) * inv_n;
  };
  auto prevalence_of = [&]() {
    long double acc = 0.0L;
    for (double e : eta) acc += norm_cdf(e);
    return static_cast<double>(acc) * inv_n;
  };

  const double ftol = options.tolerance * 0.05;
  std::vector<double> base_eta(n);
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    result.sweeps = sweep;
    if (options.prevalence) {
      const double target = *options.prevalence;
      const std::vector<double> start = eta;
      auto f = [&](double delta) {
        long double acc = 0.0L;
        for (double e : start) acc += norm_cdf(e + delta);
        return static_cast<double>(acc) * inv_n - target;
      };
      const double delta = solve_increasing(f, -12.0, 12.0, ftol);
      for (std::size_t i = 0; i < n; ++i) eta[i] = start[i] + delta;
      plan.intercept += delta;
    }
    for (const auto& t : list) {
      if (std::fabs(ame_of(t, &base_eta) - t.value) <= ftol) continue;
      long double base_mass = 0.0L;
      for (double b : base_eta) base_mass += norm_cdf(b);
      const double mass = static_cast<double>(base_mass) * inv_n;
      const double shift = plan.shift[t.column];
      auto f = [&](double beta) {
        long double acc = 0.0L;
        for (std::size_t i = 0; i < n; ++i) acc += norm_cdf(base_eta[i] + beta + (elder[i] ? shift : 0.0));
        return static_cast<double>(acc) * inv_n - mass - t.value;
      };
      double lo = -8.0, hi = 8.0;
      if (f(lo) > 0.0 || f(hi) < 0.0) throw CalibrationError("AME target for '" + t.name + "' is unreachable", t.name);
      const double beta = solve_increasing(f, lo, hi, ftol);
      plan.beta[t.column] = beta;
      for (std::size_t i = 0; i < n; ++i)
        eta[i] = base_eta[i] + (beta + (elder[i] ? shift : 0.0)) * sample.row(i)[t.column];
    }

    double worst = 0.0;
    std::string worst_name;
    result.achieved.clear();
    for (const auto& t : list) {
      const double ame = ame_of(t, nullptr);
      result.achieved[t.name] = ame;
      if (std::fabs(ame - t.value) > worst) {
        worst = std::fabs(ame - t.value);
        worst_name = t.name;
      }
    }
    result.achieved_prevalence = prevalence_of();
    if (options.prevalence && std::fabs(result.achieved_prevalence - *options.prevalence) > worst) {
      worst = std::fabs(result.achieved_prevalence - *options.prevalence);
      worst_name = kIntercept;
    }
    if (worst <= options.tolerance) {
      config.latent_coefficients[kIntercept] = plan.intercept;
      for (const auto& t : list) config.latent_coefficients[t.name] = plan.beta[t.column];
      return result;
    }
    if (sweep == options.max_sweeps)
      throw CalibrationError("calibration did not converge; worst feature '" + worst_name + "' off by " +
                                 std::to_string(worst),
                             worst_name);
  }
  throw CalibrationError("calibration did not run", "");
}

GeneratorConfig calibrate_to_targets(const std::map<std::string, double>& targets, const GeneratorConfig& base,
                                     const CalibrationOptions& options) {
  return calibrate(targets, base, options).config;
}

}  // namespace vaxcast::synth
