#include "vaxcast/normal.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "vaxcast/error.hpp"

namespace vaxcast {

double norm_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_pdf(double x) noexcept {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double log_norm_cdf(double x) noexcept {
  if (x > -30.0) return std::log(norm_cdf(x));
  // Lower-tail asymptotic series; relative error below 1e-12 for x <= -30.
  const double inv2 = 1.0 / (x * x);
  const double series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
  return -0.5 * x * x - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("probit", "norm_quantile needs p in (0, 1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (norm_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double chi2_sf(double x, double df) {
  if (!(df > 0.0)) throw Error("probit", "chi-squared needs df > 0");
  if (!(x > 0.0)) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double two_sided_p(double z) noexcept { return std::erfc(std::fabs(z) / std::numbers::sqrt2); }

}  // namespace vaxcast
