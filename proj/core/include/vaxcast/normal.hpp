#pragma once

namespace vaxcast {

/// Standard normal CDF, accurate to well below 1e-12 absolute.
double norm_cdf(double x) noexcept;

/// Standard normal density.
double norm_pdf(double x) noexcept;

/// log of the standard normal CDF, stable far into the lower tail.
double log_norm_cdf(double x) noexcept;

/// Inverse of norm_cdf by bisection; p must lie in (0, 1).
double norm_quantile(double p);

/// Upper tail P(X > x) of a chi-squared variable with `df` degrees of freedom.
double chi2_sf(double x, double df);

/// Two-sided p-value of a standard normal statistic.
double two_sided_p(double z) noexcept;

}  // namespace vaxcast
