#include "vaxcast/probit.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "vaxcast/error.hpp"
#include "vaxcast/normal.hpp"

namespace vaxcast::probit {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

// phi(z) / Phi(z), computed in log space so it stays finite deep in the tail.
double mills(double z) noexcept {
  if (z > -5.0) return norm_pdf(z) / norm_cdf(z);
  return std::exp(-0.5 * z * z - 0.9189385332046727418 - log_norm_cdf(z));
}

struct Design {
  MatrixXd x;
  VectorXd y;
  VectorXd scale;  // per column; x has already been divided by it
};

Design build_design(const Dataset& data, std::span<const std::string> terms, const std::string& outcome) {
  const auto& schema = data.schema();
  if (outcome != schema.outcome_name())
    throw SchemaMismatchError("outcome '" + outcome + "' is not the schema outcome '" + schema.outcome_name() + "'");
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto p = static_cast<Eigen::Index>(terms.size()) + 1;
  if (n <= p)
    throw Error("probit", "need more observations (" + std::to_string(n) + ") than terms (" + std::to_string(p) + ")");
  Design d{MatrixXd(n, p), VectorXd(n), VectorXd::Ones(p)};
  d.x.col(0).setOnes();
  for (Eigen::Index k = 1; k < p; ++k) {
    const auto& name = terms[static_cast<std::size_t>(k - 1)];
    if (name == kIntercept) throw Error("probit", "the intercept is added automatically");
    const auto col = data.column(schema.require(name));
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = col[static_cast<std::size_t>(i)];
      if (is_missing(v)) throw Error("probit", "missing value in '" + name + "' at row " + std::to_string(i));
      d.x(i, k) = v;
      ss += v * v;
    }
    const double rms = std::sqrt(ss / static_cast<double>(n));
    if (!(rms > 0.0)) throw SeparationError("term '" + name + "' is identically zero; Hessian is singular");
    d.scale(k) = rms;
    d.x.col(k) /= rms;
  }
  const auto y = data.outcome();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = y[static_cast<std::size_t>(i)];
    if (is_missing(v)) throw Error("probit", "missing outcome at row " + std::to_string(i));
    d.y(i) = v;
  }
  return d;
}

std::vector<std::string> with_intercept(std::span<const std::string> terms) {
  std::vector<std::string> out{kIntercept};
  out.insert(out.end(), terms.begin(), terms.end());
  return out;
}

}  // namespace

Likelihood::Likelihood(MatrixXd design, VectorXd outcome) : design_(std::move(design)), outcome_(std::move(outcome)) {
  if (design_.rows() != outcome_.size()) throw Error("probit", "design and outcome lengths differ");
}

double Likelihood::value(const VectorXd& beta) const {
  const VectorXd eta = design_ * beta;
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double q = outcome_(i) != 0.0 ? 1.0 : -1.0;
    acc += log_norm_cdf(q * eta(i));
  }
  return static_cast<double>(acc);
}

VectorXd Likelihood::gradient(const VectorXd& beta) const {
  const VectorXd eta = design_ * beta;
  VectorXd lambda(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double q = outcome_(i) != 0.0 ? 1.0 : -1.0;
    lambda(i) = q * mills(q * eta(i));
  }
  return design_.transpose() * lambda;
}

MatrixXd Likelihood::hessian(const VectorXd& beta) const {
  const VectorXd eta = design_ * beta;
  VectorXd w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double q = outcome_(i) != 0.0 ? 1.0 : -1.0;
    const double lambda = q * mills(q * eta(i));
    w(i) = lambda * (lambda + eta(i));
  }
  MatrixXd h = MatrixXd::Zero(beta.size(), beta.size());
  h.selfadjointView<Eigen::Lower>().rankUpdate(design_.transpose() * w.cwiseSqrt().asDiagonal());
  h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
  return -h;
}

double null_log_likelihood(std::span<const double> outcome) {
  double ones = 0.0;
  for (double v : outcome) ones += v;
  const double n = static_cast<double>(outcome.size());
  const double zeros = n - ones;
  double ll = 0.0;
  if (ones > 0.0) ll += ones * std::log(ones / n);
  if (zeros > 0.0) ll += zeros * std::log(zeros / n);
  return ll;
}

std::optional<std::size_t> ProbitFit::term_index(std::string_view term) const {
  for (std::size_t k = 0; k < terms.size(); ++k)
    if (terms[k] == term) return k;
  return std::nullopt;
}

double ProbitFit::coefficient(std::string_view term) const {
  const auto k = term_index(term);
  if (!k) throw Error("probit", "term '" + std::string(term) + "' not in fit");
  return coefficients(static_cast<Eigen::Index>(*k));
}

double ProbitFit::std_error(std::string_view term) const {
  const auto k = term_index(term);
  if (!k) throw Error("probit", "term '" + std::string(term) + "' not in fit");
  const auto i = static_cast<Eigen::Index>(*k);
  return std::sqrt(std::max(0.0, covariance(i, i)));
}

ProbitFit fit(const Dataset& data, std::span<const std::string> terms, const std::string& outcome,
              const FitOptions& options) {
  const Design design = build_design(data, terms, outcome);
  const Likelihood lik(design.x, design.y);
  const auto p = design.x.cols();

  ProbitFit out;
  out.terms = with_intercept(terms);
  out.outcome = outcome;
  out.n_used = data.size();
  out.null_log_likelihood = null_log_likelihood(data.outcome());

  const double ybar = design.y.mean();
  if (ybar <= 0.0 || ybar >= 1.0) throw SeparationError("outcome is constant; intercept diverges");

  VectorXd beta = VectorXd::Zero(p);
  beta(0) = norm_quantile(ybar);
  double ll = lik.value(beta);

  auto check_hessian = [&](const MatrixXd& neg_h) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(neg_h, Eigen::EigenvaluesOnly);
    const double hi = eig.eigenvalues().maxCoeff();
    const double lo = eig.eigenvalues().minCoeff();
    if (!(hi > 0.0) || lo <= hi * 1e-12) throw SeparationError("Hessian is numerically singular");
  };

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    out.iterations = iter;
    const VectorXd g = lik.gradient(beta);
    const MatrixXd neg_h = -lik.hessian(beta);
    check_hessian(neg_h);
    const VectorXd step = neg_h.ldlt().solve(g);

    double t = 1.0;
    VectorXd trial = beta + step;
    double trial_ll = lik.value(trial);
    int halvings = 0;
    while (!(trial_ll >= ll) && halvings < options.max_halvings) {
      t *= 0.5;
      trial = beta + t * step;
      trial_ll = lik.value(trial);
      ++halvings;
    }
    if (!(trial_ll >= ll)) {
      // No ascent along the Newton direction: we are at the optimum to
      // within floating-point resolution of the log-likelihood.
      if (step.cwiseAbs().maxCoeff() > 1.0)
        throw SeparationError("likelihood is flat along a diverging direction; data are (quasi-)separated");
      out.converged = 0.5 * g.dot(step) < options.tolerance;
      break;
    }
    const double change = trial_ll - ll;
    const double moved = t * step.cwiseAbs().maxCoeff();
    beta = trial;
    ll = trial_ll;

    const double max_index = (design.x * beta).cwiseAbs().maxCoeff();
    if (ll > -1e-12) throw SeparationError("every record is fitted with probability 1; data are separated");
    if (max_index > options.separation_index)
      throw SeparationError("linear index reached " + std::to_string(max_index) +
                            " while the likelihood was still rising; data are (quasi-)separated");
    if (std::fabs(change) < options.tolerance && moved < options.step_tolerance) {
      out.converged = true;
      break;
    }
  }

  const MatrixXd neg_h = -lik.hessian(beta);
  check_hessian(neg_h);
  const MatrixXd cov_scaled = neg_h.ldlt().solve(MatrixXd::Identity(p, p));
  const VectorXd inv_scale = design.scale.cwiseInverse();
  out.coefficients = beta.cwiseProduct(inv_scale);
  out.covariance = inv_scale.asDiagonal() * cov_scaled * inv_scale.asDiagonal();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  out.log_likelihood = ll;
  out.pseudo_r2 = out.null_log_likelihood < 0.0 ? 1.0 - ll / out.null_log_likelihood : 0.0;
  return out;
}

std::string_view to_string(Significance s) noexcept {
  switch (s) {
    case Significance::one_percent:
      return "1%";
    case Significance::five_percent:
      return "5%";
    case Significance::ten_percent:
      return "10%";
    case Significance::none:
      break;
  }
  return "none";
}

Significance significance_of(double p_value) noexcept {
  if (p_value < 0.01) return Significance::one_percent;
  if (p_value < 0.05) return Significance::five_percent;
  if (p_value < 0.10) return Significance::ten_percent;
  return Significance::none;
}

std::vector<TermStats> marginal_effects(const ProbitFit& fit, const Dataset& data) {
  if (!fit.converged) throw Error("probit", "marginal effects need a converged fit");
  const auto& schema = data.schema();
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto p = static_cast<Eigen::Index>(fit.terms.size());
  if (n == 0) throw Error("probit", "marginal effects need a non-empty dataset");

  MatrixXd x(n, p);
  x.col(0).setOnes();
  std::vector<bool> binary(static_cast<std::size_t>(p), false);
  for (Eigen::Index k = 1; k < p; ++k) {
    const std::size_t j = schema.require(fit.terms[static_cast<std::size_t>(k)]);
    binary[static_cast<std::size_t>(k)] = schema.feature(j).kind == FeatureKind::binary;
    const auto col = data.column(j);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = col[static_cast<std::size_t>(i)];
      if (is_missing(v)) throw Error("probit", "missing value in '" + fit.terms[static_cast<std::size_t>(k)] + "'");
      x(i, k) = v;
    }
  }
  const VectorXd& beta = fit.coefficients;
  const VectorXd eta = x * beta;
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<TermStats> out;
  VectorXd weights(n);
  for (Eigen::Index k = 1; k < p; ++k) {
    TermStats s;
    s.term = fit.terms[static_cast<std::size_t>(k)];
    s.estimate = beta(k);
    s.std_error = std::sqrt(std::max(0.0, fit.covariance(k, k)));
    s.t_stat = s.std_error > 0.0 ? s.estimate / s.std_error : 0.0;

    VectorXd grad;
    if (binary[static_cast<std::size_t>(k)]) {
      long double ame = 0.0L, dens_one = 0.0L;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double one = eta(i) + beta(k) * (1.0 - x(i, k));
        const double zero = eta(i) - beta(k) * x(i, k);
        ame += norm_cdf(one) - norm_cdf(zero);
        const double f1 = norm_pdf(one), f0 = norm_pdf(zero);
        weights(i) = f1 - f0;
        dens_one += f1;
      }
      s.ame = static_cast<double>(ame) * inv_n;
      grad = x.transpose() * weights * inv_n;
      grad(k) = static_cast<double>(dens_one) * inv_n;
    } else {
      long double dens = 0.0L;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double f = norm_pdf(eta(i));
        dens += f;
        weights(i) = -eta(i) * f;
      }
      const double mean_dens = static_cast<double>(dens) * inv_n;
      s.ame = beta(k) * mean_dens;
      grad = beta(k) * (x.transpose() * weights) * inv_n;
      grad(k) += mean_dens;
    }
    const double var = grad.dot(fit.covariance * grad);
    s.ame_std_error = std::sqrt(std::max(0.0, var));
    s.ame_p_value = s.ame_std_error > 0.0 ? two_sided_p(s.ame / s.ame_std_error) : (s.ame == 0.0 ? 1.0 : 0.0);
    s.ame_significant_at = significance_of(s.ame_p_value);
    out.push_back(std::move(s));
  }
  return out;
}

GroupTest group_test(const ProbitFit& fit, std::span<const std::string> terms, std::string group) {
  if (terms.empty()) throw Error("probit", "group test needs at least one term");
  const auto q = static_cast<Eigen::Index>(terms.size());
  std::vector<Eigen::Index> idx;
  for (const auto& t : terms) {
    const auto k = fit.term_index(t);
    if (!k) throw Error("probit", "term '" + t + "' not in fit");
    idx.push_back(static_cast<Eigen::Index>(*k));
  }
  VectorXd b(q);
  MatrixXd v(q, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    b(a) = fit.coefficients(idx[static_cast<std::size_t>(a)]);
    for (Eigen::Index c = 0; c < q; ++c)
      v(a, c) = fit.covariance(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
  }
  // Scale-free singularity check on the correlation form of the block.
  const VectorXd sd = v.diagonal().cwiseMax(0.0).cwiseSqrt();
  if ((sd.array() <= 0.0).any()) throw Error("probit", "singular sub-covariance for group '" + group + "'");
  const MatrixXd corr = sd.cwiseInverse().asDiagonal() * v * sd.cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff()))
    throw Error("probit", "singular sub-covariance for group '" + group + "'");

  GroupTest out;
  out.group = group.empty() ? terms.front() : std::move(group);
  out.terms.assign(terms.begin(), terms.end());
  out.df = terms.size();
  out.chi2_stat = std::max(0.0, b.dot(v.ldlt().solve(b)));
  out.p_value = chi2_sf(out.chi2_stat, static_cast<double>(out.df));
  out.reject_at_5pct = out.p_value < 0.05;
  return out;
}

GroupTest group_test_lr(const Dataset& data, const ProbitFit& full, std::span<const std::string> terms,
                        std::string group) {
  if (terms.empty()) throw Error("probit", "group test needs at least one term");
  std::vector<std::string> kept;
  for (std::size_t k = 1; k < full.terms.size(); ++k)
    if (std::find(terms.begin(), terms.end(), full.terms[k]) == terms.end()) kept.push_back(full.terms[k]);
  if (kept.size() + terms.size() + 1 != full.terms.size()) throw Error("probit", "group terms must all be in the fit");
  const double restricted = kept.empty() ? full.null_log_likelihood : fit(data, kept, full.outcome).log_likelihood;
  GroupTest out;
  out.group = group.empty() ? terms.front() : std::move(group);
  out.terms.assign(terms.begin(), terms.end());
  out.df = terms.size();
  out.chi2_stat = std::max(0.0, 2.0 * (full.log_likelihood - restricted));
  out.p_value = chi2_sf(out.chi2_stat, static_cast<double>(out.df));
  out.reject_at_5pct = out.p_value < 0.05;
  return out;
}

Elimination eliminate_groups(const Dataset& data, const Schema& schema, const std::string& outcome, int max_rounds,
                             TestKind test) {
  if (max_rounds < 1) throw Error("probit", "max_rounds must be at least 1");
  std::vector<std::string> groups = schema.groups();
  auto terms_of = [&](const std::vector<std::string>& gs) {
    std::vector<std::string> terms;
    for (const auto& f : schema.features())
      if (std::find(gs.begin(), gs.end(), f.group) != gs.end()) terms.push_back(f.name);
    return terms;
  };

  Elimination out;
  out.fit = fit(data, terms_of(groups), outcome);
  for (int round = 1; round <= max_rounds; ++round) {
    EliminationRound log;
    log.round = round;
    log.pseudo_r2_before = out.fit.pseudo_r2;
    std::vector<std::string> survivors;
    for (const auto& g : groups) {
      const auto members = terms_of({g});
      GroupTest t = test == TestKind::wald ? group_test(out.fit, members, g) : group_test_lr(data, out.fit, members, g);
      (t.reject_at_5pct ? survivors : log.dropped_groups).push_back(g);
      log.tests.push_back(std::move(t));
    }
    if (log.dropped_groups.empty()) {
      log.pseudo_r2_after = log.pseudo_r2_before;
      out.log.push_back(std::move(log));
      break;
    }
    groups = std::move(survivors);
    out.fit = fit(data, terms_of(groups), outcome);
    log.pseudo_r2_after = out.fit.pseudo_r2;
    out.log.push_back(std::move(log));
  }
  out.kept_groups = groups;
  return out;
}

json to_json(const ProbitFit& f) {
  json coefficients = json::object();
  json cov = json::array();
  for (std::size_t k = 0; k < f.terms.size(); ++k) {
    coefficients[f.terms[k]] = f.coefficients(static_cast<Eigen::Index>(k));
    json row = json::array();
    for (std::size_t c = 0; c < f.terms.size(); ++c)
      row.push_back(f.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)));
    cov.push_back(std::move(row));
  }
  return {{"outcome", f.outcome},
          {"terms", f.terms},
          {"coefficients", std::move(coefficients)},
          {"covariance", std::move(cov)},
          {"log_likelihood", f.log_likelihood},
          {"null_log_likelihood", f.null_log_likelihood},
          {"pseudo_r2", f.pseudo_r2},
          {"n_used", f.n_used},
          {"converged", f.converged},
          {"iterations", f.iterations}};
}

json to_json(const TermStats& s) {
  return {{"term", s.term},
          {"estimate", s.estimate},
          {"std_error", s.std_error},
          {"t_stat", s.t_stat},
          {"ame", s.ame},
          {"ame_std_error", s.ame_std_error},
          {"ame_p_value", s.ame_p_value},
          {"ame_significant_at", to_string(s.ame_significant_at)}};
}

json to_json(const GroupTest& t) {
  return {{"group", t.group},       {"terms", t.terms},     {"chi2_stat", t.chi2_stat},
          {"df", t.df},             {"p_value", t.p_value}, {"reject_at_5pct", t.reject_at_5pct}};
}

json to_json(const Elimination& e) {
  json rounds = json::array();
  for (const auto& r : e.log) {
    json tests = json::array();
    for (const auto& t : r.tests) tests.push_back(to_json(t));
    rounds.push_back({{"round", r.round},
                      {"tests", std::move(tests)},
                      {"dropped_groups", r.dropped_groups},
                      {"pseudo_r2_before", r.pseudo_r2_before},
                      {"pseudo_r2_after", r.pseudo_r2_after}});
  }
  return {{"kept_groups", e.kept_groups}, {"rounds", std::move(rounds)}, {"fit", to_json(e.fit)}};
}

}  // namespace vaxcast::probit
