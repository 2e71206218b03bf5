#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "vaxcast/data.hpp"

namespace vaxcast::probit {

inline constexpr const char* kIntercept = "intercept";

// Bernoulli log-likelihood of a probit model over a fixed design matrix.
// Rows of `design` are observations; `outcome` holds 0/1.
class Likelihood {
 public:
  Likelihood(Eigen::MatrixXd design, Eigen::VectorXd outcome);

  double value(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
  // Analytic Hessian (negative definite at an interior optimum).
  Eigen::MatrixXd hessian(const Eigen::VectorXd& beta) const;

  const Eigen::MatrixXd& design() const noexcept { return design_; }
  const Eigen::VectorXd& outcome() const noexcept { return outcome_; }

 private:
  Eigen::MatrixXd design_;
  Eigen::VectorXd outcome_;
};

struct FitOptions {
  double tolerance = 1e-8;       // absolute change in log-likelihood
  double step_tolerance = 1e-6;  // largest coefficient move, standardized design
  int max_iterations = 100;
  int max_halvings = 30;
  double separation_index = 30.0;
};

struct ProbitFit {
  std::vector<std::string> terms;  // terms[0] == "intercept"
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  double log_likelihood = 0.0;
  double null_log_likelihood = 0.0;
  double pseudo_r2 = 0.0;
  std::size_t n_used = 0;
  bool converged = false;
  int iterations = 0;
  std::string outcome;

  std::optional<std::size_t> term_index(std::string_view term) const;
  double coefficient(std::string_view term) const;
  double std_error(std::string_view term) const;
};

// Newton-Raphson with step halving. Terms are schema feature names; the
// intercept is added automatically. Throws SeparationError on (quasi-)complete
// separation or a singular Hessian. A fit that runs out of iterations is
// returned with converged == false.
ProbitFit fit(const Dataset& data, std::span<const std::string> terms, const std::string& outcome,
              const FitOptions& options = {});

// Intercept-only log-likelihood n1 ln(p) + n0 ln(1-p) at p = mean(y).
double null_log_likelihood(std::span<const double> outcome);

enum class Significance { one_percent, five_percent, ten_percent, none };

std::string_view to_string(Significance s) noexcept;
Significance significance_of(double p_value) noexcept;

struct TermStats {
  std::string term;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_stat = 0.0;
  double ame = 0.0;
  double ame_std_error = 0.0;
  double ame_p_value = 1.0;
  Significance ame_significant_at = Significance::none;
};

// Average marginal effects over `data`. Binary terms use the discrete
// difference Phi(x'b | d=1) - Phi(x'b | d=0); continuous terms use
// phi(x'b) * b. Standard errors by the delta method. Excludes the intercept.
std::vector<TermStats> marginal_effects(const ProbitFit& fit, const Dataset& data);

struct GroupTest {
  std::string group;
  std::vector<std::string> terms;
  double chi2_stat = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
  bool reject_at_5pct = false;
};

// Wald test that every coefficient in `terms` is zero.
GroupTest group_test(const ProbitFit& fit, std::span<const std::string> terms, std::string group = {});

// Likelihood-ratio variant: refits without `terms` on the same data.
GroupTest group_test_lr(const Dataset& data, const ProbitFit& fit, std::span<const std::string> terms,
                        std::string group = {});

enum class TestKind { wald, likelihood_ratio };

struct EliminationRound {
  int round = 0;
  std::vector<GroupTest> tests;
  std::vector<std::string> dropped_groups;
  double pseudo_r2_before = 0.0;
  double pseudo_r2_after = 0.0;
};

struct Elimination {
  ProbitFit fit;
  std::vector<std::string> kept_groups;
  std::vector<EliminationRound> log;
};

// Fits every schema feature, jointly tests each schema group and drops all
// groups that fail at 5% in the same round, then refits; repeats until every
// surviving group passes or `max_rounds` rounds have run.
Elimination eliminate_groups(const Dataset& data, const Schema& schema, const std::string& outcome,
                             int max_rounds = 4, TestKind test = TestKind::wald);

nlohmann::json to_json(const ProbitFit& fit);
nlohmann::json to_json(const TermStats& stats);
nlohmann::json to_json(const GroupTest& test);
nlohmann::json to_json(const Elimination& elimination);

}  // namespace vaxcast::probit
