#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "cpmdid/data.hpp"
#include "cpmdid/links.hpp"

namespace cpmdid {

struct FitOptions {
  Link link = Link::probit;
  int max_iterations = 100;
  // Convergence is declared on relative log-likelihood change.
  double tolerance = 1e-8;
  // Optional (L, U): outcomes below L collapse into a single bottom category
  // at L, outcomes above U into a single top category at U, before fitting.
  std::optional<std::pair<double, double>> censor_bounds;
};

// Nonparametric maximum likelihood estimate of the cumulative probability
// model. alphas are the cutpoint intercepts attached to support[0..K-2]; the
// transformation estimate is the step function alpha[i] on
// [support[i], support[i+1]), -infinity below support[0] and +infinity at and
// above support[K-1].
struct FittedCPM {
  std::vector<double> alphas;       // length K-1, strictly increasing
  Eigen::VectorXd betas;            // [group, period, interaction, covariates...]
  Link link = Link::probit;
  std::vector<double> support;      // length K
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  // Diagnostics: largest |score| component divided by the row count at the
  // final iterate, and the accepted log-likelihood path.
  double max_abs_score = 0.0;
  std::vector<double> loglik_trace;
};

// Gradient and Hessian of the log-likelihood over (alphas, betas). The
// alpha block of the Hessian is tridiagonal because a row's category
// probability involves at most two adjacent cutpoints; only the diagonal and
// the first off-diagonal are stored. Entries farther apart are identically
// zero.
struct ScoreHessian {
  Eigen::VectorXd alpha_score;   // K-1
  Eigen::VectorXd beta_score;    // p+3
  Eigen::VectorXd alpha_diag;    // K-1
  Eigen::VectorXd alpha_offdiag; // K-2, entry i couples alpha i and i+1
  Eigen::MatrixXd cross;         // (K-1) x (p+3)
  Eigen::MatrixXd beta_block;    // (p+3) x (p+3)
};

// Log-likelihood of the discretized model: each row contributes the log of
// its category probability, with the bottom category open at -infinity and
// the top category open at +infinity. Throws std::domain_error when alphas
// are not strictly increasing and std::invalid_argument on size mismatches.
double log_likelihood(const std::vector<double>& alphas,
                      const Eigen::VectorXd& betas,
                      const SupportEncoding& encoding,
                      const Eigen::MatrixXd& design, Link lk);

ScoreHessian score_and_hessian(const std::vector<double>& alphas,
                               const Eigen::VectorXd& betas,
                               const SupportEncoding& encoding,
                               const Eigen::MatrixXd& design, Link lk);

// Newton fit with the alpha block eliminated first, so each iteration costs
// O(K (p+3)^2) rather than O(K^3). Step-halving guards both the alpha
// ordering and monotone log-likelihood ascent. initial_betas, when given,
// warm-starts the slope parameters (used by the bootstrap); the result is
// the same optimum, reached in fewer iterations.
FittedCPM fit_cpm(const Dataset& dataset, const FitOptions& options = {},
                  const Eigen::VectorXd* initial_betas = nullptr);

// P(Y <= y | w) under the fitted model, with the step convention on the
// support: 0 below the minimum, 1 at and above the maximum.
double conditional_cdf(const FittedCPM& fit,
                       const Eigen::Ref<const Eigen::RowVectorXd>& w,
                       double y);

}  // namespace cpmdid
