#include "cpmdid/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cpmdid/links.hpp"

namespace cpmdid {

namespace {

// Conditional mean at one design row: sum of support values weighted by the
// category masses F(alpha_k - eta) - F(alpha_{k-1} - eta), with the top
// category closing the distribution at exactly one.
double conditional_mean(const FittedCPM& fit, double eta) {
  const std::size_t k = fit.support.size();
  double prev = 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double cdf =
        i + 1 < k ? inverse_link(fit.link, fit.alphas[i] - eta) : 1.0;
    mean += fit.support[i] * (cdf - prev);
    prev = cdf;
  }
  return mean;
}

}  // namespace

ResidualTable omer_residuals(const FittedCPM& fit, const Dataset& dataset) {
  if (!fit.converged) {
    throw numerical_error(
        "residual diagnostics require a converged fit; refit or relax the "
        "model before computing residuals");
  }
  if (fit.support.size() < 2 ||
      fit.alphas.size() + 1 != fit.support.size()) {
    throw std::invalid_argument("fit has an inconsistent support encoding");
  }
  if (fit.betas.size() < 3) {
    throw std::invalid_argument("fit is missing the design coefficients");
  }
  const std::size_t n_covariates = static_cast<std::size_t>(fit.betas.size()) - 3;
  if (dataset.covariate_names.size() != n_covariates) {
    throw input_error("dataset has " +
                      std::to_string(dataset.covariate_names.size()) +
                      " covariate(s) but the fit expects " +
                      std::to_string(n_covariates));
  }

  ResidualTable table;
  table.rows.reserve(dataset.observations.size());
  for (const Observation& obs : dataset.observations) {
    if (obs.covariates.size() != n_covariates) {
      throw input_error("observation has " +
                        std::to_string(obs.covariates.size()) +
                        " covariate(s) but the fit expects " +
                        std::to_string(n_covariates));
    }
    const double d = obs.group ? 1.0 : 0.0;
    const double t = obs.period ? 1.0 : 0.0;
    double eta = fit.betas[0] * d + fit.betas[1] * t + fit.betas[2] * d * t;
    for (std::size_t j = 0; j < n_covariates; ++j) {
      eta += fit.betas[static_cast<Eigen::Index>(3 + j)] * obs.covariates[j];
    }
    ResidualRow row;
    row.observed = obs.outcome;
    row.expected = conditional_mean(fit, eta);
    row.residual = row.observed - row.expected;
    row.covariates = obs.covariates;
    table.rows.push_back(std::move(row));
  }
  return table;
}

LinkComparison compare_links(const Dataset& dataset,
                             const std::vector<Link>& links,
                             const FitOptions& options) {
  if (links.empty()) {
    throw input_error("at least one candidate link is required");
  }

  LinkComparison out;
  out.fits.reserve(links.size());
  bool any_converged = false;
  double best = -std::numeric_limits<double>::infinity();
  for (const Link lk : links) {
    FitOptions per_link = options;
    per_link.link = lk;
    LinkComparison::Entry entry;
    entry.link = lk;
    try {
      const FittedCPM fit = fit_cpm(dataset, per_link);
      entry.loglik = fit.loglik;
      entry.converged = fit.converged;
    } catch (const numerical_error&) {
      entry.loglik = std::numeric_limits<double>::quiet_NaN();
      entry.converged = false;
    }
    if (entry.converged && entry.loglik > best) {
      best = entry.loglik;
      out.preferred = lk;
      any_converged = true;
    }
    out.fits.push_back(entry);
  }
  if (!any_converged) {
    throw numerical_error(
        "no candidate link produced a converged fit; the comparison has no "
        "usable result");
  }
  return out;
}

}  // namespace cpmdid
