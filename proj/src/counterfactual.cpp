#include "cpmdid/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpmdid {

namespace {

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

DiscreteCDF averaged_cdf(const FittedCPM& fit, const std::vector<double>& eta) {
  const std::size_t k = fit.support.size();
  const double n = static_cast<double>(eta.size());
  DiscreteCDF cdf;
  cdf.support = fit.support;
  cdf.values.resize(k);
  std::vector<double> term(eta.size());
  for (std::size_t c = 0; c + 1 < k; ++c) {
    for (std::size_t r = 0; r < eta.size(); ++r) {
      term[r] = inverse_link(fit.link, fit.alphas[c] - eta[r]);
    }
    cdf.values[c] = pairwise_sum(term.data(), term.size()) / n;
  }
  cdf.values[k - 1] = 1.0;
  // Each per-row CDF is non-decreasing across cutpoints, so the average is
  // too; the running max only irons out sub-ulp wobble from the averaging.
  for (std::size_t c = 1; c < k; ++c) {
    cdf.values[c] = std::max(cdf.values[c], cdf.values[c - 1]);
  }
  cdf.masses.resize(k);
  cdf.masses[0] = cdf.values[0];
  for (std::size_t c = 1; c < k; ++c) {
    cdf.masses[c] = cdf.values[c] - cdf.values[c - 1];
  }
  return cdf;
}

}  // namespace

CounterfactualPair counterfactual_cdfs(const FittedCPM& fit,
                                       const Dataset& dataset) {
  if (fit.support.size() < 2 ||
      fit.alphas.size() + 1 != fit.support.size()) {
    throw std::invalid_argument("counterfactual_cdfs requires a fitted model");
  }
  const std::size_t p = dataset.covariate_count();
  if (fit.betas.size() != static_cast<Eigen::Index>(p) + 3) {
    throw std::invalid_argument(
        "fitted slopes do not match the dataset's covariate count");
  }
  const double b_group = fit.betas[0];
  const double b_period = fit.betas[1];
  const double b_interaction = fit.betas[2];
  std::vector<double> eta_treated;
  std::vector<double> eta_untreated;
  for (const Observation& o : dataset.observations) {
    if (o.group != 1 || o.period != 1) continue;
    if (o.covariates.size() != p) {
      throw input_error("observation covariate count does not match the dataset");
    }
    double bx = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      bx += fit.betas[static_cast<Eigen::Index>(j) + 3] * o.covariates[j];
    }
    eta_untreated.push_back(b_group + b_period + bx);
    eta_treated.push_back(b_group + b_period + b_interaction + bx);
  }
  if (eta_treated.empty()) {
    throw input_error("empty treated-post cell (D=1, T=1)");
  }
  CounterfactualPair pair;
  pair.n11 = eta_treated.size();
  pair.f1 = averaged_cdf(fit, eta_treated);
  pair.f0 = averaged_cdf(fit, eta_untreated);
  return pair;
}

}  // namespace cpmdid
