#pragma once

#include <vector>

#include "cpmdid/data.hpp"
#include "cpmdid/fit.hpp"

namespace cpmdid {

// One row per observation: the outcome, the model-implied conditional mean
// given that row's design, their difference (the observed-minus-expected
// residual), and the row's covariates for residual-by-predictor plots.
struct ResidualRow {
  double observed = 0.0;
  double expected = 0.0;
  double residual = 0.0;
  std::vector<double> covariates;
};

struct ResidualTable {
  std::vector<ResidualRow> rows;
};

// Per-link refit results on identical data, and the converged fit with the
// highest log-likelihood.
struct LinkComparison {
  struct Entry {
    Link link = Link::probit;
    double loglik = 0.0;
    bool converged = false;
  };
  std::vector<Entry> fits;  // in input order
  Link preferred = Link::probit;
};

// Residuals observed - E[Y | W], with the conditional mean assembled from
// the fitted conditional CDF: sum over support values of y_k times the mass
// the model puts on y_k at that row's design. The dataset need not be the
// training data; only the covariate arity must match. Throws numerical_error
// for a non-converged fit.
ResidualTable omer_residuals(const FittedCPM& fit, const Dataset& dataset);

// Fits every candidate link on the same dataset and reports log-likelihoods,
// convergence flags, and the preferred (argmax log-likelihood among
// converged) link. A single candidate is preferred trivially; if no
// candidate converges, throws numerical_error.
LinkComparison compare_links(const Dataset& dataset,
                             const std::vector<Link>& links,
                             const FitOptions& options = {});

}  // namespace cpmdid
