#pragma once

#include <cstddef>
#include <vector>

#include "cpmdid/data.hpp"
#include "cpmdid/fit.hpp"

namespace cpmdid {

// Distribution on the fitted outcome support. values[k] = P(Y <= support[k]),
// non-decreasing with values.back() == 1 exactly; masses are the first
// differences.
struct DiscreteCDF {
  std::vector<double> support;
  std::vector<double> values;
  std::vector<double> masses;
};

// Marginal potential-outcome distributions for the treated-post cell:
// f1 is the distribution under treatment, f0 the counterfactual without it.
// Both share the fitted support. n11 counts the treated-post rows averaged
// over.
struct CounterfactualPair {
  DiscreteCDF f1;
  DiscreteCDF f0;
  std::size_t n11 = 0;
};

// For each support point y, averages the model CDF at y over the treated-post
// rows' covariates: f1 uses the full linear predictor, f0 omits the
// interaction coefficient. Row sums use pairwise reduction, so the result is
// stable under row permutation to ~1e-12. Throws input_error when the
// dataset has no treated-post rows.
CounterfactualPair counterfactual_cdfs(const FittedCPM& fit,
                                       const Dataset& dataset);

}  // namespace cpmdid
