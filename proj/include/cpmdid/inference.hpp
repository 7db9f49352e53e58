#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cpmdid/data.hpp"
#include "cpmdid/estimands.hpp"
#include "cpmdid/fit.hpp"

namespace cpmdid {

struct BootstrapSpec {
  int replicates = 500;
  std::uint64_t seed = 0;
  double confidence = 0.95;
  // Replicates are independent work units; any thread count produces
  // bit-identical output because each replicate owns a seed-derived stream
  // and aggregation happens in replicate order.
  int threads = 1;
};

// Percentile bounds for each requested estimand, aligned with the request's
// quantile and threshold lists. failed_replicates counts resamples that were
// dropped (non-convergent fit or an unusable resample, e.g. an empty
// group/period cell).
struct IntervalSet {
  std::optional<ConfidenceInterval> att;
  std::vector<ConfidenceInterval> qtt;
  std::vector<ConfidenceInterval> ptt;
  std::optional<ConfidenceInterval> mtt;
  int replicates = 0;
  int failed_replicates = 0;
};

// Linear-interpolation empirical percentile of a sample, the same inversion
// rule the quantile estimand uses: with s values sorted ascending, level p
// maps to the ceil(p*s)-th order statistic, interpolating between neighbors
// when p*s is not integral and flooring at the smallest value. Throws
// input_error unless 0 < p < 1.
double empirical_percentile(std::vector<double> values, double p);

// Percentile bootstrap over B resamples drawn with replacement: over
// clusters (subjects) when the dataset carries cluster ids, over rows
// otherwise. Each replicate refits end to end and evaluates the requested
// estimands; bounds are the (1-conf)/2 and (1+conf)/2 empirical percentiles
// across successful replicates. Replicate b draws from a stream derived from
// (seed, b), so results do not depend on execution order or thread count.
// Throws numerical_error when more than 10% of replicates are unusable.
IntervalSet bootstrap(const Dataset& dataset, const FitOptions& options,
                      const EstimandRequest& request,
                      const BootstrapSpec& spec);

}  // namespace cpmdid
