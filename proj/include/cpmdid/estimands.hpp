#pragma once

#include <optional>
#include <vector>

#include "cpmdid/counterfactual.hpp"

namespace cpmdid {

struct EstimandRequest {
  std::vector<double> quantiles;   // each strictly inside (0, 1)
  std::vector<double> thresholds;  // outcome values for the CDF contrast
  bool want_att = true;
  bool want_mtt = true;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
};

// One quantile or threshold entry: the argument it was evaluated at, the
// point estimate, and the bootstrap interval once inference has run.
struct ReportEntry {
  double argument = 0.0;
  double estimate = 0.0;
  std::optional<ConfidenceInterval> ci;
};

struct EstimandReport {
  std::optional<double> att;
  std::optional<ConfidenceInterval> att_ci;
  std::vector<ReportEntry> qtt;
  std::vector<ReportEntry> ptt;
  std::optional<double> mtt;
  std::optional<ConfidenceInterval> mtt_ci;
};

// Mean difference between the treated and untreated distributions.
double att(const CounterfactualPair& pair);

// Quantile treatment effect: each marginal CDF is inverted separately by
// linear interpolation between the bracketing support points (the inverse is
// the first support point when p lies at or below its CDF value), and the
// inverses are differenced. Throws input_error unless 0 < p < 1.
double qtt(const CounterfactualPair& pair, double p);

// CDF difference F1(y) - F0(y) with the step convention: 0 below the
// support, 1 at and above its maximum.
double ptt(const CounterfactualPair& pair, double y);

// P(treated outcome exceeds an independent untreated one, ties counted half):
// the full product-measure sum over support pairs, evaluated in O(K) via
// cumulative sums.
double mtt(const CounterfactualPair& pair);

EstimandReport full_report(const CounterfactualPair& pair,
                           const EstimandRequest& request);

}  // namespace cpmdid
