#include "cpmdid/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpmdid {

namespace {

void check_pair(const CounterfactualPair& pair) {
  if (pair.f1.support.size() < 2 ||
      pair.f1.support.size() != pair.f1.values.size() ||
      pair.f0.support != pair.f1.support ||
      pair.f0.values.size() != pair.f0.support.size()) {
    throw std::invalid_argument(
        "estimands require counterfactual CDFs on one shared support");
  }
}

double inverse_at(const DiscreteCDF& cdf, double p) {
  const auto it = std::lower_bound(cdf.values.begin(), cdf.values.end(), p);
  const std::size_t i = static_cast<std::size_t>(it - cdf.values.begin());
  if (i == 0) return cdf.support.front();
  const double below = cdf.values[i - 1];
  const double above = cdf.values[i];
  return cdf.support[i - 1] + (p - below) * (cdf.support[i] - cdf.support[i - 1]) /
                                  (above - below);
}

double value_at(const DiscreteCDF& cdf, double y) {
  if (std::isnan(y)) {
    throw std::invalid_argument("threshold must be a real number");
  }
  if (y < cdf.support.front()) return 0.0;
  const auto it =
      std::upper_bound(cdf.support.begin(), cdf.support.end(), y);
  return cdf.values[static_cast<std::size_t>(it - cdf.support.begin()) - 1];
}

}  // namespace

double att(const CounterfactualPair& pair) {
  check_pair(pair);
  double diff = 0.0;
  for (std::size_t i = 0; i < pair.f1.support.size(); ++i) {
    diff += pair.f1.support[i] * (pair.f1.masses[i] - pair.f0.masses[i]);
  }
  return diff;
}

double qtt(const CounterfactualPair& pair, double p) {
  check_pair(pair);
  if (!(p > 0.0 && p < 1.0)) {
    throw input_error("quantile level must lie strictly inside (0, 1)");
  }
  return inverse_at(pair.f1, p) - inverse_at(pair.f0, p);
}

double ptt(const CounterfactualPair& pair, double y) {
  check_pair(pair);
  return value_at(pair.f1, y) - value_at(pair.f0, y);
}

double mtt(const CounterfactualPair& pair) {
  check_pair(pair);
  // P(U > V) + 0.5 P(U = V) for independent U ~ f1, V ~ f0 on the shared
  // support: sum over i of mass1[i] * (F0 strictly below i plus half the
  // tied mass).
  double total = 0.0;
  double f0_below = 0.0;
  for (std::size_t i = 0; i < pair.f1.support.size(); ++i) {
    total += pair.f1.masses[i] * (f0_below + 0.5 * pair.f0.masses[i]);
    f0_below += pair.f0.masses[i];
  }
  return total;
}

EstimandReport full_report(const CounterfactualPair& pair,
                           const EstimandRequest& request) {
  check_pair(pair);
  for (double p : request.quantiles) {
    if (!(p > 0.0 && p < 1.0)) {
      throw input_error("quantile level must lie strictly inside (0, 1)");
    }
  }
  EstimandReport report;
  if (request.want_att) report.att = att(pair);
  for (double p : request.quantiles) {
    report.qtt.push_back({p, qtt(pair, p), std::nullopt});
  }
  for (double y : request.thresholds) {
    report.ptt.push_back({y, ptt(pair, y), std::nullopt});
  }
  if (request.want_mtt) report.mtt = mtt(pair);
  return report;
}

}  // namespace cpmdid
