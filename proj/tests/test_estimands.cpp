#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cpmdid/estimands.hpp"
#include "cpmdid/fit.hpp"
#include "support/synth.hpp"

using namespace cpmdid;

namespace {

DiscreteCDF from_masses(std::vector<double> support,
                        const std::vector<double>& masses) {
  DiscreteCDF cdf;
  cdf.support = std::move(support);
  cdf.masses = masses;
  double cum = 0.0;
  for (double m : masses) {
    cum += m;
    cdf.values.push_back(cum);
  }
  cdf.values.back() = 1.0;
  return cdf;
}

CounterfactualPair two_point_toy() {
  CounterfactualPair pair;
  pair.f0 = from_masses({1.0, 2.0, 3.0}, {0.5, 0.5, 0.0});
  pair.f1 = from_masses({1.0, 2.0, 3.0}, {0.0, 0.5, 0.5});
  pair.n11 = 2;
  return pair;
}

// Brute-force pairwise comparison over all support pairs: 1 for a strict
// treated win, one half for a tie.
double mtt_brute(const CounterfactualPair& pair) {
  double total = 0.0;
  for (std::size_t i = 0; i < pair.f1.support.size(); ++i) {
    for (std::size_t j = 0; j < pair.f0.support.size(); ++j) {
      const double h = i > j ? 1.0 : (i == j ? 0.5 : 0.0);
      total += h * pair.f1.masses[i] * pair.f0.masses[j];
    }
  }
  return total;
}

CounterfactualPair pair_from_fit(const Dataset& data, const FittedCPM& fit) {
  return counterfactual_cdfs(fit, data);
}

}  // namespace

TEST_CASE("two-point toy reproduces the hand-computed estimands") {
  const CounterfactualPair pair = two_point_toy();
  CHECK(att(pair) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(qtt(pair, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ptt(pair, 1.0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(ptt(pair, 0.5) == 0.0);
  CHECK(ptt(pair, 3.0) == 0.0);
  CHECK(ptt(pair, 30.0) == 0.0);
  CHECK(mtt(pair) == doctest::Approx(0.875).epsilon(1e-15));
  CHECK(mtt_brute(pair) == doctest::Approx(0.875).epsilon(1e-15));
}

TEST_CASE("identical distributions give null effects") {
  CounterfactualPair pair = two_point_toy();
  pair.f0 = pair.f1;
  CHECK(att(pair) == 0.0);
  for (double p : {0.05, 0.25, 0.5, 0.75, 0.95}) {
    CHECK(qtt(pair, p) == 0.0);
  }
  for (double y : {0.0, 1.0, 1.5, 2.0, 3.0}) {
    CHECK(ptt(pair, y) == 0.0);
  }
  CHECK(mtt(pair) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("quantile inversion interpolates and floors at the first point") {
  const CounterfactualPair pair = two_point_toy();
  // f1 values are (0, 0.5, 1): p = 0.25 interpolates halfway between the
  // first two support points; p at or below the first value floors.
  CHECK(qtt(pair, 0.25) ==
        doctest::Approx((1.0 + 0.5) - 1.0).epsilon(1e-15));
  CHECK(qtt(pair, 0.75) ==
        doctest::Approx(2.5 - 1.5).epsilon(1e-15));
  CHECK_THROWS_AS(qtt(pair, 0.0), input_error);
  CHECK_THROWS_AS(qtt(pair, 1.0), input_error);
  CHECK_THROWS_AS(qtt(pair, -0.2), input_error);
}

TEST_CASE("qtt inverts each marginal, not quantiles of differences") {
  CounterfactualPair pair;
  pair.f0 = from_masses({0.0, 1.0, 2.0, 3.0}, {0.5, 0.0, 0.0, 0.5});
  pair.f1 = from_masses({0.0, 1.0, 2.0, 3.0}, {0.0, 0.5, 0.5, 0.0});
  pair.n11 = 2;
  CHECK(qtt(pair, 0.5) == doctest::Approx(1.0).epsilon(1e-15));

  // The wrong construction, quantiles of the comonotonic difference curve,
  // lands far from 1 on this pair.
  std::vector<double> diffs;
  for (int i = 1; i < 20; ++i) {
    const double p = i / 20.0;
    const auto inv = [&](const DiscreteCDF& cdf) {
      const auto it =
          std::lower_bound(cdf.values.begin(), cdf.values.end(), p);
      const std::size_t idx = static_cast<std::size_t>(it - cdf.values.begin());
      if (idx == 0) return cdf.support.front();
      return cdf.support[idx - 1] +
             (p - cdf.values[idx - 1]) *
                 (cdf.support[idx] - cdf.support[idx - 1]) /
                 (cdf.values[idx] - cdf.values[idx - 1]);
    };
    diffs.push_back(inv(pair.f1) - inv(pair.f0));
  }
  std::sort(diffs.begin(), diffs.end());
  const double median_of_diffs = diffs[diffs.size() / 2];
  CHECK(std::fabs(median_of_diffs - qtt(pair, 0.5)) > 0.5);
}

TEST_CASE("fast mtt equals the brute-force double sum") {
  CHECK(std::fabs(mtt(two_point_toy()) - mtt_brute(two_point_toy())) <= 1e-15);
  for (Link lk : {Link::probit, Link::logit, Link::cloglog}) {
    FitOptions opt;
    opt.link = lk;
    const Dataset data = synth::small_discrete(150, 8, 61);
    const FittedCPM fit = fit_cpm(data, opt);
    REQUIRE(fit.converged);
    const CounterfactualPair pair = pair_from_fit(data, fit);
    CHECK(std::fabs(mtt(pair) - mtt_brute(pair)) <= 1e-12);
  }
  const Dataset continuous = synth::exponential_did(300, 67);
  const FittedCPM fit = fit_cpm(continuous, {});
  const CounterfactualPair pair = pair_from_fit(continuous, fit);
  CHECK(std::fabs(mtt(pair) - mtt_brute(pair)) <= 1e-12);
}

TEST_CASE("estimand ranges hold on a fitted pair with positive interaction") {
  const Dataset data = synth::exponential_did(400, 71);
  const FittedCPM fit = fit_cpm(data, {});
  REQUIRE(fit.converged);
  REQUIRE(fit.betas[2] > 0.0);
  const CounterfactualPair pair = pair_from_fit(data, fit);
  const double m = mtt(pair);
  CHECK(m >= 0.0);
  CHECK(m <= 1.0);
  CHECK(m > 0.5);  // upward latent shift favors the treated draw
  for (double y = 0.0; y < 30.0; y += 0.5) {
    const double v = ptt(pair, y);
    CHECK(v <= 0.0);
    CHECK(v >= -1.0);
  }
  CHECK(att(pair) > 0.0);
}

TEST_CASE("monotone outcome transforms move the estimands coherently") {
  const Dataset data = synth::small_discrete(150, 6, 83);
  Dataset mapped = data;
  for (Observation& o : mapped.observations) o.outcome = std::exp(o.outcome);
  const FittedCPM fit = fit_cpm(data, {});
  const FittedCPM mapped_fit = fit_cpm(mapped, {});
  REQUIRE(fit.converged);
  REQUIRE(mapped_fit.converged);
  const CounterfactualPair pair = pair_from_fit(data, fit);
  const CounterfactualPair mapped_pair = pair_from_fit(mapped, mapped_fit);

  CHECK(std::fabs(mtt(pair) - mtt(mapped_pair)) <= 1e-12);
  for (double y : {0.0, 1.0, 2.0, 3.5, 4.0}) {
    CHECK(std::fabs(ptt(pair, y) - ptt(mapped_pair, std::exp(y))) <= 1e-12);
  }
  // Quantile inverses map through the transform up to the interpolation
  // bracket: the transformed inverse stays inside the image of the original
  // bracketing support interval.
  for (double p : {0.2, 0.4, 0.6, 0.8}) {
    const auto bracket = [&](const DiscreteCDF& cdf) {
      const auto it = std::lower_bound(cdf.values.begin(), cdf.values.end(), p);
      return static_cast<std::size_t>(it - cdf.values.begin());
    };
    const std::size_t i = bracket(pair.f1);
    const double inv_mapped =
        qtt(mapped_pair, p) + [&] {
          const auto it = std::lower_bound(mapped_pair.f0.values.begin(),
                                           mapped_pair.f0.values.end(), p);
          const std::size_t j =
              static_cast<std::size_t>(it - mapped_pair.f0.values.begin());
          return j == 0 ? mapped_pair.f0.support.front()
                        : mapped_pair.f0.support[j - 1] +
                              (p - mapped_pair.f0.values[j - 1]) *
                                  (mapped_pair.f0.support[j] -
                                   mapped_pair.f0.support[j - 1]) /
                                  (mapped_pair.f0.values[j] -
                                   mapped_pair.f0.values[j - 1]);
        }();
    const double lo = i == 0 ? mapped_pair.f1.support.front()
                             : std::exp(pair.f1.support[i - 1]);
    const double hi = std::exp(pair.f1.support[std::min(
        i, pair.f1.support.size() - 1)]);
    CHECK(inv_mapped >= lo - 1e-9);
    CHECK(inv_mapped <= hi + 1e-9);
  }
  // The mean difference has no such invariance.
  CHECK(std::fabs(att(pair) - att(mapped_pair)) > 0.01);
}

TEST_CASE("full report batches the pieces and validates the request") {
  const CounterfactualPair pair = two_point_toy();
  EstimandRequest empty;
  empty.want_att = false;
  empty.want_mtt = false;
  const EstimandReport none = full_report(pair, empty);
  CHECK_FALSE(none.att.has_value());
  CHECK_FALSE(none.mtt.has_value());
  CHECK(none.qtt.empty());
  CHECK(none.ptt.empty());

  EstimandRequest shaped;
  shaped.quantiles = {0.25, 0.5, 0.75};
  shaped.thresholds = {1.0, 2.0, 2.5};
  const EstimandReport report = full_report(pair, shaped);
  REQUIRE(report.att.has_value());
  REQUIRE(report.mtt.has_value());
  REQUIRE(report.qtt.size() == 3);
  REQUIRE(report.ptt.size() == 3);
  CHECK(*report.att == att(pair));
  CHECK(*report.mtt == mtt(pair));
  for (std::size_t i = 0; i < report.qtt.size(); ++i) {
    CHECK(report.qtt[i].argument == shaped.quantiles[i]);
    CHECK(report.qtt[i].estimate == qtt(pair, shaped.quantiles[i]));
    CHECK_FALSE(report.qtt[i].ci.has_value());
  }
  CHECK(report.ptt[1].estimate == ptt(pair, 2.0));

  EstimandRequest bad;
  bad.quantiles = {0.5, 1.0};
  CHECK_THROWS_AS(full_report(pair, bad), input_error);
}
