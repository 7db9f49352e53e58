#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpmdid/estimands.hpp"
#include "cpmdid/inference.hpp"
#include "cpmdid/rng.hpp"
#include "support/synth.hpp"

using namespace cpmdid;

namespace {

DiscreteCDF from_masses(std::vector<double> support,
                        const std::vector<double>& masses) {
  DiscreteCDF cdf;
  cdf.support = std::move(support);
  cdf.masses = masses;
  double running = 0.0;
  for (double m : masses) {
    running += m;
    cdf.values.push_back(running);
  }
  cdf.values.back() = 1.0;
  return cdf;
}

bool same_interval(const ConfidenceInterval& a, const ConfidenceInterval& b) {
  return a.lower == b.lower && a.upper == b.upper;
}

bool same_intervals(const IntervalSet& a, const IntervalSet& b) {
  if (a.att.has_value() != b.att.has_value()) return false;
  if (a.att && !same_interval(*a.att, *b.att)) return false;
  if (a.qtt.size() != b.qtt.size() || a.ptt.size() != b.ptt.size())
    return false;
  for (std::size_t i = 0; i < a.qtt.size(); ++i) {
    if (!same_interval(a.qtt[i], b.qtt[i])) return false;
  }
  for (std::size_t i = 0; i < a.ptt.size(); ++i) {
    if (!same_interval(a.ptt[i], b.ptt[i])) return false;
  }
  if (a.mtt.has_value() != b.mtt.has_value()) return false;
  if (a.mtt && !same_interval(*a.mtt, *b.mtt)) return false;
  return a.failed_replicates == b.failed_replicates &&
         a.replicates == b.replicates;
}

void check_ordered(const IntervalSet& set) {
  if (set.att) CHECK(set.att->lower <= set.att->upper);
  for (const ConfidenceInterval& ci : set.qtt) CHECK(ci.lower <= ci.upper);
  for (const ConfidenceInterval& ci : set.ptt) CHECK(ci.lower <= ci.upper);
  if (set.mtt) CHECK(set.mtt->lower <= set.mtt->upper);
}

// Eight four-row subjects; subject c0 holds every treated-post row, so a
// cluster resample that misses c0 loses that cell entirely.
Dataset concentrated_clusters() {
  Dataset data;
  for (int c = 0; c < 8; ++c) {
    for (int j = 0; j < 4; ++j) {
      int d = 0;
      int t = 0;
      if (c == 0) {
        d = 1;
        t = 1;
      } else {
        d = (c + j) % 3 == 0 ? 1 : 0;
        t = (c + j) % 3 == 1 ? 1 : 0;
      }
      const double y = (c * 7 + j * 3) % 6 + 0.5 * d + 0.25 * t;
      data.observations.push_back(
          synth::row(y, d, t, {}, "c" + std::to_string(c)));
    }
  }
  return data;
}

}  // namespace

TEST_CASE("percentile helper matches the quantile inversion rule") {
  // Shuffled integers 1..200: the documented 95% example lands on the 5th
  // and 195th order statistics exactly.
  std::vector<double> sample(200);
  std::iota(sample.begin(), sample.end(), 1.0);
  Rng rng(99);
  for (std::size_t i = sample.size() - 1; i > 0; --i) {
    std::swap(sample[i], sample[rng.below(i + 1)]);
  }
  CHECK(empirical_percentile(sample, 0.025) == 5.0);
  CHECK(empirical_percentile(sample, 0.975) == 195.0);

  // Between order statistics the value is interpolated linearly; below the
  // first one it floors at the minimum.
  const std::vector<double> four = {4.0, 1.0, 3.0, 2.0};
  CHECK(empirical_percentile(four, 0.5) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(empirical_percentile(four, 0.6) == doctest::Approx(2.4).epsilon(1e-12));
  CHECK(empirical_percentile(four, 0.1) == 1.0);

  CHECK_THROWS_AS(empirical_percentile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(empirical_percentile({1.0, 2.0}, 0.0), input_error);
  CHECK_THROWS_AS(empirical_percentile({1.0, 2.0}, 1.0), input_error);

  // The same rule drives the quantile estimand: a uniform distribution over
  // the sample against a point mass at its minimum reproduces the percentile
  // as a quantile treatment effect.
  std::vector<double> support(20);
  std::iota(support.begin(), support.end(), 1.0);
  std::vector<double> uniform(20, 0.05);
  std::vector<double> point(20, 0.0);
  point[0] = 1.0;
  CounterfactualPair pair;
  pair.f1 = from_masses(support, uniform);
  pair.f0 = from_masses(support, point);
  pair.n11 = 20;
  for (double p : {0.03, 0.25, 0.37, 0.5, 0.61, 0.9, 0.975}) {
    CHECK(qtt(pair, p) + support.front() ==
          doctest::Approx(empirical_percentile(support, p)).epsilon(1e-12));
  }
}

TEST_CASE("bootstrap is reproducible and seed sensitive") {
  const Dataset data = synth::small_discrete(300, 8, 77);
  EstimandRequest request;
  request.quantiles = {0.25, 0.5};
  request.thresholds = {3.0};
  BootstrapSpec spec;
  spec.replicates = 60;
  spec.seed = 42;

  const IntervalSet first = bootstrap(data, {}, request, spec);
  const IntervalSet second = bootstrap(data, {}, request, spec);
  CHECK(same_intervals(first, second));
  CHECK(first.replicates == 60);
  check_ordered(first);

  spec.seed = 43;
  const IntervalSet other = bootstrap(data, {}, request, spec);
  CHECK_FALSE(same_intervals(first, other));
}

TEST_CASE("thread count does not change the result") {
  const Dataset data = synth::small_discrete(240, 6, 11);
  EstimandRequest request;
  request.quantiles = {0.5};
  request.thresholds = {2.0};
  BootstrapSpec spec;
  spec.replicates = 48;
  spec.seed = 7;

  spec.threads = 1;
  const IntervalSet serial = bootstrap(data, {}, request, spec);
  spec.threads = 4;
  const IntervalSet parallel = bootstrap(data, {}, request, spec);
  CHECK(same_intervals(serial, parallel));
}

TEST_CASE("singleton clusters reproduce the row bootstrap exactly") {
  const Dataset rows = synth::small_discrete(120, 6, 5);
  Dataset clustered = rows;
  for (std::size_t i = 0; i < clustered.observations.size(); ++i) {
    clustered.observations[i].cluster_id = "u" + std::to_string(i);
  }
  REQUIRE(clustered.has_clusters());
  REQUIRE_FALSE(rows.has_clusters());

  EstimandRequest request;
  request.quantiles = {0.5};
  request.thresholds = {2.0};
  BootstrapSpec spec;
  spec.replicates = 50;
  spec.seed = 12;

  const IntervalSet by_row = bootstrap(rows, {}, request, spec);
  const IntervalSet by_cluster = bootstrap(clustered, {}, request, spec);
  CHECK(same_intervals(by_row, by_cluster));
}

TEST_CASE("cluster resampling draws whole subjects") {
  const Dataset clustered = concentrated_clusters();
  Dataset rows = clustered;
  for (Observation& o : rows.observations) o.cluster_id.clear();

  EstimandRequest request;
  request.want_mtt = false;
  BootstrapSpec spec;
  spec.replicates = 60;
  spec.seed = 21;

  // Row resamples almost always keep at least one of the four treated-post
  // rows, so the row bootstrap stays under the failure cap.
  const IntervalSet by_row = bootstrap(rows, {}, request, spec);
  CHECK(by_row.failed_replicates * 10 <= spec.replicates);
  check_ordered(by_row);

  // A cluster resample drops the whole treated-post cell whenever subject c0
  // is not drawn, which happens in roughly a third of replicates.
  CHECK_THROWS_WITH_AS(bootstrap(clustered, {}, request, spec),
                       doctest::Contains("replicates were unusable"),
                       numerical_error);
}

TEST_CASE("failed replicates are counted and dropped") {
  // Three treated-post rows out of 60: a resample misses all three about 5%
  // of the time, staying below the 10% cap.
  Dataset data;
  for (int i = 0; i < 60; ++i) {
    int d = 0;
    int t = 0;
    if (i < 20) {
      d = 0;
    } else if (i < 40) {
      t = 1;
    } else if (i < 57) {
      d = 1;
    } else {
      d = 1;
      t = 1;
    }
    data.observations.push_back(synth::row(i % 10 + d + t, d, t));
  }

  EstimandRequest request;
  request.quantiles = {0.5};
  BootstrapSpec spec;
  spec.replicates = 100;
  spec.seed = 4;

  const IntervalSet out = bootstrap(data, {}, request, spec);
  CHECK(out.failed_replicates > 0);
  CHECK(out.failed_replicates * 10 <= spec.replicates);
  CHECK(out.replicates == 100);
  check_ordered(out);
}

TEST_CASE("interval sets mirror the request") {
  const Dataset data = synth::exponential_did(250, 9, 4.0);
  EstimandRequest request;
  request.quantiles = {0.25, 0.5, 0.75};
  request.thresholds = {1.0, 3.0};
  BootstrapSpec spec;
  spec.replicates = 50;
  spec.seed = 3;

  const IntervalSet out = bootstrap(data, {}, request, spec);
  CHECK(out.att.has_value());
  CHECK(out.mtt.has_value());
  CHECK(out.qtt.size() == 3);
  CHECK(out.ptt.size() == 2);
  check_ordered(out);

  EstimandRequest none;
  none.want_att = false;
  none.want_mtt = false;
  BootstrapSpec quick = spec;
  quick.replicates = 12;
  const IntervalSet empty = bootstrap(data, {}, none, quick);
  CHECK_FALSE(empty.att.has_value());
  CHECK_FALSE(empty.mtt.has_value());
  CHECK(empty.qtt.empty());
  CHECK(empty.ptt.empty());
  CHECK(empty.replicates == 12);
}

TEST_CASE("bootstrap rejects malformed arguments") {
  const Dataset data = synth::small_discrete(40, 5, 2);
  const EstimandRequest request;

  BootstrapSpec spec;
  spec.replicates = 1;
  CHECK_THROWS_AS(bootstrap(data, {}, request, spec), input_error);

  spec.replicates = 10;
  spec.confidence = 0.0;
  CHECK_THROWS_AS(bootstrap(data, {}, request, spec), input_error);
  spec.confidence = 1.0;
  CHECK_THROWS_AS(bootstrap(data, {}, request, spec), input_error);

  spec.confidence = 0.95;
  spec.threads = 0;
  CHECK_THROWS_AS(bootstrap(data, {}, request, spec), input_error);

  spec.threads = 1;
  EstimandRequest bad;
  bad.quantiles = {1.5};
  CHECK_THROWS_AS(bootstrap(data, {}, bad, spec), input_error);
  bad.quantiles.clear();
  bad.thresholds = {std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(bootstrap(data, {}, bad, spec), std::invalid_argument);
}

TEST_CASE("intervals narrow as the sample grows") {
  EstimandRequest request;
  request.quantiles = {0.5};
  request.thresholds = {6.0};

  std::vector<double> width_att[2], width_qtt[2], width_ptt[2], width_mtt[2];
  const int sizes[2] = {200, 2000};
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    for (int s = 0; s < 2; ++s) {
      const Dataset data = synth::small_discrete(sizes[s], 12, 1000 + seed);
      BootstrapSpec spec;
      spec.replicates = 30;
      spec.seed = seed;
      const IntervalSet out = bootstrap(data, {}, request, spec);
      width_att[s].push_back(out.att->upper - out.att->lower);
      width_qtt[s].push_back(out.qtt[0].upper - out.qtt[0].lower);
      width_ptt[s].push_back(out.ptt[0].upper - out.ptt[0].lower);
      width_mtt[s].push_back(out.mtt->upper - out.mtt->lower);
    }
  }
  const auto median = [](std::vector<double> v) {
    return empirical_percentile(std::move(v), 0.5);
  };
  CHECK(median(width_att[1]) < median(width_att[0]));
  CHECK(median(width_qtt[1]) < median(width_qtt[0]));
  CHECK(median(width_ptt[1]) < median(width_ptt[0]));
  CHECK(median(width_mtt[1]) < median(width_mtt[0]));
}
