#include "cpmdid/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "cpmdid/counterfactual.hpp"
#include "cpmdid/rng.hpp"

namespace cpmdid {

namespace {

// Percentile of an already sorted sample under the interpolated inversion
// rule. Level p belongs to the ceil(p*s)-th order statistic; when p*s falls
// between integers the value is interpolated between the bracketing order
// statistics, and p at or below 1/s floors at the smallest value.
double percentile_sorted(const std::vector<double>& sorted, double p) {
  const auto s = sorted.size();
  const double pos = p * static_cast<double>(s);
  // p*s that is mathematically integral can land an ulp past the integer;
  // snapping keeps the bound at the exact order statistic in that case.
  const double snapped = std::nearbyint(pos);
  const bool integral =
      snapped >= 1.0 &&
      std::fabs(pos - snapped) <= 1e-9 * std::max(1.0, std::fabs(pos));
  std::size_t k = integral ? static_cast<std::size_t>(snapped)
                           : static_cast<std::size_t>(std::ceil(pos));
  if (k < 1) k = 1;
  if (k > s) k = s;
  if (k == 1) return sorted.front();
  double t = integral ? 1.0 : pos - static_cast<double>(k - 1);
  t = std::clamp(t, 0.0, 1.0);
  return sorted[k - 2] + t * (sorted[k - 1] - sorted[k - 2]);
}

// Resample with replacement: whole clusters when member lists are present
// (each drawn cluster contributes all its rows, preserving within-cluster
// order), individual rows otherwise. With singleton clusters the two paths
// consume the stream identically and produce the same dataset.
Dataset make_resample(const Dataset& base,
                      const std::vector<std::vector<std::size_t>>& members,
                      Rng& rng) {
  Dataset out;
  out.covariate_names = base.covariate_names;
  const std::size_t n = base.observations.size();
  out.observations.reserve(n);
  if (members.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      out.observations.push_back(base.observations[rng.below(n)]);
    }
  } else {
    const std::size_t units = members.size();
    for (std::size_t i = 0; i < units; ++i) {
      for (std::size_t row : members[rng.below(units)]) {
        out.observations.push_back(base.observations[row]);
      }
    }
  }
  return out;
}

enum class Status { invalid_resample, not_converged, ok };

struct Slot {
  Status status = Status::invalid_resample;
  EstimandReport report;
};

}  // namespace

double empirical_percentile(std::vector<double> values, double p) {
  if (values.empty()) {
    throw std::invalid_argument("empirical_percentile: empty sample");
  }
  if (!(p > 0.0 && p < 1.0)) {
    throw input_error("quantile level must lie strictly inside (0, 1)");
  }
  std::sort(values.begin(), values.end());
  return percentile_sorted(values, p);
}

IntervalSet bootstrap(const Dataset& dataset, const FitOptions& options,
                      const EstimandRequest& request,
                      const BootstrapSpec& spec) {
  if (spec.replicates < 2) {
    throw input_error("bootstrap requires at least 2 replicates");
  }
  if (!(spec.confidence > 0.0 && spec.confidence < 1.0)) {
    throw input_error("confidence level must lie strictly inside (0, 1)");
  }
  if (spec.threads < 1) {
    throw input_error("thread count must be positive");
  }
  // Reject a malformed request up front so it cannot masquerade as a batch
  // of failed replicates.
  for (double p : request.quantiles) {
    if (!(p > 0.0 && p < 1.0)) {
      throw input_error("quantile level must lie strictly inside (0, 1)");
    }
  }
  for (double y : request.thresholds) {
    if (std::isnan(y)) {
      throw std::invalid_argument("threshold must be a real number");
    }
  }

  // The full-data fit validates the dataset once and seeds every replicate
  // fit with its slope estimates.
  const FittedCPM parent = fit_cpm(dataset, options);
  const Eigen::VectorXd warm = parent.betas;

  std::vector<std::vector<std::size_t>> members;
  if (dataset.has_clusters()) {
    std::unordered_map<std::string, std::size_t> unit_of;
    for (std::size_t i = 0; i < dataset.observations.size(); ++i) {
      auto [it, fresh] = unit_of.try_emplace(
          dataset.observations[i].cluster_id, members.size());
      if (fresh) members.emplace_back();
      members[it->second].push_back(i);
    }
  }

  const int total = spec.replicates;
  std::vector<Slot> slots(static_cast<std::size_t>(total));
  std::atomic<int> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  // Replicate b is fully determined by (seed, b), so any scheduling of the
  // workers fills the same slots with the same contents.
  auto work = [&]() {
    try {
      for (int b = cursor.fetch_add(1); b < total; b = cursor.fetch_add(1)) {
        Rng rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(b));
        Dataset sample = make_resample(dataset, members, rng);
        Slot& slot = slots[static_cast<std::size_t>(b)];
        try {
          FittedCPM fit = fit_cpm(sample, options, &warm);
          if (!fit.converged) {
            slot.status = Status::not_converged;
            continue;
          }
          CounterfactualPair pair = counterfactual_cdfs(fit, sample);
          slot.report = full_report(pair, request);
          slot.status = Status::ok;
        } catch (const input_error&) {
          // Typically a resample that lost a group/period cell or collapsed
          // to a single outcome value.
          slot.status = Status::invalid_resample;
        } catch (const numerical_error&) {
          slot.status = Status::not_converged;
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> hold(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  const int workers = std::min(spec.threads, total);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  int invalid = 0;
  int stuck = 0;
  for (const Slot& slot : slots) {
    if (slot.status == Status::invalid_resample) ++invalid;
    if (slot.status == Status::not_converged) ++stuck;
  }
  const int failed = invalid + stuck;
  if (failed * 10 > total) {
    std::ostringstream msg;
    msg << "bootstrap failed: " << failed << " of " << total
        << " replicates were unusable (" << invalid << " invalid resamples, "
        << stuck << " non-convergent fits); at most 10% may fail";
    throw numerical_error(msg.str());
  }

  IntervalSet out;
  out.replicates = total;
  out.failed_replicates = failed;
  const double lower_level = (1.0 - spec.confidence) / 2.0;
  const double upper_level = 1.0 - lower_level;
  const auto interval_of = [&](auto&& value_of) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(total - failed));
    for (const Slot& slot : slots) {
      if (slot.status == Status::ok) values.push_back(value_of(slot.report));
    }
    std::sort(values.begin(), values.end());
    return ConfidenceInterval{percentile_sorted(values, lower_level),
                              percentile_sorted(values, upper_level)};
  };

  if (request.want_att) {
    out.att = interval_of([](const EstimandReport& r) { return *r.att; });
  }
  out.qtt.reserve(request.quantiles.size());
  for (std::size_t i = 0; i < request.quantiles.size(); ++i) {
    out.qtt.push_back(interval_of(
        [i](const EstimandReport& r) { return r.qtt[i].estimate; }));
  }
  out.ptt.reserve(request.thresholds.size());
  for (std::size_t i = 0; i < request.thresholds.size(); ++i) {
    out.ptt.push_back(interval_of(
        [i](const EstimandReport& r) { return r.ptt[i].estimate; }));
  }
  if (request.want_mtt) {
    out.mtt = interval_of([](const EstimandReport& r) { return *r.mtt; });
  }
  return out;
}

}  // namespace cpmdid
