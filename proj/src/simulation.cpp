#include "cpmdid/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cpmdid/counterfactual.hpp"
#include "cpmdid/fit.hpp"
#include "cpmdid/rng.hpp"

namespace cpmdid {

namespace {

// Stream index for the true-value oracle, far above any replicate index so
// the oracle never shares a stream with a replication.
constexpr std::uint64_t kOracleStream = 0xFFFFFFFFull;

void validate_scenario(const Scenario& scenario) {
  if (!(scenario.pair_correlation >= 0.0 && scenario.pair_correlation < 1.0)) {
    throw input_error("pair correlation must lie in [0, 1)");
  }
  if (scenario.n_subjects < 1) {
    throw input_error("scenario requires at least one subject");
  }
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(scenario.group_beta) || !finite(scenario.period_beta) ||
      !finite(scenario.interaction_beta) ||
      !std::all_of(scenario.covariate_betas.begin(),
                   scenario.covariate_betas.end(), finite)) {
    throw input_error("scenario coefficients must be finite");
  }
}

void validate_request(const EstimandRequest& request) {
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
}

double apply_transform(Transform t, double ystar) {
  return t == Transform::exponential ? std::exp(ystar) : ystar;
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z * 0.7071067811865475244);
}

double logistic_quantile(double u) { return std::log(u) - std::log1p(-u); }

// Maps a standard normal draw to the scenario's marginal error law. The
// two-period error pair is built from correlated normals, so the logistic
// law goes through its quantile function (a normal copula) to keep the
// stated marginal.
double marginal_error(ErrorLaw law, double z) {
  return law == ErrorLaw::normal ? z : logistic_quantile(normal_cdf(z));
}

std::vector<double> draw_covariates(const Scenario& scenario, Rng& rng) {
  std::vector<double> x(scenario.covariate_betas.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    x[j] = j % 2 == 0 ? static_cast<double>(rng.bernoulli(0.5)) : rng.normal();
  }
  return x;
}

double covariate_shift(const Scenario& scenario,
                       const std::vector<double>& x) {
  double shift = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    shift += scenario.covariate_betas[j] * x[j];
  }
  return shift;
}

}  // namespace

Transform parse_transform(std::string_view name) {
  if (name == "identity") return Transform::identity;
  if (name == "exponential") return Transform::exponential;
  throw input_error("unknown transform '" + std::string(name) +
                    "' (expected identity or exponential)");
}

std::string_view transform_name(Transform t) {
  return t == Transform::identity ? "identity" : "exponential";
}

ErrorLaw parse_error_law(std::string_view name) {
  if (name == "normal") return ErrorLaw::normal;
  if (name == "logistic") return ErrorLaw::logistic;
  throw input_error("unknown error law '" + std::string(name) +
                    "' (expected normal or logistic)");
}

std::string_view error_law_name(ErrorLaw law) {
  return law == ErrorLaw::normal ? "normal" : "logistic";
}

Dataset generate_dataset(const Scenario& scenario) {
  validate_scenario(scenario);
  Rng rng(scenario.seed);
  Dataset data;
  for (std::size_t j = 0; j < scenario.covariate_betas.size(); ++j) {
    data.covariate_names.push_back("x" + std::to_string(j + 1));
  }
  data.observations.reserve(static_cast<std::size_t>(scenario.n_subjects) * 2);

  const double rho = scenario.pair_correlation;
  const double residual = std::sqrt(1.0 - rho * rho);
  for (int s = 0; s < scenario.n_subjects; ++s) {
    const bool two_period = rng.bernoulli(0.5);
    const int d = static_cast<int>(rng.bernoulli(0.5));
    const std::vector<double> x = draw_covariates(scenario, rng);
    const double shift = covariate_shift(scenario, x);
    const std::string subject = "s" + std::to_string(s);

    const auto emit = [&](int t, double error) {
      const double ystar = scenario.group_beta * d +
                           scenario.period_beta * t +
                           scenario.interaction_beta * d * t + shift + error;
      Observation o;
      o.outcome = apply_transform(scenario.transform, ystar);
      o.group = d;
      o.period = t;
      o.covariates = x;
      o.cluster_id = subject;
      data.observations.push_back(std::move(o));
    };

    if (two_period) {
      // Only the observed arm's error pair is drawn; the coupling across
      // arms is invisible in the realized data.
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      emit(0, marginal_error(scenario.error_law, z1));
      emit(1, marginal_error(scenario.error_law, rho * z1 + residual * z2));
    } else {
      const int t = static_cast<int>(rng.bernoulli(0.5));
      const double error = scenario.error_law == ErrorLaw::normal
                               ? rng.normal()
                               : rng.logistic();
      emit(t, error);
    }
  }
  return data;
}

TrueValues true_values(const Scenario& scenario, std::int64_t oracle_size,
                       const EstimandRequest& request, MttOracle mtt_method) {
  validate_scenario(scenario);
  validate_request(request);
  if (oracle_size < 100000) {
    throw input_error("oracle size must be at least 100000");
  }

  const auto n = static_cast<std::size_t>(oracle_size);
  std::vector<double> treated(n);
  std::vector<double> untreated(n);
  Rng rng = Rng::stream(scenario.seed, kOracleStream);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> x = draw_covariates(scenario, rng);
    const double error = scenario.error_law == ErrorLaw::normal
                             ? rng.normal()
                             : rng.logistic();
    const double base = scenario.group_beta + scenario.period_beta +
                        covariate_shift(scenario, x) + error;
    treated[i] =
        apply_transform(scenario.transform, base + scenario.interaction_beta);
    untreated[i] = apply_transform(scenario.transform, base);
  }

  TrueValues out;
  long double sum = 0.0L;
  for (std::size_t i = 0; i < n; ++i) sum += treated[i] - untreated[i];
  out.att = static_cast<double>(sum / n);

  for (double p : request.quantiles) {
    out.qtt.push_back(empirical_percentile(treated, p) -
                      empirical_percentile(untreated, p));
  }
  for (double y : request.thresholds) {
    std::size_t below1 = 0;
    std::size_t below0 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      below1 += treated[i] <= y;
      below0 += untreated[i] <= y;
    }
    out.ptt.push_back((static_cast<double>(below1) -
                       static_cast<double>(below0)) /
                      static_cast<double>(n));
  }

  if (mtt_method == MttOracle::exact) {
    std::vector<double> ts = treated;
    std::vector<double> us = untreated;
    std::sort(ts.begin(), ts.end());
    std::sort(us.begin(), us.end());
    std::size_t strictly = 0;
    std::size_t weakly = 0;
    long double wins = 0.0L;
    for (double t : ts) {
      while (strictly < n && us[strictly] < t) ++strictly;
      while (weakly < n && us[weakly] <= t) ++weakly;
      wins += strictly + 0.5L * (weakly - strictly);
    }
    out.mtt = static_cast<double>(wins / (static_cast<long double>(n) * n));
  } else {
    long double wins = 0.0L;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = rng.below(n);
      std::size_t j = rng.below(n - 1);
      if (j >= i) ++j;
      if (treated[i] > untreated[j]) {
        wins += 1.0L;
      } else if (treated[i] == untreated[j]) {
        wins += 0.5L;
      }
    }
    out.mtt = static_cast<double>(wins / n);
  }
  return out;
}

namespace {

struct Replicate {
  bool ok = false;
  EstimandReport report;
  IntervalSet intervals;
};

}  // namespace

ReplicationSummary run_replications(const Scenario& scenario, int replications,
                                    const BootstrapSpec& boot,
                                    const EstimandRequest& request,
                                    std::int64_t oracle_size) {
  if (replications < 1) {
    throw input_error("at least one replication is required");
  }
  if (boot.threads < 1) {
    throw input_error("thread count must be positive");
  }
  const TrueValues truth = true_values(scenario, oracle_size, request);
  const bool with_intervals = boot.replicates > 0;

  FitOptions options;
  options.link = scenario.fit_link;

  std::vector<Replicate> slots(static_cast<std::size_t>(replications));
  std::atomic<int> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&]() {
    try {
      for (int r = cursor.fetch_add(1); r < replications;
           r = cursor.fetch_add(1)) {
        Scenario draw = scenario;
        draw.seed = derive_seed(scenario.seed, static_cast<std::uint64_t>(r));
        Replicate& rep = slots[static_cast<std::size_t>(r)];
        try {
          const Dataset data = generate_dataset(draw);
          const FittedCPM fit = fit_cpm(data, options);
          if (!fit.converged) continue;
          const CounterfactualPair pair = counterfactual_cdfs(fit, data);
          rep.report = full_report(pair, request);
          if (with_intervals) {
            BootstrapSpec spec = boot;
            spec.seed = derive_seed(boot.seed, static_cast<std::uint64_t>(r));
            spec.threads = 1;
            rep.intervals = bootstrap(data, options, request, spec);
          }
          rep.ok = true;
        } catch (const input_error&) {
        } catch (const numerical_error&) {
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> hold(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };
  const int workers = std::min(boot.threads, replications);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  int succeeded = 0;
  for (const Replicate& rep : slots) succeeded += rep.ok;
  if (succeeded == 0) {
    throw numerical_error("every replication failed; nothing to summarize");
  }

  ReplicationSummary summary;
  summary.replications = replications;
  summary.failed_replications = replications - succeeded;

  const auto add_row = [&](const std::string& name, double argument,
                           double truth_value, auto&& value_of,
                           auto&& interval_of) {
    long double sum = 0.0L;
    for (const Replicate& rep : slots) {
      if (rep.ok) sum += value_of(rep);
    }
    const double mean = static_cast<double>(sum / succeeded);
    long double squares = 0.0L;
    int covered = 0;
    for (const Replicate& rep : slots) {
      if (!rep.ok) continue;
      const double v = value_of(rep);
      squares += (v - mean) * (v - mean);
      if (with_intervals) {
        const ConfidenceInterval ci = interval_of(rep);
        covered += ci.lower <= truth_value && truth_value <= ci.upper;
      }
    }
    ReplicationRow row;
    row.estimand = name;
    row.argument = argument;
    row.truth = truth_value;
    row.mean_estimate = mean;
    row.pct_bias = truth_value == 0.0
                       ? mean - truth_value
                       : 100.0 * (mean - truth_value) / truth_value;
    row.coverage = with_intervals
                       ? static_cast<double>(covered) / succeeded
                       : std::numeric_limits<double>::quiet_NaN();
    // A single usable replicate carries no spread information, so the
    // standard error is reported as not-a-number rather than zero.
    row.mc_se = succeeded > 1
                    ? std::sqrt(static_cast<double>(squares) /
                                (succeeded - 1) / succeeded)
                    : std::numeric_limits<double>::quiet_NaN();
    summary.rows.push_back(std::move(row));
  };

  if (request.want_att) {
    add_row(
        "att", 0.0, truth.att, [](const Replicate& r) { return *r.report.att; },
        [](const Replicate& r) { return *r.intervals.att; });
  }
  for (std::size_t i = 0; i < request.quantiles.size(); ++i) {
    add_row(
        "qtt", request.quantiles[i], truth.qtt[i],
        [i](const Replicate& r) { return r.report.qtt[i].estimate; },
        [i](const Replicate& r) { return r.intervals.qtt[i]; });
  }
  for (std::size_t i = 0; i < request.thresholds.size(); ++i) {
    add_row(
        "ptt", request.thresholds[i], truth.ptt[i],
        [i](const Replicate& r) { return r.report.ptt[i].estimate; },
        [i](const Replicate& r) { return r.intervals.ptt[i]; });
  }
  if (request.want_mtt) {
    add_row(
        "mtt", 0.0, truth.mtt, [](const Replicate& r) { return *r.report.mtt; },
        [](const Replicate& r) { return *r.intervals.mtt; });
  }
  return summary;
}

namespace {

LinearEstimate ols_interaction(const Dataset& dataset,
                               const Eigen::VectorXd& response,
                               double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw input_error("confidence level must lie strictly inside (0, 1)");
  }
  validate(dataset);
  const Eigen::MatrixXd design = design_matrix(dataset);
  const auto rows = design.rows();
  const auto cols = design.cols() + 1;
  Eigen::MatrixXd x(rows, cols);
  x.col(0).setOnes();
  x.rightCols(design.cols()) = design;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-8);
  if (qr.rank() < cols) {
    std::vector<std::string> labels = {"intercept"};
    for (std::string& name : design_labels(dataset)) {
      labels.push_back(std::move(name));
    }
    const auto& perm = qr.colsPermutation().indices();
    std::ostringstream msg;
    msg << "singular design: column(s) ";
    for (auto j = qr.rank(); j < cols; ++j) {
      if (j > qr.rank()) msg << ", ";
      msg << "'" << labels[static_cast<std::size_t>(perm[j])] << "'";
    }
    msg << (cols - qr.rank() == 1 ? " is" : " are")
        << " constant or collinear with the rest of the design";
    throw input_error(msg.str());
  }

  const Eigen::VectorXd beta = qr.solve(response);
  const Eigen::VectorXd residuals = response - x * beta;
  const auto df = rows - cols;
  if (df < 1) {
    throw input_error("not enough observations for the linear comparator");
  }
  const double sigma2 = residuals.squaredNorm() / static_cast<double>(df);

  // Variance of the interaction coefficient: sigma^2 times the matching
  // diagonal entry of (X'X)^-1. The interaction sits after the intercept,
  // group, and period columns.
  const Eigen::Index interaction = 3;
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(cols);
  unit[interaction] = 1.0;
  const Eigen::MatrixXd xtx = x.transpose() * x;
  const double diag = unit.dot(xtx.ldlt().solve(unit));
  const double se = std::sqrt(std::max(0.0, sigma2 * diag));

  const boost::math::students_t law(static_cast<double>(df));
  const double tq = boost::math::quantile(law, 0.5 + confidence / 2.0);

  LinearEstimate out;
  out.estimate = beta[interaction];
  out.ci = {out.estimate - tq * se, out.estimate + tq * se};
  return out;
}

}  // namespace

LinearEstimate att_prime(const Dataset& dataset, double confidence) {
  Eigen::VectorXd response(dataset.observations.size());
  for (std::size_t i = 0; i < dataset.observations.size(); ++i) {
    response[static_cast<Eigen::Index>(i)] = dataset.observations[i].outcome;
  }
  return ols_interaction(dataset, response, confidence);
}

LinearEstimate ptt_dichotomized(const Dataset& dataset, double threshold,
                                double confidence) {
  if (std::isnan(threshold)) {
    throw std::invalid_argument("threshold must be a real number");
  }
  Eigen::VectorXd response(dataset.observations.size());
  for (std::size_t i = 0; i < dataset.observations.size(); ++i) {
    response[static_cast<Eigen::Index>(i)] =
        dataset.observations[i].outcome <= threshold ? 1.0 : 0.0;
  }
  return ols_interaction(dataset, response, confidence);
}

Scenario scenario_preset(const std::string& name) {
  Scenario s;
  if (name == "paper_fig1") return s;
  if (name == "null_effect") {
    s.interaction_beta = 0.0;
    return s;
  }
  if (name == "identity_normal") {
    s.transform = Transform::identity;
    return s;
  }
  if (name == "identity_logit_fit") {
    s.transform = Transform::identity;
    s.fit_link = Link::logit;
    return s;
  }
  if (name == "exp_logit_fit") {
    s.fit_link = Link::logit;
    return s;
  }
  throw input_error("unknown scenario preset '" + name + "'");
}

std::vector<std::string> scenario_preset_names() {
  return {"paper_fig1", "null_effect", "identity_normal", "identity_logit_fit",
          "exp_logit_fit"};
}

}  // namespace cpmdid
