#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cpmdid/data.hpp"
#include "cpmdid/estimands.hpp"
#include "cpmdid/inference.hpp"
#include "cpmdid/links.hpp"

namespace cpmdid {

enum class Transform { identity, exponential };
enum class ErrorLaw { normal, logistic };

// Joint law of the treated-arm and untreated-arm errors for a two-period
// subject. Each subject reveals only the arm matching its group, so the
// generated datasets are identical under both couplings, and the estimands
// depend only on the marginal potential-outcome distributions, so the true
// values coincide as well. The enumeration records which joint law the
// scenario posits.
enum class ErrorCoupling { independent_arms, fully_correlated };

Transform parse_transform(std::string_view name);
std::string_view transform_name(Transform t);
ErrorLaw parse_error_law(std::string_view name);
std::string_view error_law_name(ErrorLaw law);

// Two-group, two-period generating process: a subject is longitudinal with
// probability 0.5 (one row per period, shared group and covariates, error
// pair correlated at pair_correlation) and single-row otherwise (group and
// period each Bernoulli(0.5)). The latent outcome is
// group_beta*D + period_beta*T + interaction_beta*D*T + covariate effects +
// error, pushed through the transform. Even-indexed covariates are
// Bernoulli(0.5), odd-indexed ones standard normal.
struct Scenario {
  double group_beta = 1.0;
  double period_beta = 0.5;
  double interaction_beta = 0.5;
  std::vector<double> covariate_betas = {0.25, 0.5};
  Transform transform = Transform::exponential;
  ErrorLaw error_law = ErrorLaw::normal;
  double pair_correlation = 0.5;  // must lie in [0, 1)
  ErrorCoupling coupling = ErrorCoupling::independent_arms;
  Link fit_link = Link::probit;
  int n_subjects = 1000;
  std::uint64_t seed = 0;
};

// Population values of the requested estimands, aligned with the request's
// quantile and threshold lists.
struct TrueValues {
  double att = 0.0;
  std::vector<double> qtt;
  std::vector<double> ptt;
  double mtt = 0.5;
};

// The win-probability truth is computed either exactly on the product
// measure of the two empirical potential-outcome distributions, or by
// sampling independent subject pairs i != j.
enum class MttOracle { exact, sampled };

// One summary line per estimand. pct_bias is 100*(mean - truth)/truth for a
// nonzero truth and the absolute bias mean - truth when the truth is exactly
// zero (the null scenario). coverage is NaN when no bootstrap was run, and
// mc_se is NaN when fewer than two replicates were usable.
struct ReplicationRow {
  std::string estimand;  // "att", "qtt", "ptt", or "mtt"
  double argument = 0.0;  // quantile level or threshold; 0 for att and mtt
  double truth = 0.0;
  double mean_estimate = 0.0;
  double pct_bias = 0.0;
  double coverage = 0.0;
  double mc_se = 0.0;
};

struct ReplicationSummary {
  std::vector<ReplicationRow> rows;
  int replications = 0;
  int failed_replications = 0;
};

// Deterministic in the scenario seed; every subject carries a cluster id so
// downstream bootstrap resamples whole subjects.
Dataset generate_dataset(const Scenario& scenario);

// Simulates oracle_size treated post-period subjects, evaluating both
// potential outcomes per subject: the treated arm adds interaction_beta to
// the latent mean, the untreated arm omits it, and both keep the group
// effect. The same error draw feeds both arms; the estimands depend only on
// the marginals, so sharing the draw is free variance reduction and makes
// the null-scenario truths exact. Requires oracle_size >= 100000.
TrueValues true_values(const Scenario& scenario, std::int64_t oracle_size,
                       const EstimandRequest& request,
                       MttOracle mtt_method = MttOracle::exact);

// Generate -> fit -> estimate -> bootstrap, `replications` times, with
// replicate r seeded by streams derived from (scenario.seed, r) and
// (bootstrap.seed, r). bootstrap.replicates == 0 disables interval
// estimation and leaves coverage NaN. Replicates whose fit fails or does not
// converge are counted and dropped. bootstrap.threads bounds the worker pool
// over replications; the output is identical for any thread count.
ReplicationSummary run_replications(const Scenario& scenario, int replications,
                                    const BootstrapSpec& bootstrap,
                                    const EstimandRequest& request,
                                    std::int64_t oracle_size = 1000000);

struct LinearEstimate {
  double estimate = 0.0;
  ConfidenceInterval ci;
};

// Ordinary least squares of the outcome on [1, D, T, D*T, X...]; the
// estimate is the interaction coefficient with its homoskedastic-variance
// t interval. Throws input_error on a singular design.
LinearEstimate att_prime(const Dataset& dataset, double confidence = 0.95);

// Same linear comparator with the outcome replaced by the indicator
// I{Y <= threshold}.
LinearEstimate ptt_dichotomized(const Dataset& dataset, double threshold,
                                double confidence = 0.95);

// Named scenario presets for the command line and the test harness.
Scenario scenario_preset(const std::string& name);
std::vector<std::string> scenario_preset_names();

}  // namespace cpmdid
