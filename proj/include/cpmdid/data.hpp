#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpmdid {

// Thrown for malformed input: bad files, bad schemas, invalid analysis
// tables. The CLI maps it to the usage/input exit status.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when an otherwise valid computation fails numerically, e.g. the
// fitter does not converge where convergence is required.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One analysis row. group is the treated-group indicator D, period the
// post-period indicator T. cluster_id is empty when the dataset carries no
// clustering.
struct Observation {
  double outcome = 0.0;
  int group = 0;
  int period = 0;
  std::vector<double> covariates;
  std::string cluster_id;
};

struct Dataset {
  std::vector<Observation> observations;
  std::vector<std::string> covariate_names;

  bool has_clusters() const {
    return !observations.empty() && !observations.front().cluster_id.empty();
  }
  std::size_t covariate_count() const { return covariate_names.size(); }
};

// Maps CSV header names to roles. covariates is ordered; cluster is optional.
struct ColumnMapping {
  std::string outcome;
  std::string group;
  std::string period;
  std::optional<std::string> cluster;
  std::vector<std::string> covariates;
};

// Distinct sorted outcome values with per-row category assignment. Ties are
// grouped by exact floating-point equality; callers with noisy continuous
// data that should tie must pre-round.
struct SupportEncoding {
  std::vector<double> support;     // strictly increasing, K values
  std::vector<int> category_index; // per row, into support
  std::vector<int> counts;         // per category

  int category_count() const { return static_cast<int>(support.size()); }
};

// Shortest round-trip decimal form; shared by every writer so that repeated
// runs produce byte-identical files.
std::string format_double(double v);

// Strict CSV reader: header row, comma separated, every cell numeric except
// an optional cluster column. Errors name the offending line and column.
Dataset load_csv(const std::filesystem::path& path,
                 const ColumnMapping& mapping);

// Writer used for round trips and generated data; doubles are emitted in
// shortest round-trip form.
void save_csv(const Dataset& dataset, const std::filesystem::path& path,
              const ColumnMapping& mapping);

// Checks the Dataset invariants: finite values, consistent covariate arity,
// binary group/period, all four (D,T) cells occupied, all-or-none clusters.
// Throws input_error with a description naming the first violation.
void validate(const Dataset& dataset);

// Fails with input_error when fewer than two distinct outcomes exist.
SupportEncoding encode_support(const Dataset& dataset);

// Fixed column order [D, T, D*T, X...]; one row per observation.
Eigen::MatrixXd design_matrix(const Dataset& dataset);

// Design column labels in matrix order, using the dataset's covariate names.
std::vector<std::string> design_labels(const Dataset& dataset);

}  // namespace cpmdid
