#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpmdid/counterfactual.hpp"
#include "cpmdid/data.hpp"
#include "cpmdid/diagnostics.hpp"
#include "cpmdid/estimands.hpp"
#include "cpmdid/fit.hpp"
#include "cpmdid/inference.hpp"
#include "cpmdid/links.hpp"
#include "cpmdid/model_io.hpp"
#include "cpmdid/rng.hpp"
#include "cpmdid/simulation.hpp"

namespace {

using nlohmann::json;
using namespace cpmdid;

constexpr const char* kTool = "cpmdid";
constexpr const char* kVersion = "0.1.0";

// Effective settings for one invocation, assembled from built-in defaults,
// then the --config file, then explicit flags (flags win).
struct RunConfig {
  std::string command;
  std::string input;
  std::string model;
  std::string output_dir = ".";
  std::string link = "probit";
  bool link_overridden = false;
  std::uint64_t seed = 0;
  int threads = 1;
  int bootstrap = 0;
  double confidence = 0.95;
  std::vector<double> quantiles = {0.25, 0.5, 0.75};
  std::vector<double> thresholds;
  std::optional<std::pair<double, double>> censor_bounds;
  int max_iterations = 100;
  double tolerance = 1e-8;
  std::string outcome_column = "y";
  std::string group_column = "d";
  std::string period_column = "t";
  std::string cluster_column;
  std::vector<std::string> covariate_columns;
  std::string scenario = "paper_fig1";
  int replications = 500;
  std::vector<int> sizes = {200, 300, 1000, 1500, 2000};
  std::int64_t oracle_size = 1000000;
  std::vector<std::string> links = {"probit", "logit", "cloglog"};
};

RunConfig defaults_for(const std::string& command) {
  RunConfig cfg;
  cfg.command = command;
  if (command == "simulate") cfg.thresholds = {1.0, 3.0, 6.0};
  return cfg;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) out.push_back(token);
  if (!text.empty() && text.back() == ',') out.push_back("");
  return out;
}

double parse_double_token(const std::string& token, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw input_error(what + " has a non-numeric entry '" + token + "'");
  }
}

int parse_int_token(const std::string& token, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw input_error(what + " has a non-integer entry '" + token + "'");
  }
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& what) {
  std::vector<double> out;
  for (const std::string& token : split_commas(text)) {
    out.push_back(parse_double_token(token, what));
  }
  if (out.empty()) throw input_error(what + " must not be empty");
  return out;
}

std::vector<int> parse_int_list(const std::string& text,
                                const std::string& what) {
  std::vector<int> out;
  for (const std::string& token : split_commas(text)) {
    out.push_back(parse_int_token(token, what));
  }
  if (out.empty()) throw input_error(what + " must not be empty");
  return out;
}

std::pair<double, double> parse_censor(const std::string& text) {
  const std::vector<std::string> parts = split_commas(text);
  if (parts.size() != 2) {
    throw input_error("--censor-bounds expects exactly two values L,U");
  }
  return {parse_double_token(parts[0], "censor bound"),
          parse_double_token(parts[1], "censor bound")};
}

// Raw flag values plus the CLI11 handles needed to tell "explicitly set"
// apart from "left at default".
struct Cli {
  std::string config_path, input, model, output_dir, link, censor, scenario;
  std::string quantiles, thresholds, sizes, links, covariates;
  std::string outcome_col, group_col, period_col, cluster_col;
  std::uint64_t seed = 0;
  std::int64_t oracle = 0;
  int threads = 1, bootstrap = 0, replications = 0;
  double confidence = 0.95;
  std::map<std::string, CLI::Option*> opts;

  bool set(const std::string& name) const {
    const auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_common(CLI::App* cmd, Cli& c) {
  c.opts["config"] = cmd->add_option(
      "--config", c.config_path, "JSON config file; explicit flags override");
  c.opts["link"] =
      cmd->add_option("--link", c.link, "probit, logit, or cloglog");
  c.opts["seed"] = cmd->add_option("--seed", c.seed, "base RNG seed");
  c.opts["threads"] =
      cmd->add_option("--threads", c.threads,
                      "worker threads for resampling (results do not depend "
                      "on the thread count)");
  c.opts["output-dir"] =
      cmd->add_option("--output-dir", c.output_dir, "directory for outputs");
  c.opts["bootstrap"] = cmd->add_option(
      "--bootstrap", c.bootstrap,
      "bootstrap replicates for confidence intervals (0 disables them)");
  c.opts["confidence"] =
      cmd->add_option("--confidence", c.confidence, "interval coverage level");
  c.opts["quantiles"] = cmd->add_option(
      "--quantiles", c.quantiles, "comma-separated quantile probabilities");
  c.opts["thresholds"] = cmd->add_option(
      "--thresholds", c.thresholds, "comma-separated outcome thresholds");
  c.opts["censor-bounds"] = cmd->add_option(
      "--censor-bounds", c.censor,
      "L,U detection limits; outcomes outside collapse onto the limits");
}

void add_data_flags(CLI::App* cmd, Cli& c) {
  c.opts["input"] = cmd->add_option("--input", c.input, "input CSV path");
  c.opts["outcome-column"] = cmd->add_option("--outcome-column", c.outcome_col,
                                             "outcome column name");
  c.opts["group-column"] = cmd->add_option(
      "--group-column", c.group_col, "treated-group indicator column name");
  c.opts["period-column"] = cmd->add_option(
      "--period-column", c.period_col, "post-period indicator column name");
  c.opts["cluster-column"] = cmd->add_option(
      "--cluster-column", c.cluster_col,
      "subject identifier column; enables the cluster bootstrap");
  c.opts["covariates"] = cmd->add_option(
      "--covariates", c.covariates, "comma-separated covariate column names");
}

void apply_columns_json(RunConfig& cfg, const json& columns) {
  if (!columns.is_object()) {
    throw input_error("config key 'columns' must be an object");
  }
  for (const auto& [key, value] : columns.items()) {
    if (key == "outcome") {
      cfg.outcome_column = value.get<std::string>();
    } else if (key == "group") {
      cfg.group_column = value.get<std::string>();
    } else if (key == "period") {
      cfg.period_column = value.get<std::string>();
    } else if (key == "cluster") {
      cfg.cluster_column = value.is_null() ? "" : value.get<std::string>();
    } else if (key == "covariates") {
      cfg.covariate_columns = value.get<std::vector<std::string>>();
    } else {
      throw input_error("unknown config key 'columns." + key + "'");
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot read config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw input_error("config file '" + path.string() +
                      "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) {
    throw input_error("config file '" + path.string() +
                      "' must hold a JSON object");
  }
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "input") {
        cfg.input = value.get<std::string>();
      } else if (key == "model") {
        cfg.model = value.get<std::string>();
      } else if (key == "output_dir") {
        cfg.output_dir = value.get<std::string>();
      } else if (key == "link") {
        cfg.link = value.get<std::string>();
        cfg.link_overridden = true;
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "threads") {
        cfg.threads = value.get<int>();
      } else if (key == "bootstrap") {
        cfg.bootstrap = value.get<int>();
      } else if (key == "confidence") {
        cfg.confidence = value.get<double>();
      } else if (key == "quantiles") {
        cfg.quantiles = value.get<std::vector<double>>();
      } else if (key == "thresholds") {
        cfg.thresholds = value.get<std::vector<double>>();
      } else if (key == "censor_bounds") {
        if (value.is_null()) {
          cfg.censor_bounds.reset();
        } else {
          const auto bounds = value.get<std::vector<double>>();
          if (bounds.size() != 2) {
            throw input_error("config key 'censor_bounds' must be [L, U]");
          }
          cfg.censor_bounds = {bounds[0], bounds[1]};
        }
      } else if (key == "max_iterations") {
        cfg.max_iterations = value.get<int>();
      } else if (key == "tolerance") {
        cfg.tolerance = value.get<double>();
      } else if (key == "columns") {
        apply_columns_json(cfg, value);
      } else if (key == "scenario") {
        cfg.scenario = value.get<std::string>();
      } else if (key == "replications") {
        cfg.replications = value.get<int>();
      } else if (key == "sizes") {
        cfg.sizes = value.get<std::vector<int>>();
      } else if (key == "oracle_size") {
        cfg.oracle_size = value.get<std::int64_t>();
      } else if (key == "links") {
        cfg.links = value.get<std::vector<std::string>>();
      } else {
        throw input_error("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw input_error("config file '" + path.string() +
                      "' has a mistyped value: " + e.what());
  }
}

RunConfig build_config(const std::string& command, const Cli& c) {
  RunConfig cfg = defaults_for(command);
  if (c.set("config")) apply_config_file(cfg, c.config_path);

  if (c.set("input")) cfg.input = c.input;
  if (c.set("model")) cfg.model = c.model;
  if (c.set("output-dir")) cfg.output_dir = c.output_dir;
  if (c.set("link")) {
    cfg.link = c.link;
    cfg.link_overridden = true;
  }
  if (c.set("seed")) cfg.seed = c.seed;
  if (c.set("threads")) cfg.threads = c.threads;
  if (c.set("bootstrap")) cfg.bootstrap = c.bootstrap;
  if (c.set("confidence")) cfg.confidence = c.confidence;
  if (c.set("quantiles")) {
    cfg.quantiles = parse_double_list(c.quantiles, "--quantiles");
  }
  if (c.set("thresholds")) {
    cfg.thresholds = parse_double_list(c.thresholds, "--thresholds");
  }
  if (c.set("censor-bounds")) cfg.censor_bounds = parse_censor(c.censor);
  if (c.set("outcome-column")) cfg.outcome_column = c.outcome_col;
  if (c.set("group-column")) cfg.group_column = c.group_col;
  if (c.set("period-column")) cfg.period_column = c.period_col;
  if (c.set("cluster-column")) cfg.cluster_column = c.cluster_col;
  if (c.set("covariates")) {
    cfg.covariate_columns = split_commas(c.covariates);
  }
  if (c.set("scenario")) cfg.scenario = c.scenario;
  if (c.set("replications")) cfg.replications = c.replications;
  if (c.set("sizes")) cfg.sizes = parse_int_list(c.sizes, "--sizes");
  if (c.set("oracle-size")) cfg.oracle_size = c.oracle;
  if (c.set("links")) cfg.links = split_commas(c.links);

  if (cfg.threads < 1) throw input_error("--threads must be at least 1");
  if (cfg.bootstrap < 0) throw input_error("--bootstrap must be non-negative");
  return cfg;
}

// Fingerprint of the semantic configuration. Thread count and output
// directory are excluded on purpose: they change where and how fast results
// appear, never what they are.
std::string config_hash(const RunConfig& cfg) {
  json j;
  j["command"] = cfg.command;
  j["input"] = cfg.input;
  j["model"] = cfg.model;
  j["link"] = cfg.link;
  j["link_overridden"] = cfg.link_overridden;
  j["seed"] = cfg.seed;
  j["bootstrap"] = cfg.bootstrap;
  j["confidence"] = cfg.confidence;
  j["quantiles"] = cfg.quantiles;
  j["thresholds"] = cfg.thresholds;
  if (cfg.censor_bounds) {
    j["censor_bounds"] = {cfg.censor_bounds->first, cfg.censor_bounds->second};
  } else {
    j["censor_bounds"] = nullptr;
  }
  j["max_iterations"] = cfg.max_iterations;
  j["tolerance"] = cfg.tolerance;
  j["columns"] = {{"outcome", cfg.outcome_column},
                  {"group", cfg.group_column},
                  {"period", cfg.period_column},
                  {"cluster", cfg.cluster_column},
                  {"covariates", cfg.covariate_columns}};
  j["scenario"] = cfg.scenario;
  j["replications"] = cfg.replications;
  j["sizes"] = cfg.sizes;
  j["oracle_size"] = cfg.oracle_size;
  j["links"] = cfg.links;
  return fnv1a_hex(j.dump());
}

Provenance make_provenance(const RunConfig& cfg, const std::string& input_hash) {
  Provenance p;
  p.tool = kTool;
  p.version = kVersion;
  p.config_hash = config_hash(cfg);
  p.seed = cfg.seed;
  p.input_hash = input_hash;
  return p;
}

json provenance_json(const Provenance& p) {
  json j;
  j["tool"] = p.tool;
  j["version"] = p.version;
  j["config_hash"] = p.config_hash;
  j["seed"] = p.seed;
  if (!p.input_hash.empty()) j["input_hash"] = p.input_hash;
  return j;
}

std::string provenance_comment(const Provenance& p) {
  std::string out = "# tool: " + p.tool + " " + p.version + "\n";
  out += "# config: " + p.config_hash + "\n";
  out += "# seed: " + std::to_string(p.seed) + "\n";
  if (!p.input_hash.empty()) out += "# input: " + p.input_hash + "\n";
  return out;
}

ColumnMapping mapping_from(const RunConfig& cfg) {
  ColumnMapping mapping;
  mapping.outcome = cfg.outcome_column;
  mapping.group = cfg.group_column;
  mapping.period = cfg.period_column;
  if (!cfg.cluster_column.empty()) mapping.cluster = cfg.cluster_column;
  mapping.covariates = cfg.covariate_columns;
  return mapping;
}

FitOptions fit_options_from(const RunConfig& cfg) {
  FitOptions options;
  options.link = parse_link(cfg.link);
  options.max_iterations = cfg.max_iterations;
  options.tolerance = cfg.tolerance;
  options.censor_bounds = cfg.censor_bounds;
  return options;
}

std::filesystem::path ensure_output_dir(const RunConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw input_error("cannot create output directory '" + dir.string() +
                      "': " + ec.message());
  }
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw input_error("failed while writing '" + path.string() + "'");
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

// Empty cell for not-a-number, so disabled coverage and undefined standard
// errors stay distinguishable from zero in the CSV.
std::string csv_cell(double v) {
  return std::isnan(v) ? std::string() : format_double(v);
}

void ci_json_or_null(const std::optional<ConfidenceInterval>& ci,
                     json& target) {
  if (ci) {
    target = json::array({ci->lower, ci->upper});
  } else {
    target = nullptr;
  }
}

Dataset load_input(const RunConfig& cfg) {
  if (cfg.input.empty()) {
    throw input_error("--input is required for '" + cfg.command + "'");
  }
  return load_csv(cfg.input, mapping_from(cfg));
}

FittedCPM fit_or_fail(const Dataset& data, const FitOptions& options) {
  FittedCPM fit = fit_cpm(data, options);
  if (!fit.converged) {
    throw numerical_error(
        "fit did not converge within " +
        std::to_string(options.max_iterations) +
        " iterations (largest score component per row " +
        format_double(fit.max_abs_score) +
        "); check for separation or try censor bounds");
  }
  return fit;
}

int run_fit(const RunConfig& cfg) {
  const Dataset data = load_input(cfg);
  const FitOptions options = fit_options_from(cfg);
  const FittedCPM fit = fit_or_fail(data, options);

  const std::filesystem::path dir = ensure_output_dir(cfg);
  PersistedModel model;
  model.fit = fit;
  model.covariate_names = data.covariate_names;
  model.options = options;
  model.provenance = make_provenance(cfg, hash_file(cfg.input));
  const std::filesystem::path model_path = dir / "model.json";
  save_model(model, model_path);

  std::cout << "model written to " << model_path.string() << "\n";
  std::cout << "  rows        " << data.observations.size() << "\n";
  std::cout << "  support     " << fit.support.size()
            << " distinct outcomes\n";
  std::cout << "  link        " << link_name(fit.link) << "\n";
  std::cout << "  loglik      " << format_double(fit.loglik) << "\n";
  std::cout << "  iterations  " << fit.iterations << "\n";
  const std::vector<std::string> labels = design_labels(data);
  for (Eigen::Index i = 0; i < fit.betas.size(); ++i) {
    std::cout << "  beta[" << labels[static_cast<std::size_t>(i)]
              << "]  " << format_double(fit.betas[i]) << "\n";
  }
  return 0;
}

int run_estimate(const RunConfig& cfg) {
  const Dataset data = load_input(cfg);

  FitOptions options;
  FittedCPM fit;
  if (!cfg.model.empty()) {
    PersistedModel persisted = load_model(cfg.model);
    if (persisted.covariate_names != data.covariate_names) {
      throw input_error(
          "the model's covariates do not match the dataset's covariate "
          "columns; refit or adjust --covariates");
    }
    if (!persisted.fit.converged) {
      throw numerical_error("the persisted model is not a converged fit");
    }
    fit = std::move(persisted.fit);
    options = persisted.options;
  } else {
    options = fit_options_from(cfg);
    fit = fit_or_fail(data, options);
  }

  EstimandRequest request;
  request.quantiles = cfg.quantiles;
  request.thresholds = cfg.thresholds;

  const CounterfactualPair pair = counterfactual_cdfs(fit, data);
  EstimandReport report = full_report(pair, request);

  std::optional<IntervalSet> intervals;
  if (cfg.bootstrap > 0) {
    BootstrapSpec spec;
    spec.replicates = cfg.bootstrap;
    spec.seed = cfg.seed;
    spec.confidence = cfg.confidence;
    spec.threads = cfg.threads;
    intervals = bootstrap(data, options, request, spec);
    report.att_ci = intervals->att;
    for (std::size_t i = 0; i < report.qtt.size(); ++i) {
      report.qtt[i].ci = intervals->qtt[i];
    }
    for (std::size_t i = 0; i < report.ptt.size(); ++i) {
      report.ptt[i].ci = intervals->ptt[i];
    }
    report.mtt_ci = intervals->mtt;
  }

  const Provenance prov = make_provenance(cfg, hash_file(cfg.input));
  std::string csv = provenance_comment(prov);
  csv += "estimand,argument,estimate,lower,upper\n";
  const auto csv_row = [&csv](const std::string& name, const std::string& arg,
                              double estimate,
                              const std::optional<ConfidenceInterval>& ci) {
    csv += name + "," + arg + "," + format_double(estimate) + ",";
    if (ci) {
      csv += format_double(ci->lower) + "," + format_double(ci->upper);
    } else {
      csv += ",";
    }
    csv += "\n";
  };
  csv_row("att", "", *report.att, report.att_ci);
  for (const ReportEntry& e : report.qtt) {
    csv_row("qtt", format_double(e.argument), e.estimate, e.ci);
  }
  for (const ReportEntry& e : report.ptt) {
    csv_row("ptt", format_double(e.argument), e.estimate, e.ci);
  }
  csv_row("mtt", "", *report.mtt, report.mtt_ci);

  json estimates;
  estimates["att"]["estimate"] = *report.att;
  ci_json_or_null(report.att_ci, estimates["att"]["ci"]);
  estimates["qtt"] = json::array();
  for (const ReportEntry& e : report.qtt) {
    json entry;
    entry["p"] = e.argument;
    entry["estimate"] = e.estimate;
    ci_json_or_null(e.ci, entry["ci"]);
    estimates["qtt"].push_back(std::move(entry));
  }
  estimates["ptt"] = json::array();
  for (const ReportEntry& e : report.ptt) {
    json entry;
    entry["threshold"] = e.argument;
    entry["estimate"] = e.estimate;
    ci_json_or_null(e.ci, entry["ci"]);
    estimates["ptt"].push_back(std::move(entry));
  }
  estimates["mtt"]["estimate"] = *report.mtt;
  ci_json_or_null(report.mtt_ci, estimates["mtt"]["ci"]);

  json out;
  out["estimates"] = std::move(estimates);
  out["treated_post_rows"] = pair.n11;
  if (intervals) {
    out["bootstrap"] = {{"replicates", intervals->replicates},
                        {"failed", intervals->failed_replicates},
                        {"confidence", cfg.confidence}};
  } else {
    out["bootstrap"] = nullptr;
  }
  out["provenance"] = provenance_json(prov);

  const std::filesystem::path dir = ensure_output_dir(cfg);
  write_file(dir / "estimates.csv", csv);
  write_file(dir / "estimates.json", json_text(out));

  std::cout << "estimates written to " << (dir / "estimates.csv").string()
            << " and " << (dir / "estimates.json").string() << "\n";
  std::cout << csv;
  return 0;
}

int run_simulate(const RunConfig& cfg) {
  Scenario base = scenario_preset(cfg.scenario);
  if (cfg.link_overridden) base.fit_link = parse_link(cfg.link);

  EstimandRequest request;
  request.quantiles = cfg.quantiles;
  request.thresholds = cfg.thresholds;

  const Provenance prov = make_provenance(cfg, "");
  std::string csv = provenance_comment(prov);
  csv += "scenario,n,estimand,truth,mean_estimate,pct_bias,coverage,mc_se\n";
  json sizes_json = json::array();

  for (std::size_t idx = 0; idx < cfg.sizes.size(); ++idx) {
    Scenario scenario = base;
    scenario.n_subjects = cfg.sizes[idx];
    scenario.seed = derive_seed(cfg.seed, 2 * idx);

    BootstrapSpec boot;
    boot.replicates = cfg.bootstrap;
    boot.seed = derive_seed(cfg.seed, 2 * idx + 1);
    boot.confidence = cfg.confidence;
    boot.threads = cfg.threads;

    const ReplicationSummary summary = run_replications(
        scenario, cfg.replications, boot, request, cfg.oracle_size);

    json rows = json::array();
    for (const ReplicationRow& row : summary.rows) {
      std::string label = row.estimand;
      if (row.estimand == "qtt" || row.estimand == "ptt") {
        label += "(" + format_double(row.argument) + ")";
      }
      csv += cfg.scenario + "," + std::to_string(cfg.sizes[idx]) + "," +
             label + "," + format_double(row.truth) + "," +
             format_double(row.mean_estimate) + "," +
             format_double(row.pct_bias) + "," + csv_cell(row.coverage) +
             "," + csv_cell(row.mc_se) + "\n";
      json r;
      r["estimand"] = label;
      r["truth"] = row.truth;
      r["mean_estimate"] = row.mean_estimate;
      r["pct_bias"] = row.pct_bias;
      r["coverage"] =
          std::isnan(row.coverage) ? json(nullptr) : json(row.coverage);
      r["mc_se"] = std::isnan(row.mc_se) ? json(nullptr) : json(row.mc_se);
      rows.push_back(std::move(r));
    }
    json size_entry;
    size_entry["n"] = cfg.sizes[idx];
    size_entry["replications"] = summary.replications;
    size_entry["failed_replications"] = summary.failed_replications;
    size_entry["rows"] = std::move(rows);
    sizes_json.push_back(std::move(size_entry));

    std::cout << "n=" << cfg.sizes[idx] << ": " << summary.rows.size()
              << " estimands, " << summary.replications << " replications ("
              << summary.failed_replications << " failed)\n";
  }

  json out;
  out["scenario"] = cfg.scenario;
  out["sizes"] = std::move(sizes_json);
  out["provenance"] = provenance_json(prov);

  const std::filesystem::path dir = ensure_output_dir(cfg);
  write_file(dir / "simulation.csv", csv);
  write_file(dir / "simulation.json", json_text(out));
  std::cout << "summary written to " << (dir / "simulation.csv").string()
            << " and " << (dir / "simulation.json").string() << "\n";
  return 0;
}

int run_diagnose(const RunConfig& cfg) {
  const Dataset data = load_input(cfg);
  const FitOptions options = fit_options_from(cfg);
  FittedCPM fit = fit_cpm(data, options);
  if (!fit.converged) {
    throw numerical_error(
        "diagnostics need a converged fit, and this fit stopped after " +
        std::to_string(fit.iterations) +
        " iterations without converging; check for separation or try censor "
        "bounds");
  }

  const ResidualTable table = omer_residuals(fit, data);

  std::vector<Link> candidates;
  candidates.reserve(cfg.links.size());
  for (const std::string& name : cfg.links) {
    candidates.push_back(parse_link(name));
  }
  const LinkComparison comparison = compare_links(data, candidates, options);

  const Provenance prov = make_provenance(cfg, hash_file(cfg.input));
  std::string csv = provenance_comment(prov);
  csv += "observed,expected,residual";
  for (const std::string& name : data.covariate_names) csv += "," + name;
  csv += "\n";
  for (const ResidualRow& row : table.rows) {
    csv += format_double(row.observed) + "," + format_double(row.expected) +
           "," + format_double(row.residual);
    for (const double x : row.covariates) csv += "," + format_double(x);
    csv += "\n";
  }

  json fits = json::array();
  for (const auto& entry : comparison.fits) {
    json e;
    e["link"] = std::string(link_name(entry.link));
    e["loglik"] =
        std::isnan(entry.loglik) ? json(nullptr) : json(entry.loglik);
    e["converged"] = entry.converged;
    fits.push_back(std::move(e));
  }
  json out;
  out["comparison"]["fits"] = std::move(fits);
  out["comparison"]["preferred"] = std::string(link_name(comparison.preferred));
  out["residual_rows"] = table.rows.size();
  out["provenance"] = provenance_json(prov);

  const std::filesystem::path dir = ensure_output_dir(cfg);
  write_file(dir / "residuals.csv", csv);
  write_file(dir / "links.json", json_text(out));

  std::cout << "residuals written to " << (dir / "residuals.csv").string()
            << " (" << table.rows.size() << " rows)\n";
  std::cout << "link comparison written to " << (dir / "links.json").string()
            << "\n";
  for (const auto& entry : comparison.fits) {
    std::cout << "  " << link_name(entry.link) << "  loglik "
              << (std::isnan(entry.loglik) ? std::string("n/a")
                                           : format_double(entry.loglik))
              << (entry.converged ? "" : "  (not converged)") << "\n";
  }
  std::cout << "preferred link: " << link_name(comparison.preferred) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "batch difference-in-differences estimation with cumulative "
      "probability models"};
  app.set_version_flag("--version", std::string(kTool) + " " + kVersion);
  app.require_subcommand(1);

  Cli fit_cli, estimate_cli, simulate_cli, diagnose_cli;

  CLI::App* fit_cmd =
      app.add_subcommand("fit", "fit the model and persist it with provenance");
  add_common(fit_cmd, fit_cli);
  add_data_flags(fit_cmd, fit_cli);

  CLI::App* estimate_cmd = app.add_subcommand(
      "estimate",
      "treatment-effect estimates with optional bootstrap intervals");
  add_common(estimate_cmd, estimate_cli);
  add_data_flags(estimate_cmd, estimate_cli);
  estimate_cli.opts["model"] = estimate_cmd->add_option(
      "--model", estimate_cli.model,
      "persisted model file; skips refitting the point estimates");

  CLI::App* simulate_cmd = app.add_subcommand(
      "simulate", "replication study over a bundled scenario");
  add_common(simulate_cmd, simulate_cli);
  {
    std::string scenario_help = "scenario preset (";
    const std::vector<std::string> names = cpmdid::scenario_preset_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
      scenario_help += (i ? ", " : "") + names[i];
    }
    scenario_help += ")";
    simulate_cli.opts["scenario"] = simulate_cmd->add_option(
        "--scenario", simulate_cli.scenario, scenario_help);
  }
  simulate_cli.opts["replications"] = simulate_cmd->add_option(
      "--replications", simulate_cli.replications, "replications per size");
  simulate_cli.opts["sizes"] = simulate_cmd->add_option(
      "--sizes", simulate_cli.sizes, "comma-separated subject counts");
  simulate_cli.opts["oracle-size"] = simulate_cmd->add_option(
      "--oracle-size", simulate_cli.oracle,
      "pseudo-subjects used to pin the scenario's true effect values");

  CLI::App* diagnose_cmd = app.add_subcommand(
      "diagnose", "residual export and link comparison");
  add_common(diagnose_cmd, diagnose_cli);
  add_data_flags(diagnose_cmd, diagnose_cli);
  diagnose_cli.opts["links"] = diagnose_cmd->add_option(
      "--links", diagnose_cli.links,
      "comma-separated candidate links to compare");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(build_config("fit", fit_cli));
    if (estimate_cmd->parsed()) {
      return run_estimate(build_config("estimate", estimate_cli));
    }
    if (simulate_cmd->parsed()) {
      return run_simulate(build_config("simulate", simulate_cli));
    }
    if (diagnose_cmd->parsed()) {
      return run_diagnose(build_config("diagnose", diagnose_cli));
    }
  } catch (const cpmdid::input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cpmdid::numerical_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
