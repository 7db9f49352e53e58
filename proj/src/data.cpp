#include "cpmdid/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace cpmdid {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_number(const std::string& cell, std::size_t line_no,
                    const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw input_error("line " + std::to_string(line_no) + ", column '" +
                      column + "': non-numeric cell '" + cell + "'");
  }
  if (!std::isfinite(value)) {
    throw input_error("line " + std::to_string(line_no) + ", column '" +
                      column + "': non-finite value '" + cell + "'");
  }
  return value;
}

int parse_indicator(const std::string& cell, std::size_t line_no,
                    const std::string& column) {
  const double v = parse_number(cell, line_no, column);
  if (v != 0.0 && v != 1.0) {
    throw input_error("line " + std::to_string(line_no) + ", column '" +
                      column + "': expected 0 or 1, got '" + cell + "'");
  }
  return v == 1.0 ? 1 : 0;
}

std::size_t header_index(const std::vector<std::string>& header,
                         const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw input_error("missing column '" + name + "' in CSV header");
  }
  if (std::find(it + 1, header.end(), name) != header.end()) {
    throw input_error("column '" + name + "' appears more than once in CSV header");
  }
  return static_cast<std::size_t>(it - header.begin());
}

const char* cell_label(int group, int period) {
  if (group == 0) return period == 0 ? "control-pre" : "control-post";
  return period == 0 ? "treated-pre" : "treated-post";
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path,
                 const ColumnMapping& mapping) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) {
    throw input_error("'" + path.string() + "' is empty");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_fields(line);

  const std::size_t outcome_col = header_index(header, mapping.outcome);
  const std::size_t group_col = header_index(header, mapping.group);
  const std::size_t period_col = header_index(header, mapping.period);
  std::optional<std::size_t> cluster_col;
  if (mapping.cluster) cluster_col = header_index(header, *mapping.cluster);
  std::vector<std::size_t> covariate_cols;
  covariate_cols.reserve(mapping.covariates.size());
  for (const auto& name : mapping.covariates) {
    covariate_cols.push_back(header_index(header, name));
  }

  Dataset ds;
  ds.covariate_names = mapping.covariates;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::ifstream::traits_type::eof()) break;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw input_error("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    Observation obs;
    obs.outcome = parse_number(fields[outcome_col], line_no, mapping.outcome);
    obs.group = parse_indicator(fields[group_col], line_no, mapping.group);
    obs.period = parse_indicator(fields[period_col], line_no, mapping.period);
    obs.covariates.reserve(covariate_cols.size());
    for (std::size_t j = 0; j < covariate_cols.size(); ++j) {
      obs.covariates.push_back(
          parse_number(fields[covariate_cols[j]], line_no, mapping.covariates[j]));
    }
    if (cluster_col) obs.cluster_id = fields[*cluster_col];
    ds.observations.push_back(std::move(obs));
  }

  validate(ds);
  return ds;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path,
              const ColumnMapping& mapping) {
  if (mapping.covariates.size() != dataset.covariate_count()) {
    throw input_error("column mapping lists " +
                      std::to_string(mapping.covariates.size()) +
                      " covariates, dataset has " +
                      std::to_string(dataset.covariate_count()));
  }
  std::ofstream out(path);
  if (!out) throw input_error("cannot write '" + path.string() + "'");

  out << mapping.outcome << ',' << mapping.group << ',' << mapping.period;
  if (mapping.cluster) out << ',' << *mapping.cluster;
  for (const auto& name : mapping.covariates) out << ',' << name;
  out << '\n';

  for (const auto& obs : dataset.observations) {
    out << format_double(obs.outcome) << ',' << obs.group << ',' << obs.period;
    if (mapping.cluster) out << ',' << obs.cluster_id;
    for (double x : obs.covariates) out << ',' << format_double(x);
    out << '\n';
  }
}

void validate(const Dataset& dataset) {
  if (dataset.observations.empty()) {
    throw input_error("dataset has no observations");
  }
  const std::size_t p = dataset.covariate_count();
  bool cell_seen[2][2] = {{false, false}, {false, false}};
  const bool clustered = !dataset.observations.front().cluster_id.empty();

  for (std::size_t i = 0; i < dataset.observations.size(); ++i) {
    const Observation& obs = dataset.observations[i];
    const std::string row = "row " + std::to_string(i + 1);
    if (!std::isfinite(obs.outcome)) {
      throw input_error(row + ": non-finite outcome");
    }
    if (obs.group != 0 && obs.group != 1) {
      throw input_error(row + ": group indicator must be 0 or 1");
    }
    if (obs.period != 0 && obs.period != 1) {
      throw input_error(row + ": period indicator must be 0 or 1");
    }
    if (obs.covariates.size() != p) {
      throw input_error(row + ": has " + std::to_string(obs.covariates.size()) +
                        " covariates, expected " + std::to_string(p));
    }
    for (std::size_t j = 0; j < p; ++j) {
      if (!std::isfinite(obs.covariates[j])) {
        throw input_error(row + ": non-finite covariate '" +
                          dataset.covariate_names[j] + "'");
      }
    }
    if (obs.cluster_id.empty() == clustered) {
      throw input_error(row + ": cluster ids must be present on every row or none");
    }
    cell_seen[obs.group][obs.period] = true;
  }

  for (int d = 0; d < 2; ++d) {
    for (int t = 0; t < 2; ++t) {
      if (!cell_seen[d][t]) {
        throw input_error(std::string("empty ") + cell_label(d, t) +
                          " cell (D=" + std::to_string(d) +
                          ", T=" + std::to_string(t) + ")");
      }
    }
  }
}

SupportEncoding encode_support(const Dataset& dataset) {
  if (dataset.observations.empty()) {
    throw input_error("dataset has no observations");
  }
  SupportEncoding enc;
  enc.support.reserve(dataset.observations.size());
  for (const auto& obs : dataset.observations) {
    enc.support.push_back(obs.outcome);
  }
  std::sort(enc.support.begin(), enc.support.end());
  enc.support.erase(std::unique(enc.support.begin(), enc.support.end()),
                    enc.support.end());
  if (enc.support.size() < 2) {
    throw input_error("model undefined: fewer than two distinct outcome values");
  }

  enc.counts.assign(enc.support.size(), 0);
  enc.category_index.reserve(dataset.observations.size());
  for (const auto& obs : dataset.observations) {
    const auto it = std::lower_bound(enc.support.begin(), enc.support.end(),
                                     obs.outcome);
    const int k = static_cast<int>(it - enc.support.begin());
    enc.category_index.push_back(k);
    ++enc.counts[k];
  }
  return enc;
}

Eigen::MatrixXd design_matrix(const Dataset& dataset) {
  const auto n = static_cast<Eigen::Index>(dataset.observations.size());
  const auto p = static_cast<Eigen::Index>(dataset.covariate_count());
  Eigen::MatrixXd W(n, p + 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Observation& obs = dataset.observations[i];
    W(i, 0) = obs.group;
    W(i, 1) = obs.period;
    W(i, 2) = obs.group * obs.period;
    for (Eigen::Index j = 0; j < p; ++j) W(i, 3 + j) = obs.covariates[j];
  }
  return W;
}

std::vector<std::string> design_labels(const Dataset& dataset) {
  std::vector<std::string> labels = {"group", "period", "group_x_period"};
  labels.insert(labels.end(), dataset.covariate_names.begin(),
                dataset.covariate_names.end());
  return labels;
}

}  // namespace cpmdid
