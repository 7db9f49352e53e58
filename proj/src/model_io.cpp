#include "cpmdid/model_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cpmdid/data.hpp"
#include "cpmdid/links.hpp"

namespace cpmdid {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw input_error("cannot read '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

json provenance_to_json(const Provenance& p) {
  json j;
  j["tool"] = p.tool;
  j["version"] = p.version;
  j["config_hash"] = p.config_hash;
  j["seed"] = p.seed;
  if (!p.input_hash.empty()) j["input_hash"] = p.input_hash;
  return j;
}

Provenance provenance_from_json(const json& j) {
  Provenance p;
  p.tool = j.at("tool").get<std::string>();
  p.version = j.at("version").get<std::string>();
  p.config_hash = j.at("config_hash").get<std::string>();
  p.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("input_hash")) {
    p.input_hash = j.at("input_hash").get<std::string>();
  }
  return p;
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ull;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(hash));
  return std::string(out, 16);
}

std::string hash_file(const std::filesystem::path& path) {
  return fnv1a_hex(read_file(path));
}

void save_model(const PersistedModel& model,
                const std::filesystem::path& path) {
  const FittedCPM& fit = model.fit;
  if (fit.support.size() < 2 ||
      fit.alphas.size() + 1 != fit.support.size() ||
      fit.betas.size() !=
          static_cast<Eigen::Index>(3 + model.covariate_names.size()) ||
      !std::isfinite(fit.loglik)) {
    throw std::invalid_argument("model is not in a persistable state");
  }

  json m;
  m["link"] = std::string(link_name(fit.link));
  m["support"] = fit.support;
  m["alphas"] = fit.alphas;
  m["betas"] = std::vector<double>(fit.betas.data(),
                                   fit.betas.data() + fit.betas.size());
  m["covariates"] = model.covariate_names;
  m["loglik"] = fit.loglik;
  m["converged"] = fit.converged;
  m["iterations"] = fit.iterations;

  json o;
  o["link"] = std::string(link_name(model.options.link));
  o["max_iterations"] = model.options.max_iterations;
  o["tolerance"] = model.options.tolerance;
  if (model.options.censor_bounds) {
    o["censor_bounds"] = {model.options.censor_bounds->first,
                          model.options.censor_bounds->second};
  } else {
    o["censor_bounds"] = nullptr;
  }

  json j;
  j["model"] = std::move(m);
  j["options"] = std::move(o);
  j["provenance"] = provenance_to_json(model.provenance);

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw input_error("cannot write '" + path.string() + "'");
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw input_error("failed while writing '" + path.string() + "'");
  }
}

PersistedModel load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw input_error("model file '" + path.string() +
                      "' is not valid JSON: " + e.what());
  }

  try {
    const json& m = j.at("model");
    PersistedModel model;
    model.fit.link = parse_link(m.at("link").get<std::string>());
    model.fit.support = m.at("support").get<std::vector<double>>();
    model.fit.alphas = m.at("alphas").get<std::vector<double>>();
    const auto betas = m.at("betas").get<std::vector<double>>();
    model.fit.betas = Eigen::Map<const Eigen::VectorXd>(
        betas.data(), static_cast<Eigen::Index>(betas.size()));
    model.covariate_names = m.at("covariates").get<std::vector<std::string>>();
    model.fit.loglik = m.at("loglik").get<double>();
    model.fit.converged = m.at("converged").get<bool>();
    model.fit.iterations = m.at("iterations").get<int>();

    const json& o = j.at("options");
    model.options.link = parse_link(o.at("link").get<std::string>());
    model.options.max_iterations = o.at("max_iterations").get<int>();
    model.options.tolerance = o.at("tolerance").get<double>();
    if (!o.at("censor_bounds").is_null()) {
      const auto bounds = o.at("censor_bounds").get<std::vector<double>>();
      if (bounds.size() != 2) {
        throw input_error("model file '" + path.string() +
                          "' has malformed censor bounds");
      }
      model.options.censor_bounds = {bounds[0], bounds[1]};
    }

    model.provenance = provenance_from_json(j.at("provenance"));

    if (model.fit.support.size() < 2 ||
        model.fit.alphas.size() + 1 != model.fit.support.size()) {
      throw input_error("model file '" + path.string() +
                        "' has inconsistent support and alpha sizes");
    }
    for (std::size_t i = 1; i < model.fit.alphas.size(); ++i) {
      if (!(model.fit.alphas[i] > model.fit.alphas[i - 1])) {
        throw input_error("model file '" + path.string() +
                          "' has non-increasing alphas");
      }
    }
    for (std::size_t i = 1; i < model.fit.support.size(); ++i) {
      if (!(model.fit.support[i] > model.fit.support[i - 1])) {
        throw input_error("model file '" + path.string() +
                          "' has non-increasing support");
      }
    }
    if (model.fit.betas.size() !=
        static_cast<Eigen::Index>(3 + model.covariate_names.size())) {
      throw input_error("model file '" + path.string() +
                        "' has a coefficient count that does not match its "
                        "covariate list");
    }
    return model;
  } catch (const json::exception& e) {
    throw input_error("model file '" + path.string() +
                      "' is missing or mistypes a field: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw input_error("model file '" + path.string() + "' is invalid: " +
                      e.what());
  }
}

}  // namespace cpmdid
