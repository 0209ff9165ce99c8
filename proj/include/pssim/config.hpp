#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pssim/assign.hpp"
#include "pssim/coupling.hpp"
#include "pssim/decomposition.hpp"
#include "pssim/error.hpp"
#include "pssim/kernel.hpp"
#include "pssim/lattice.hpp"
#include "pssim/models.hpp"

// JSON run configuration, schema 1:
//
// {
//   "schema": 1,
//   "model": {
//     "model": "ising" | "gibbs-cont" | "autonormal" | "ising-pair",
//     "d": 1, "beta": 0.15,
//     "values": [-1, 1], "weights": [1, 1],          ising only
//     "density": 1.0,                               gibbs-cont only
//     "sigma": 0.5,                                 autonormal only
//     "kernel": {"type": "nearest-neighbor", "coupling": 1.0},
//     "field": {"type": "constant", "value": 0.0},
//     "kernel_upper": {...}, "field_upper": 0.1     ising-pair only
//   },
//   "sampler": {
//     "sites": [[0], [1]], "replicas": 1000, "seed": 42,
//     "step_cap": 50, "horizon": 2.0, "initial": {"type": "constant", "value": 1},
//     "range_cap": 64
//   },
//   "output": {"path": "samples.jsonl", "format": "jsonl"}
// }
//
// Kernel types: "nearest-neighbor" {coupling}, "table" {entries: [{offset,
// value}]}, "exponential" {theta, r, range?}, "power" {theta, p, range},
// "zero". Field types: "constant" {value}, "alternating" {even, odd}; a bare
// number means a constant field.
namespace pssim {

using json = nlohmann::json;

struct SamplerConfig {
  std::vector<Site> sites;
  std::size_t replicas = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> step_cap;
  std::optional<double> horizon;
  json initial;
  int range_cap = kDefaultRangeCap;
};

struct OutputConfig {
  std::optional<std::string> path;
  std::string format = "jsonl";
};

struct RunConfig {
  json model;
  std::string model_kind;
  int d = 1;
  SamplerConfig sampler;
  OutputConfig output;
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null())
    throw ConfigError("missing \"" + std::string(key) + "\" in " + where);
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for \"") + key + "\" in " + where + ": " + e.what());
  }
}

inline Site parse_site(const json& j, int d) {
  if (!j.is_array() || static_cast<int>(j.size()) != d)
    throw ConfigError("site " + j.dump() + " must be an array of " + std::to_string(d) + " integers");
  std::vector<int> c;
  for (const auto& x : j) {
    if (!x.is_number_integer()) throw ConfigError("site coordinates must be integers: " + j.dump());
    c.push_back(x.get<int>());
  }
  return Site::from(c);
}

}  // namespace detail

inline InteractionKernel parse_kernel(const json& j, int d) {
  if (j.is_null()) return InteractionKernel::zero(d);
  if (!j.is_object()) throw ConfigError("kernel must be an object");
  const auto type = detail::require<std::string>(j, "type", "kernel");
  try {
    if (type == "nearest-neighbor")
      return InteractionKernel::nearest_neighbor(d, detail::get_or<double>(j, "coupling", 1.0));
    if (type == "zero") return InteractionKernel::zero(d);
    if (type == "table") {
      std::vector<std::pair<Site, double>> entries;
      if (!j.contains("entries") || !j["entries"].is_array()) throw ConfigError("table kernel needs \"entries\"");
      for (const auto& e : j["entries"])
        entries.emplace_back(detail::parse_site(e.at("offset"), d), detail::require<double>(e, "value", "kernel entry"));
      return InteractionKernel::table(d, std::move(entries));
    }
    if (type == "exponential") {
      std::optional<int> range;
      if (j.contains("range") && !j["range"].is_null()) range = j["range"].get<int>();
      return InteractionKernel::exponential(d, detail::require<double>(j, "theta", "kernel"),
                                            detail::require<double>(j, "r", "kernel"), range);
    }
    if (type == "power")
      return InteractionKernel::power_law(d, detail::require<double>(j, "theta", "kernel"),
                                          detail::require<double>(j, "p", "kernel"),
                                          detail::require<int>(j, "range", "kernel"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid kernel: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid kernel: ") + e.what());
  }
  throw ConfigError("unknown kernel type \"" + type + "\"");
}

inline FieldFamily parse_field(const json& j) {
  if (j.is_null()) return FieldFamily::constant(0.0);
  if (j.is_number()) return FieldFamily::constant(j.get<double>());
  if (!j.is_object()) throw ConfigError("field must be a number or an object");
  const auto type = detail::require<std::string>(j, "type", "field");
  if (type == "constant") return FieldFamily::constant(detail::get_or<double>(j, "value", 0.0));
  if (type == "alternating")
    return FieldFamily::alternating(detail::require<double>(j, "even", "field"),
                                    detail::require<double>(j, "odd", "field"));
  throw ConfigError("unknown field type \"" + type + "\"");
}

inline InitialCondition parse_initial(const json& j, std::uint64_t seed) {
  if (j.is_null()) return InitialCondition::constant(1.0);
  if (!j.is_object()) throw ConfigError("initial must be an object");
  const auto type = detail::require<std::string>(j, "type", "initial");
  if (type == "constant") return InitialCondition::constant(detail::get_or<double>(j, "value", 1.0));
  if (type == "checkerboard")
    return InitialCondition::checkerboard(detail::get_or<double>(j, "even", 1.0), detail::get_or<double>(j, "odd", -1.0));
  if (type == "iid") return InitialCondition::iid(detail::get_or<std::uint64_t>(j, "seed", seed));
  throw ConfigError("unknown initial condition \"" + type + "\"");
}

inline RunConfig parse_config(const json& root) {
  if (!root.is_object()) throw ConfigError("configuration must be a JSON object");
  const int schema = detail::get_or<int>(root, "schema", 1);
  if (schema != 1) throw ConfigError("unsupported schema " + std::to_string(schema));
  RunConfig cfg;
  if (!root.contains("model") || !root["model"].is_object()) throw ConfigError("missing \"model\" block");
  cfg.model = root["model"];
  cfg.model_kind = detail::require<std::string>(cfg.model, "model", "model block");
  if (cfg.model_kind != "ising" && cfg.model_kind != "gibbs-cont" && cfg.model_kind != "autonormal" &&
      cfg.model_kind != "ising-pair")
    throw ConfigError("unknown model \"" + cfg.model_kind + "\"");
  cfg.d = detail::get_or<int>(cfg.model, "d", 1);
  if (cfg.d < 1 || cfg.d > kMaxDimension) throw ConfigError("d must be in [1, " + std::to_string(kMaxDimension) + "]");

  const json sampler = root.value("sampler", json::object());
  if (!sampler.is_object()) throw ConfigError("\"sampler\" must be an object");
  if (sampler.contains("sites")) {
    if (!sampler["sites"].is_array()) throw ConfigError("\"sites\" must be an array");
    for (const auto& s : sampler["sites"]) cfg.sampler.sites.push_back(detail::parse_site(s, cfg.d));
  } else {
    cfg.sampler.sites.push_back(Site(cfg.d));
  }
  if (cfg.sampler.sites.empty()) throw ConfigError("\"sites\" must be nonempty");
  const auto replicas = detail::get_or<long long>(sampler, "replicas", 1);
  if (replicas < 1) throw ConfigError("\"replicas\" must be >= 1");
  cfg.sampler.replicas = static_cast<std::size_t>(replicas);
  if (sampler.contains("seed") && !sampler["seed"].is_null()) {
    if (!sampler["seed"].is_number_integer() || sampler["seed"].get<long long>() < 0)
      throw ConfigError("\"seed\" must be a non-negative integer");
    cfg.sampler.seed = sampler["seed"].get<std::uint64_t>();
  }
  if (sampler.contains("step_cap") && !sampler["step_cap"].is_null()) {
    const auto cap = detail::get_or<long long>(sampler, "step_cap", 0);
    if (cap < 1) throw ConfigError("\"step_cap\" must be >= 1");
    cfg.sampler.step_cap = static_cast<std::size_t>(cap);
  }
  if (sampler.contains("horizon") && !sampler["horizon"].is_null()) {
    const double t = detail::get_or<double>(sampler, "horizon", 0.0);
    if (!(t > 0.0)) throw ConfigError("\"horizon\" must be positive");
    cfg.sampler.horizon = t;
  }
  cfg.sampler.initial = sampler.value("initial", json());
  cfg.sampler.range_cap = detail::get_or<int>(sampler, "range_cap", kDefaultRangeCap);
  if (cfg.sampler.range_cap < 0) throw ConfigError("\"range_cap\" must be >= 0");

  const json output = root.value("output", json::object());
  if (output.contains("path") && !output["path"].is_null()) cfg.output.path = output["path"].get<std::string>();
  cfg.output.format = detail::get_or<std::string>(output, "format", "jsonl");
  if (cfg.output.format != "jsonl" && cfg.output.format != "csv")
    throw ConfigError("output format must be jsonl or csv");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("configuration is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(root);
}

using AnyDecomposition = std::variant<KalikowDecomposition<ExponentialModel>, KalikowDecomposition<AutonormalModel>,
                                      KalikowDecomposition<CoupledIsingModel>>;

inline AnyDecomposition build_decomposition(const RunConfig& cfg) {
  const auto& m = cfg.model;
  const int d = cfg.d;
  const int cap = cfg.sampler.range_cap;
  try {
    const auto kernel = parse_kernel(m.value("kernel", json()), d);
    if (cfg.model_kind == "ising") {
      const double beta = detail::require<double>(m, "beta", "model block");
      auto values = detail::get_or<std::vector<double>>(m, "values", {-1.0, 1.0});
      auto weights = detail::get_or<std::vector<double>>(m, "weights", {});
      ExponentialModel model(StateSpace::finite(values, weights), kernel, beta, parse_field(m.value("field", json())));
      return KalikowDecomposition<ExponentialModel>(std::move(model), cap);
    }
    if (cfg.model_kind == "gibbs-cont") {
      const double beta = detail::require<double>(m, "beta", "model block");
      ExponentialModel model(StateSpace::interval(-1.0, 1.0, detail::get_or<double>(m, "density", 1.0)), kernel, beta,
                             parse_field(m.value("field", json())));
      return KalikowDecomposition<ExponentialModel>(std::move(model), cap);
    }
    if (cfg.model_kind == "autonormal") {
      AutonormalModel model(kernel, detail::require<double>(m, "sigma", "model block"),
                            parse_field(m.value("field", json())));
      return KalikowDecomposition<AutonormalModel>(std::move(model), cap);
    }
    const double beta = detail::require<double>(m, "beta", "model block");
    const auto upper = parse_kernel(m.value("kernel_upper", m.value("kernel", json())), d);
    const double h = detail::get_or<double>(m, "field", 0.0);
    const double h_upper = detail::get_or<double>(m, "field_upper", h);
    CoupledIsingModel model(d, beta, kernel, upper, h, h_upper);
    return KalikowDecomposition<CoupledIsingModel>(std::move(model), cap);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid model: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid model: ") + e.what());
  }
}

}  // namespace pssim
