#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "bifkit/detect.hpp"
#include "bifkit/registry.hpp"
#include "bifkit/version.hpp"

namespace bifkit {

using json = nlohmann::json;

// Run configuration, parsed strictly: unknown keys are rejected with their
// path so a misspelled tolerance cannot silently fall back to a default.

struct RunConfig {
  std::string model_name;
  std::map<std::string, double> params;
  std::optional<Vec> h0;
  std::optional<double> r0;
  Index grid_resolution = 21;
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  std::vector<double> epsilon_ladder = default_epsilon_ladder();
  MFirstTerm mode = MFirstTerm::Consistent;
  std::string output_dir = "bifkit_out";
  std::uint64_t seed = 1729;
  bool run_continuation = true;
  json raw; // canonical parsed form, hashed into the report
};

namespace detail {

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok)
      throw ConfigError("unknown field \"" + path + key + "\"");
  }
}

inline double positive_number(const json& j, const std::string& path) {
  if (!j.is_number())
    throw ConfigError("field \"" + path + "\" must be a number");
  const double v = j.get<double>();
  if (!(v > 0.0))
    throw ConfigError("field \"" + path + "\" must be positive");
  return v;
}

} // namespace detail

inline RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  detail::reject_unknown(j, "",
                         {"schema", "model", "chart", "integrator",
                          "epsilon_ladder", "mode", "output_dir", "seed",
                          "continuation"});
  RunConfig cfg;
  if (!j.contains("schema") || !j["schema"].is_string() ||
      j["schema"].get<std::string>() != schema_tag)
    throw ConfigError(std::string("config must declare \"schema\": \"") +
                      schema_tag + "\"");

  if (!j.contains("model") || !j["model"].is_object())
    throw ConfigError("config needs a \"model\" object");
  const json& jm = j["model"];
  detail::reject_unknown(jm, "model.", {"name", "params"});
  if (!jm.contains("name") || !jm["name"].is_string())
    throw ConfigError("field \"model.name\" must be a string");
  cfg.model_name = jm["name"].get<std::string>();
  if (jm.contains("params")) {
    if (!jm["params"].is_object())
      throw ConfigError("field \"model.params\" must be an object");
    for (const auto& [key, val] : jm["params"].items()) {
      if (!val.is_number())
        throw ConfigError("field \"model.params." + key +
                          "\" must be a number");
      cfg.params[key] = val.get<double>();
    }
  }

  if (j.contains("chart")) {
    const json& jc = j["chart"];
    if (!jc.is_object()) throw ConfigError("field \"chart\" must be an object");
    detail::reject_unknown(jc, "chart.", {"h0", "r0", "grid_resolution"});
    if (jc.contains("h0")) {
      if (!jc["h0"].is_array() || jc["h0"].empty())
        throw ConfigError("field \"chart.h0\" must be a nonempty array");
      Vec h0(jc["h0"].size());
      Index i = 0;
      for (const auto& v : jc["h0"]) {
        if (!v.is_number())
          throw ConfigError("field \"chart.h0\" must contain numbers");
        h0[i++] = v.get<double>();
      }
      cfg.h0 = std::move(h0);
    }
    if (jc.contains("r0")) cfg.r0 = detail::positive_number(jc["r0"], "chart.r0");
    if (jc.contains("grid_resolution")) {
      if (!jc["grid_resolution"].is_number_integer())
        throw ConfigError("field \"chart.grid_resolution\" must be an integer");
      cfg.grid_resolution = jc["grid_resolution"].get<Index>();
      if (cfg.grid_resolution < 3)
        throw ConfigError("field \"chart.grid_resolution\" must be >= 3");
    }
  }

  if (j.contains("integrator")) {
    const json& ji = j["integrator"];
    if (!ji.is_object())
      throw ConfigError("field \"integrator\" must be an object");
    detail::reject_unknown(ji, "integrator.", {"abs_tol", "rel_tol"});
    if (ji.contains("abs_tol"))
      cfg.abs_tol = detail::positive_number(ji["abs_tol"], "integrator.abs_tol");
    if (ji.contains("rel_tol"))
      cfg.rel_tol = detail::positive_number(ji["rel_tol"], "integrator.rel_tol");
  }

  if (j.contains("epsilon_ladder")) {
    if (!j["epsilon_ladder"].is_array() || j["epsilon_ladder"].empty())
      throw ConfigError("field \"epsilon_ladder\" must be a nonempty array");
    cfg.epsilon_ladder.clear();
    for (const auto& v : j["epsilon_ladder"]) {
      const double e = detail::positive_number(v, "epsilon_ladder[]");
      if (e > 1.0)
        throw ConfigError("epsilon_ladder entries must lie in (0, 1]");
      if (!cfg.epsilon_ladder.empty() && e >= cfg.epsilon_ladder.back())
        throw ConfigError("epsilon_ladder must be strictly decreasing");
      cfg.epsilon_ladder.push_back(e);
    }
  }

  if (j.contains("mode")) {
    if (!j["mode"].is_string())
      throw ConfigError("field \"mode\" must be a string");
    const std::string m = j["mode"].get<std::string>();
    if (m == "consistent")
      cfg.mode = MFirstTerm::Consistent;
    else if (m == "literal")
      cfg.mode = MFirstTerm::Literal;
    else
      throw ConfigError("field \"mode\" must be \"consistent\" or \"literal\"");
  }

  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string())
      throw ConfigError("field \"output_dir\" must be a string");
    cfg.output_dir = j["output_dir"].get<std::string>();
    if (cfg.output_dir.empty())
      throw ConfigError("field \"output_dir\" must not be empty");
  }

  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer())
      throw ConfigError("field \"seed\" must be an integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }

  if (j.contains("continuation")) {
    if (!j["continuation"].is_boolean())
      throw ConfigError("field \"continuation\" must be a boolean");
    cfg.run_continuation = j["continuation"].get<bool>();
  }

  cfg.raw = j;
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(j);
}

// Instantiate the configured model and fold in chart overrides.
inline ModelBundle configured_bundle(const RunConfig& cfg) {
  ModelBundle bundle = registry_get(cfg.model_name, cfg.params);
  if (cfg.h0) {
    if (cfg.h0->size() != bundle.chart.k)
      throw ConfigError("chart.h0 has " + std::to_string(cfg.h0->size()) +
                        " entries but the model family has dimension " +
                        std::to_string(bundle.chart.k));
    bundle.chart.h0 = *cfg.h0;
  }
  if (cfg.r0) bundle.chart.r0 = *cfg.r0;
  return bundle;
}

inline AnalyzeConfig to_analyze_config(const RunConfig& cfg, unsigned threads) {
  AnalyzeConfig ac;
  ac.grid_resolution = cfg.grid_resolution;
  ac.integrator.abs_tol = cfg.abs_tol;
  ac.integrator.rel_tol = cfg.rel_tol;
  ac.epsilon_ladder = cfg.epsilon_ladder;
  ac.mode = cfg.mode;
  ac.seed = cfg.seed;
  ac.run_continuation = cfg.run_continuation;
  ac.threads = threads;
  return ac;
}

} // namespace bifkit
