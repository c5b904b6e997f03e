#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergq/averaging.hpp"
#include "ergq/common.hpp"
#include "ergq/expr.hpp"
#include "ergq/flow.hpp"
#include "ergq/metric.hpp"
#include "ergq/observables.hpp"
#include "ergq/sampling.hpp"

namespace ergq {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& section, const std::set<std::string>& known,
                                const std::string& where) {
  if (!section.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : section.items())
    if (!known.contains(key))
      throw ConfigError("config: unknown key '" + where + "." + key + "'");
}

inline std::vector<Interval> parse_intervals(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError("config: '" + where + "' must be a list of [lo, hi]");
  std::vector<Interval> out;
  for (const auto& pair : j) {
    if (!pair.is_array() || pair.size() != 2)
      throw ConfigError("config: '" + where + "' entries must be [lo, hi]");
    out.push_back({pair[0].get<double>(), pair[1].get<double>()});
  }
  return out;
}

inline json intervals_to_json(const std::vector<Interval>& v) {
  json out = json::array();
  for (const auto& iv : v) out.push_back({iv.lo, iv.hi});
  return out;
}

}  // namespace detail

/// Fully resolved run configuration. `normalized()` returns the config with
/// every default materialized; archives store that form so a persisted run
/// can be compared key-for-key against the configuration trying to resume it.
struct RunConfig {
  FlowSystem system;
  IcSpec ic;
  std::vector<int> basis_bounds;
  std::vector<Interval> basis_domain;
  bool basis_half = true;
  AveragingConfig avg;
  double metric_s = 0.0;  // resolved value
  std::size_t diff_n_min = 10;
  std::size_t diff_m = 11;
  double diff_h = 0.0;  // 0 = neighborhood-size-stability heuristic
  std::size_t cluster_k = 0;  // 0 = clustering stage disabled
  std::uint64_t cluster_seed = 0;
  std::size_t cluster_restarts = 10;
  std::size_t cluster_dims = 10;

  json echo;  // normalized form

  const json& normalized() const { return echo; }

  ObservableBasis make_basis() const {
    return ObservableBasis::make(make_lattice(system.dim, basis_bounds, basis_half),
                                 basis_domain);
  }

  static RunConfig parse(const json& j);
  static RunConfig parse_file(const std::string& path);
};

inline RunConfig RunConfig::parse(const json& root) {
  if (!root.is_object()) throw ConfigError("config: document must be a JSON object");
  detail::reject_unknown_keys(
      root, {"system", "ic", "basis", "avg", "ode", "metric", "diff", "cluster"}, "");

  RunConfig cfg;

  // ---- system ----
  if (!root.contains("system")) throw ConfigError("config: missing 'system'");
  const json& jsys = root.at("system");
  detail::reject_unknown_keys(
      jsys, {"name", "params", "expressions", "domain", "periodic"}, "system");
  const std::string name = jsys.value("name", "");
  std::map<std::string, double> params;
  if (jsys.contains("params")) {
    for (const auto& [key, value] : jsys.at("params").items()) {
      if (!value.is_number())
        throw ConfigError("config: system.params." + key + " must be a number");
      params[key] = value.get<double>();
    }
  }
  auto param_or = [&](const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  if (name == "abc") {
    cfg.system = builtin_abc(param_or("A", std::sqrt(3.0)), param_or("B", std::sqrt(2.0)),
                             param_or("C", 1.0));
  } else if (name == "hill") {
    cfg.system = builtin_hill(param_or("c", 0.01), param_or("eps", 0.01));
  } else if (name == "oscillator") {
    cfg.system = builtin_oscillator();
  } else if (name == "expression") {
    if (!jsys.contains("expressions") || !jsys.contains("domain"))
      throw ConfigError("config: expression systems need system.expressions and system.domain");
    std::vector<std::string> exprs = jsys.at("expressions").get<std::vector<std::string>>();
    auto domain = detail::parse_intervals(jsys.at("domain"), "system.domain");
    std::vector<bool> periodic;
    if (jsys.contains("periodic")) periodic = jsys.at("periodic").get<std::vector<bool>>();
    cfg.system = expression_system(exprs, params, domain, periodic);
  } else {
    throw ConfigError("config: system.name must be one of abc, hill, oscillator, expression");
  }
  const int dim = cfg.system.dim;

  // ---- ic ----
  if (!root.contains("ic")) throw ConfigError("config: missing 'ic'");
  const json& jic = root.at("ic");
  detail::reject_unknown_keys(jic, {"mode", "n", "seed", "box", "shape", "axis", "value"}, "ic");
  const std::string mode = jic.value("mode", "uniform");
  if (mode == "uniform")
    cfg.ic.mode = IcSpec::Mode::Uniform;
  else if (mode == "grid")
    cfg.ic.mode = IcSpec::Mode::Grid;
  else if (mode == "plane")
    cfg.ic.mode = IcSpec::Mode::Plane;
  else
    throw ConfigError("config: ic.mode must be grid, uniform, or plane");
  cfg.ic.n = jic.value("n", std::size_t{0});
  cfg.ic.seed = jic.value("seed", std::uint64_t{0});
  cfg.ic.box = jic.contains("box") ? detail::parse_intervals(jic.at("box"), "ic.box")
                                   : cfg.system.domain;
  if (static_cast<int>(cfg.ic.box.size()) != dim)
    throw ConfigError("config: ic.box must list one interval per state axis");
  if (jic.contains("shape")) cfg.ic.shape = jic.at("shape").get<std::vector<std::size_t>>();
  cfg.ic.axis = jic.value("axis", -1);
  cfg.ic.value = jic.value("value", 0.0);
  if (cfg.ic.mode == IcSpec::Mode::Grid && cfg.ic.shape.empty())
    throw ConfigError("config: grid sampling needs ic.shape");
  if (cfg.ic.mode == IcSpec::Mode::Plane && (cfg.ic.axis < 0 || cfg.ic.axis >= dim))
    throw ConfigError("config: plane sampling needs ic.axis in range");
  if (cfg.ic.mode != IcSpec::Mode::Grid && cfg.ic.n == 0)
    throw ConfigError("config: ic.n must be positive");
  // sampling box must sit inside the system domain
  for (int a = 0; a < dim; ++a) {
    const auto aa = static_cast<std::size_t>(a);
    if (cfg.ic.mode == IcSpec::Mode::Plane && a == cfg.ic.axis) continue;
    if (cfg.ic.box[aa].lo < cfg.system.domain[aa].lo - 1e-12 ||
        cfg.ic.box[aa].hi > cfg.system.domain[aa].hi + 1e-12)
      throw ConfigError("config: ic.box exceeds the system domain on axis " + std::to_string(a));
  }

  // ---- avg / ode (parsed before basis so the half default can see omega) ----
  if (!root.contains("avg")) throw ConfigError("config: missing 'avg'");
  const json& javg = root.at("avg");
  detail::reject_unknown_keys(javg, {"atol", "t_min", "t_e", "t_max", "omega", "quad_cap"},
                              "avg");
  cfg.avg.atol_stop = javg.value("atol", 1e-4);
  if (!javg.contains("t_min") || !javg.contains("t_e"))
    throw ConfigError("config: avg.t_min and avg.t_e are required");
  cfg.avg.t_min = javg.at("t_min").get<double>();
  cfg.avg.t_e = javg.at("t_e").get<double>();
  cfg.avg.t_max = javg.value("t_max", 0.0);
  cfg.avg.omega = javg.value("omega", 0.0);
  cfg.avg.quad_cap = javg.value("quad_cap", 0.5);
  if (root.contains("ode")) {
    const json& jode = root.at("ode");
    detail::reject_unknown_keys(jode, {"rtol", "atol", "max_step", "h0"}, "ode");
    cfg.avg.ode.rtol = jode.value("rtol", 1e-8);
    cfg.avg.ode.atol = jode.value("atol", 1e-10);
    const double hmax = jode.value("max_step", 0.0);
    if (hmax > 0.0) cfg.avg.ode.hmax = hmax;
    cfg.avg.ode.h0 = jode.value("h0", 0.0);
  }
  cfg.avg.validate();

  // ---- basis ----
  if (!root.contains("basis")) throw ConfigError("config: missing 'basis'");
  const json& jb = root.at("basis");
  detail::reject_unknown_keys(jb, {"k", "bounds", "domain", "half"}, "basis");
  if (jb.contains("k") == jb.contains("bounds"))
    throw ConfigError("config: specify exactly one of basis.k or basis.bounds");
  if (jb.contains("k"))
    cfg.basis_bounds.assign(static_cast<std::size_t>(dim), jb.at("k").get<int>());
  else
    cfg.basis_bounds = jb.at("bounds").get<std::vector<int>>();
  if (static_cast<int>(cfg.basis_bounds.size()) != dim)
    throw ConfigError("config: basis.bounds must list one bound per axis");
  cfg.basis_domain = jb.contains("domain")
                         ? detail::parse_intervals(jb.at("domain"), "basis.domain")
                         : cfg.system.domain;
  if (static_cast<int>(cfg.basis_domain.size()) != dim)
    throw ConfigError("config: basis.domain must list one interval per axis");
  cfg.basis_half = jb.value("half", cfg.avg.omega == 0.0);
  if (cfg.basis_half && cfg.avg.omega != 0.0)
    throw ConfigError(
        "config: the conjugate-reduced (half) lattice is only valid for omega = 0; "
        "set basis.half to false for harmonic runs");

  // ---- metric ----
  cfg.metric_s = default_sobolev_order(dim);
  if (root.contains("metric")) {
    const json& jm = root.at("metric");
    detail::reject_unknown_keys(jm, {"s"}, "metric");
    const double s = jm.value("s", 0.0);
    if (s > 0.0) cfg.metric_s = s;
  }

  // ---- diff ----
  if (root.contains("diff")) {
    const json& jd = root.at("diff");
    detail::reject_unknown_keys(jd, {"n_min", "m", "h"}, "diff");
    cfg.diff_n_min = jd.value("n_min", std::size_t{10});
    cfg.diff_m = jd.value("m", std::size_t{11});
    cfg.diff_h = jd.value("h", 0.0);
  }
  if (cfg.diff_m < 2) throw ConfigError("config: diff.m must be at least 2");

  // ---- cluster ----
  if (root.contains("cluster")) {
    const json& jc = root.at("cluster");
    detail::reject_unknown_keys(jc, {"k", "seed", "restarts", "dims"}, "cluster");
    cfg.cluster_k = jc.value("k", std::size_t{0});
    cfg.cluster_seed = jc.value("seed", std::uint64_t{0});
    cfg.cluster_restarts = jc.value("restarts", std::size_t{10});
    cfg.cluster_dims = jc.value("dims", std::size_t{10});
    if (cfg.cluster_restarts < 1) throw ConfigError("config: cluster.restarts must be positive");
    if (cfg.cluster_dims < 1) throw ConfigError("config: cluster.dims must be positive");
  }

  // ---- normalized echo ----
  json e;
  e["system"]["name"] = name;
  if (!params.empty()) e["system"]["params"] = params;
  if (name == "expression") {
    e["system"]["expressions"] = jsys.at("expressions");
    e["system"]["domain"] = detail::intervals_to_json(cfg.system.domain);
    json per = json::array();
    for (bool p : cfg.system.periodic_axes) per.push_back(p);
    e["system"]["periodic"] = per;
  }
  e["ic"]["mode"] = mode;
  e["ic"]["seed"] = cfg.ic.seed;
  e["ic"]["box"] = detail::intervals_to_json(cfg.ic.box);
  if (cfg.ic.mode == IcSpec::Mode::Grid)
    e["ic"]["shape"] = cfg.ic.shape;
  else
    e["ic"]["n"] = cfg.ic.n;
  if (cfg.ic.mode == IcSpec::Mode::Plane) {
    e["ic"]["axis"] = cfg.ic.axis;
    e["ic"]["value"] = cfg.ic.value;
  }
  e["basis"]["bounds"] = cfg.basis_bounds;
  e["basis"]["domain"] = detail::intervals_to_json(cfg.basis_domain);
  e["basis"]["half"] = cfg.basis_half;
  e["avg"]["atol"] = cfg.avg.atol_stop;
  e["avg"]["t_min"] = cfg.avg.t_min;
  e["avg"]["t_e"] = cfg.avg.t_e;
  e["avg"]["t_max"] = cfg.avg.resolved_t_max();
  e["avg"]["omega"] = cfg.avg.omega;
  e["avg"]["quad_cap"] = cfg.avg.quad_cap;
  e["ode"]["rtol"] = cfg.avg.ode.rtol;
  e["ode"]["atol"] = cfg.avg.ode.atol;
  e["ode"]["max_step"] = std::isfinite(cfg.avg.ode.hmax) ? cfg.avg.ode.hmax : 0.0;
  e["ode"]["h0"] = cfg.avg.ode.h0;
  e["metric"]["s"] = cfg.metric_s;
  e["diff"]["n_min"] = cfg.diff_n_min;
  e["diff"]["m"] = cfg.diff_m;
  e["diff"]["h"] = cfg.diff_h;
  e["cluster"]["k"] = cfg.cluster_k;
  e["cluster"]["seed"] = cfg.cluster_seed;
  e["cluster"]["restarts"] = cfg.cluster_restarts;
  e["cluster"]["dims"] = cfg.cluster_dims;
  cfg.echo = std::move(e);
  return cfg;
}

inline RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + err.what());
  }
  return parse(j);
}

}  // namespace ergq
