#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "parmor/eval.hpp"
#include "parmor/io.hpp"

// Experiment orchestration: one JSON config describes system, exciter, data
// collection, reduction, verification, and evaluation; run_experiment executes
// the pipeline and writes a self-describing artifact directory. Field defaults
// reproduce the bundled large-benchmark study, so an empty config is already a
// complete experiment.

namespace parmor {

// Splits [0, count) into contiguous chunks across at most PARMOR_THREADS
// workers (hardware concurrency when unset). Each index is visited exactly
// once, so slot-wise writes stay deterministic.
inline void parallel_for(Index count, const std::function<void(Index)>& fn) {
  if (count <= 0) return;
  Index budget = static_cast<Index>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PARMOR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw ConfigInvalid("PARMOR_THREADS: expected a positive integer");
    budget = static_cast<Index>(v);
  }
  const Index workers = std::max<Index>(1, std::min(budget, count));
  if (workers == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const Index chunk = (count + workers - 1) / workers;
  for (Index w = 0; w < workers; ++w) {
    const Index lo = w * chunk, hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (Index i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct ExperimentConfig {
  // system
  std::string system_kind = "benchmark";  // benchmark | file | nl-duffing
  Index k = 500;
  std::string system_path;

  // generator
  std::optional<std::vector<double>> freqs;  // explicit frequencies win
  double freq_lo_exp = 0.0;
  double freq_hi_exp = 3.1;
  Index freq_count = 16;
  bool include_zero = false;
  std::optional<std::vector<double>> gen_L;       // exciter output row override
  std::optional<std::vector<double>> gen_omega0;  // exciter initial state override

  // reduction
  std::string reduction = "data";  // series | basis | data | nl
  Index order = 4;
  double center = 0.55;
  std::string basis_spec = "poly:6";
  Index sample_count = 10;  // parameter samples for the model-based fit
  Index rbf = 40;
  double width = 1.0;
  std::uint64_t seed = 1;
  Index nl_poly = 0;  // > 0 selects the product basis instead of kernels
  std::string gain_kind = "stabilizing";  // stabilizing | placed | preserving
  double gain_scale = 1.0;
  double gain_zeta = 0.3;
  Index lyap_order = 4;

  // data collection (data / nl reductions)
  std::string data_path;  // read an existing dataset directory instead
  std::optional<std::array<double, 2>> param_range;
  Index param_count = 10;
  double win_start = 17.38;
  double win_end = 20.0;
  Index h = 64;
  std::string method = "expm";  // expm | rk4
  double dt = 1e-3;
  double noise_std = 0.0;
  std::uint64_t noise_seed = 0;

  // verification (optional)
  bool verify = false;
  std::string property = "stability";  // stability | dissipativity
  Index verify_grid = 50;
  double margin = 0.0;

  // evaluation (optional, on by default)
  bool evaluate = true;
  std::string metric = "l2-moment";  // l2-moment | h2 | bode | nrmse
  Index eval_grid = 200;
  std::vector<double> eval_params;
  double bode_p = 0.55;
};

namespace detail {

inline void reject_unknown(const Json& j, std::initializer_list<const char*> allowed,
                           const std::string& path) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&key](const char* a) { return key == a; }) == allowed.end())
      throw ConfigInvalid(path + "." + key + ": unknown field");
  }
}

inline const Json* cfg_section(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) return nullptr;
  if (!it->is_object()) throw ConfigInvalid(std::string(key) + ": expected an object");
  return &*it;
}

inline double cfg_num(const Json& j, const char* key, double fallback,
                      const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ConfigInvalid(path + "." + key + ": expected a number");
  return it->get<double>();
}

inline Index cfg_int(const Json& j, const char* key, Index fallback, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer() && !it->is_number_unsigned())
    throw ConfigInvalid(path + "." + key + ": expected an integer");
  return it->get<Index>();
}

inline bool cfg_bool(const Json& j, const char* key, bool fallback, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw ConfigInvalid(path + "." + key + ": expected a boolean");
  return it->get<bool>();
}

inline std::string cfg_str(const Json& j, const char* key, const std::string& fallback,
                           const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) throw ConfigInvalid(path + "." + key + ": expected a string");
  return it->get<std::string>();
}

inline std::vector<double> cfg_num_list(const Json& j, const char* key,
                                        const std::string& path) {
  std::vector<double> out;
  const auto it = j.find(key);
  if (it == j.end()) return out;
  if (!it->is_array()) throw ConfigInvalid(path + "." + key + ": expected an array");
  for (const Json& v : *it) {
    if (!v.is_number()) throw ConfigInvalid(path + "." + key + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

inline BasisSet parse_basis_spec(const std::string& spec) {
  const auto bad = [&spec]() {
    throw ConfigInvalid("basis: '" + spec + "' is not poly:N or fourier:PERIOD:N");
  };
  const auto next = [&spec, &bad](std::size_t& pos) {
    const auto colon = spec.find(':', pos);
    const std::string tok =
        colon == std::string::npos ? spec.substr(pos) : spec.substr(pos, colon - pos);
    pos = colon == std::string::npos ? spec.size() : colon + 1;
    if (tok.empty()) bad();
    return tok;
  };
  std::size_t pos = 0;
  const std::string kind = next(pos);
  try {
    if (kind == "poly") {
      const Index n = static_cast<Index>(std::stol(next(pos)));
      if (pos != spec.size()) bad();
      return BasisSet::polynomial(n);
    }
    if (kind == "fourier") {
      const double period = std::stod(next(pos));
      const Index n = static_cast<Index>(std::stol(next(pos)));
      if (pos != spec.size()) bad();
      return BasisSet::fourier(period, n);
    }
  } catch (const std::logic_error&) {
    bad();
  }
  bad();
  throw ConfigInvalid("unreachable");
}

inline ExperimentConfig parse_experiment(const Json& root) {
  if (!root.is_object()) throw ConfigInvalid("config: expected a JSON object");
  detail::reject_unknown(
      root, {"system", "generator", "reduction", "data", "verification", "evaluation"},
      "config");
  ExperimentConfig cfg;

  if (const Json* sys = detail::cfg_section(root, "system")) {
    detail::reject_unknown(*sys, {"kind", "k", "path"}, "system");
    cfg.system_kind = detail::cfg_str(*sys, "kind", cfg.system_kind, "system");
    cfg.k = detail::cfg_int(*sys, "k", cfg.k, "system");
    cfg.system_path = detail::cfg_str(*sys, "path", cfg.system_path, "system");
  }
  if (cfg.system_kind != "benchmark" && cfg.system_kind != "file" &&
      cfg.system_kind != "nl-duffing")
    throw ConfigInvalid("system.kind: expected benchmark, file, or nl-duffing");
  if (cfg.system_kind == "benchmark" && cfg.k < 1)
    throw ConfigInvalid("system.k: expected a positive oscillator count");
  if (cfg.system_kind == "file" && cfg.system_path.empty())
    throw ConfigInvalid("system.path: required for a file system");

  if (const Json* red = detail::cfg_section(root, "reduction")) {
    detail::reject_unknown(*red,
                           {"kind", "order", "center", "basis", "samples", "rbf", "width",
                            "seed", "poly", "gain", "gain_scale", "gain_zeta", "lyap_order"},
                           "reduction");
    cfg.reduction = detail::cfg_str(*red, "kind", cfg.reduction, "reduction");
    cfg.order = detail::cfg_int(*red, "order", cfg.order, "reduction");
    cfg.center = detail::cfg_num(*red, "center", cfg.center, "reduction");
    cfg.basis_spec = detail::cfg_str(*red, "basis", cfg.basis_spec, "reduction");
    cfg.sample_count = detail::cfg_int(*red, "samples", cfg.sample_count, "reduction");
    cfg.rbf = detail::cfg_int(*red, "rbf", cfg.rbf, "reduction");
    cfg.width = detail::cfg_num(*red, "width", cfg.width, "reduction");
    cfg.seed = static_cast<std::uint64_t>(detail::cfg_int(
        *red, "seed", static_cast<Index>(cfg.seed), "reduction"));
    cfg.nl_poly = detail::cfg_int(*red, "poly", cfg.nl_poly, "reduction");
    cfg.gain_kind = detail::cfg_str(*red, "gain", cfg.gain_kind, "reduction");
    cfg.gain_scale = detail::cfg_num(*red, "gain_scale", cfg.gain_scale, "reduction");
    cfg.gain_zeta = detail::cfg_num(*red, "gain_zeta", cfg.gain_zeta, "reduction");
    cfg.lyap_order = detail::cfg_int(*red, "lyap_order", cfg.lyap_order, "reduction");
  }
  if (cfg.reduction != "series" && cfg.reduction != "basis" && cfg.reduction != "data" &&
      cfg.reduction != "nl")
    throw ConfigInvalid("reduction.kind: expected series, basis, data, or nl");
  if (cfg.order < 1) throw ConfigInvalid("reduction.order: expected a positive term count");
  if (cfg.sample_count < 1) throw ConfigInvalid("reduction.samples: expected a positive count");
  if (cfg.gain_kind != "stabilizing" && cfg.gain_kind != "placed" &&
      cfg.gain_kind != "preserving")
    throw ConfigInvalid("reduction.gain: expected stabilizing, placed, or preserving");
  if (cfg.gain_kind == "preserving" && cfg.reduction != "series")
    throw ConfigInvalid("reduction.gain: a preserving gain needs a series state map");
  if (!(cfg.gain_zeta > 0.0))
    throw ConfigInvalid("reduction.gain_zeta: expected a positive damping ratio");
  if (cfg.reduction == "nl" && cfg.nl_poly == 0 && cfg.rbf < 1)
    throw ConfigInvalid("reduction.rbf: expected a positive kernel count");
  if (cfg.system_kind == "nl-duffing" && cfg.reduction != "nl")
    throw ConfigInvalid("reduction.kind: the nonlinear benchmark supports only nl");

  // Context-dependent collection defaults: the nonlinear recipe samples a
  // later, longer window under rk4.
  if (cfg.reduction == "nl") {
    cfg.win_start = 40.0;
    cfg.win_end = 40.0 + 4.0 * M_PI;
    cfg.h = 48;
    cfg.param_count = 9;
    cfg.method = "rk4";
    cfg.metric = "nrmse";
    cfg.eval_params = {1.13, 1.77};
  }

  if (const Json* gen = detail::cfg_section(root, "generator")) {
    detail::reject_unknown(*gen, {"freqs", "interp_grid", "include_zero", "L", "omega0"},
                           "generator");
    cfg.include_zero = detail::cfg_bool(*gen, "include_zero", cfg.include_zero, "generator");
    const auto freqs = detail::cfg_num_list(*gen, "freqs", "generator");
    if (!freqs.empty()) cfg.freqs = freqs;
    const auto l_row = detail::cfg_num_list(*gen, "L", "generator");
    if (!l_row.empty()) cfg.gen_L = l_row;
    const auto w0 = detail::cfg_num_list(*gen, "omega0", "generator");
    if (!w0.empty()) cfg.gen_omega0 = w0;
    if (const Json* grid = detail::cfg_section(*gen, "interp_grid")) {
      detail::reject_unknown(*grid, {"lo_exp", "hi_exp", "count"}, "generator.interp_grid");
      cfg.freq_lo_exp =
          detail::cfg_num(*grid, "lo_exp", cfg.freq_lo_exp, "generator.interp_grid");
      cfg.freq_hi_exp =
          detail::cfg_num(*grid, "hi_exp", cfg.freq_hi_exp, "generator.interp_grid");
      cfg.freq_count = detail::cfg_int(*grid, "count", cfg.freq_count, "generator.interp_grid");
      if (cfg.freqs)
        throw ConfigInvalid("generator: freqs and interp_grid are mutually exclusive");
    }
  }
  if (!cfg.freqs && cfg.freq_count < 1)
    throw ConfigInvalid("generator.interp_grid.count: expected a positive count");

  if (const Json* data = detail::cfg_section(root, "data")) {
    detail::reject_unknown(*data, {"path", "params", "window", "method", "dt", "noise"},
                           "data");
    cfg.data_path = detail::cfg_str(*data, "path", cfg.data_path, "data");
    if (const Json* params = detail::cfg_section(*data, "params")) {
      detail::reject_unknown(*params, {"lo", "hi", "count"}, "data.params");
      cfg.param_count = detail::cfg_int(*params, "count", cfg.param_count, "data.params");
      if (params->contains("lo") || params->contains("hi")) {
        if (!params->contains("lo") || !params->contains("hi"))
          throw ConfigInvalid("data.params: lo and hi must be given together");
        cfg.param_range = {{detail::cfg_num(*params, "lo", 0.0, "data.params"),
                            detail::cfg_num(*params, "hi", 0.0, "data.params")}};
      }
    }
    if (const Json* win = detail::cfg_section(*data, "window")) {
      detail::reject_unknown(*win, {"start", "end", "h"}, "data.window");
      cfg.win_start = detail::cfg_num(*win, "start", cfg.win_start, "data.window");
      cfg.win_end = detail::cfg_num(*win, "end", cfg.win_end, "data.window");
      cfg.h = detail::cfg_int(*win, "h", cfg.h, "data.window");
    }
    cfg.method = detail::cfg_str(*data, "method", cfg.method, "data");
    cfg.dt = detail::cfg_num(*data, "dt", cfg.dt, "data");
    if (const Json* noise = detail::cfg_section(*data, "noise")) {
      detail::reject_unknown(*noise, {"stddev", "seed"}, "data.noise");
      cfg.noise_std = detail::cfg_num(*noise, "stddev", cfg.noise_std, "data.noise");
      cfg.noise_seed = static_cast<std::uint64_t>(detail::cfg_int(
          *noise, "seed", static_cast<Index>(cfg.noise_seed), "data.noise"));
    }
  }
  if (!(cfg.win_end > cfg.win_start)) throw ConfigInvalid("data.window: end must exceed start");
  if (cfg.h < 2) throw ConfigInvalid("data.window.h: expected at least two samples");
  if (cfg.method != "expm" && cfg.method != "rk4")
    throw ConfigInvalid("data.method: expected expm or rk4");
  if (!(cfg.dt > 0.0)) throw ConfigInvalid("data.dt: expected a positive step");
  if (cfg.param_count < 1) throw ConfigInvalid("data.params.count: expected a positive count");
  if (cfg.param_range && !(cfg.param_range->at(1) > cfg.param_range->at(0)))
    throw ConfigInvalid("data.params: hi must exceed lo");
  if (cfg.noise_std < 0.0) throw ConfigInvalid("data.noise.stddev: expected >= 0");

  if (const Json* ver = detail::cfg_section(root, "verification")) {
    detail::reject_unknown(*ver, {"property", "grid", "margin"}, "verification");
    cfg.verify = true;
    cfg.property = detail::cfg_str(*ver, "property", cfg.property, "verification");
    cfg.verify_grid = detail::cfg_int(*ver, "grid", cfg.verify_grid, "verification");
    cfg.margin = detail::cfg_num(*ver, "margin", cfg.margin, "verification");
  }
  if (cfg.verify && cfg.property != "stability" && cfg.property != "dissipativity")
    throw ConfigInvalid("verification.property: expected stability or dissipativity");
  if (cfg.verify && cfg.verify_grid < 1)
    throw ConfigInvalid("verification.grid: expected a positive count");
  if (cfg.verify && cfg.reduction == "nl")
    throw ConfigInvalid("verification: grid checks apply to the linear pipeline");
  if (cfg.verify && cfg.property == "dissipativity" && cfg.gain_kind != "preserving")
    throw ConfigInvalid("verification.property: dissipativity needs a preserving gain");

  if (const Json* ev = detail::cfg_section(root, "evaluation")) {
    detail::reject_unknown(*ev, {"metric", "grid", "params", "p"}, "evaluation");
    cfg.metric = detail::cfg_str(*ev, "metric", cfg.metric, "evaluation");
    cfg.eval_grid = detail::cfg_int(*ev, "grid", cfg.eval_grid, "evaluation");
    const auto params = detail::cfg_num_list(*ev, "params", "evaluation");
    if (!params.empty()) cfg.eval_params = params;
    cfg.bode_p = detail::cfg_num(*ev, "p", cfg.bode_p, "evaluation");
  }
  if (cfg.metric != "l2-moment" && cfg.metric != "h2" && cfg.metric != "bode" &&
      cfg.metric != "nrmse")
    throw ConfigInvalid("evaluation.metric: expected l2-moment, h2, bode, or nrmse");
  if (cfg.eval_grid < 2) throw ConfigInvalid("evaluation.grid: expected at least two points");
  if ((cfg.metric == "nrmse") != (cfg.reduction == "nl"))
    throw ConfigInvalid("evaluation.metric: nrmse pairs with the nl reduction only");

  return cfg;
}

inline Json resolved_config_json(const ExperimentConfig& cfg) {
  Json system{{"kind", cfg.system_kind}};
  if (cfg.system_kind == "benchmark") system["k"] = cfg.k;
  if (cfg.system_kind == "file") system["path"] = cfg.system_path;

  Json generator{{"include_zero", cfg.include_zero}};
  if (cfg.freqs) {
    generator["freqs"] = *cfg.freqs;
  } else {
    generator["interp_grid"] =
        Json{{"lo_exp", cfg.freq_lo_exp}, {"hi_exp", cfg.freq_hi_exp}, {"count", cfg.freq_count}};
  }
  if (cfg.gen_L) generator["L"] = *cfg.gen_L;
  if (cfg.gen_omega0) generator["omega0"] = *cfg.gen_omega0;

  Json reduction{{"kind", cfg.reduction}};
  if (cfg.reduction == "series") {
    reduction["order"] = cfg.order;
    reduction["center"] = cfg.center;
  } else if (cfg.reduction == "basis") {
    reduction["basis"] = cfg.basis_spec;
    reduction["samples"] = cfg.sample_count;
  } else if (cfg.reduction == "data") {
    reduction["basis"] = cfg.basis_spec;
  } else {
    if (cfg.nl_poly > 0) {
      reduction["poly"] = cfg.nl_poly;
    } else {
      reduction["rbf"] = cfg.rbf;
      reduction["width"] = cfg.width;
      reduction["seed"] = cfg.seed;
    }
  }
  reduction["gain"] = cfg.gain_kind;
  if (cfg.gain_kind == "placed") reduction["gain_zeta"] = cfg.gain_zeta;
  if (cfg.gain_kind == "stabilizing" || cfg.reduction == "nl")
    reduction["gain_scale"] = cfg.gain_scale;
  if (cfg.gain_kind == "preserving") reduction["lyap_order"] = cfg.lyap_order;

  Json data;
  if (!cfg.data_path.empty()) {
    data["path"] = cfg.data_path;
  } else {
    Json params{{"count", cfg.param_count}};
    if (cfg.param_range) {
      params["lo"] = cfg.param_range->at(0);
      params["hi"] = cfg.param_range->at(1);
    }
    data = Json{{"params", std::move(params)},
                {"window", Json{{"start", cfg.win_start}, {"end", cfg.win_end}, {"h", cfg.h}}},
                {"method", cfg.method},
                {"dt", cfg.dt},
                {"noise", Json{{"stddev", cfg.noise_std}, {"seed", cfg.noise_seed}}}};
  }

  Json root{{"system", std::move(system)},
            {"generator", std::move(generator)},
            {"reduction", std::move(reduction)},
            {"data", std::move(data)}};
  if (cfg.verify)
    root["verification"] =
        Json{{"property", cfg.property}, {"grid", cfg.verify_grid}, {"margin", cfg.margin}};
  if (cfg.evaluate) {
    Json ev{{"metric", cfg.metric}, {"grid", cfg.eval_grid}};
    if (!cfg.eval_params.empty()) ev["params"] = cfg.eval_params;
    if (cfg.metric == "bode") ev["p"] = cfg.bode_p;
    root["evaluation"] = std::move(ev);
  }
  return root;
}

struct RunResult {
  std::filesystem::path dir;
  Json summary;
};

namespace detail {

inline SignalGenerator build_generator(const ExperimentConfig& cfg) {
  Vector freqs;
  if (cfg.freqs) {
    freqs.resize(static_cast<Index>(cfg.freqs->size()));
    for (Index i = 0; i < freqs.size(); ++i) freqs[i] = (*cfg.freqs)[static_cast<std::size_t>(i)];
  } else {
    freqs = log_grid(cfg.freq_lo_exp, cfg.freq_hi_exp, cfg.freq_count);
  }
  std::optional<RowVector> l_row;
  if (cfg.gen_L)
    l_row = Eigen::Map<const RowVector>(cfg.gen_L->data(), static_cast<Index>(cfg.gen_L->size()));
  std::optional<Vector> w0;
  if (cfg.gen_omega0)
    w0 = Eigen::Map<const Vector>(cfg.gen_omega0->data(),
                                  static_cast<Index>(cfg.gen_omega0->size()));
  return from_frequencies(freqs, cfg.include_zero, l_row, w0);
}

inline double nrmse_between(const Vector& reference, const Vector& candidate) {
  if (reference.size() != candidate.size())
    throw DimensionMismatch("nrmse: trajectories have different lengths");
  const double den = reference.squaredNorm();
  if (!(den > 0.0)) throw NumericalFailure("nrmse: reference signal is identically zero");
  return std::sqrt((reference - candidate).squaredNorm() / den);
}

}  // namespace detail

inline RunResult run_experiment(const Json& config_json,
                                const std::filesystem::path& out_root) {
  const ExperimentConfig cfg = parse_experiment(config_json);
  const Json resolved = resolved_config_json(cfg);
  const std::string hash = content_hash(resolved);

  RunResult result;
  result.dir = out_root / ("run-" + hash.substr(0, 12));
  std::filesystem::create_directories(result.dir);
  write_json(result.dir / "config.json", resolved);
  std::vector<std::string> artifacts{"config.json"};

  const SignalGenerator gen = detail::build_generator(cfg);
  write_json(result.dir / "generator.json", generator_to_json(gen));
  artifacts.push_back("generator.json");

  Json summary{{"config_hash", hash}};

  // Plant: exactly one of the two is populated.
  std::optional<ParametricLTI> lti;
  std::optional<NonlinearParametricSystem> nlsys;
  if (cfg.system_kind == "benchmark") {
    lti = make_benchmark(cfg.k);
  } else if (cfg.system_kind == "file") {
    lti = system_from_json(read_json(cfg.system_path));
  } else {
    nlsys = make_nl_benchmark();
  }
  if (lti) {
    write_json(result.dir / "system.json", system_to_json(*lti));
    artifacts.push_back("system.json");
    summary["system"] = Json{{"kind", cfg.system_kind}, {"n", lti->n}};
  } else {
    summary["system"] = Json{{"kind", cfg.system_kind}, {"n", nlsys->n}};
  }
  const std::array<double, 2> interval =
      lti ? lti->param_interval : nlsys->param_interval;

  // Dataset, collected or loaded, for the data-driven reductions.
  std::optional<SnapshotDataset> dataset;
  if (cfg.reduction == "data" || cfg.reduction == "nl") {
    if (!cfg.data_path.empty()) {
      DatasetArtifact art = read_dataset(cfg.data_path);
      if (art.gen.nu != gen.nu)
        throw ConfigInvalid("data.path: dataset exciter does not match the generator");
      dataset = std::move(art.data);
    } else {
      const std::array<double, 2> range = cfg.param_range ? *cfg.param_range : interval;
      const std::vector<double> params = linspace(range[0], range[1], cfg.param_count);
      SimConfig sim;
      sim.dt = cfg.dt;
      sim.method = cfg.method == "expm" ? StepMethod::ExpmLTI : StepMethod::Rk4;
      SnapshotDataset ds =
          lti ? collect_snapshots(*lti, gen, params, cfg.win_start, cfg.win_end, cfg.h, sim)
              : collect_snapshots(*nlsys, gen, params, cfg.win_start, cfg.win_end, cfg.h, sim);
      if (cfg.noise_std > 0.0) ds = add_output_noise(std::move(ds), cfg.noise_std, cfg.noise_seed);
      dataset = std::move(ds);
      write_dataset(result.dir / "dataset", *dataset, gen);
      artifacts.push_back("dataset/");
    }
  }

  // Reduction. The linear paths materialize a serializable model description
  // and realize it; the nonlinear path assembles its model directly.
  std::optional<ReducedModel> model;
  std::optional<NonlinearReducedModel> nl_model;
  std::optional<LyapunovSeries> x_series;

  if (cfg.reduction != "nl") {
    RomSpec spec;
    spec.gen = gen;
    spec.param_interval = interval;
    if (cfg.reduction == "series") {
      const MomentSeries ms = nested_sylvester(*lti, gen, cfg.center, cfg.order);
      write_json(result.dir / "series.json", series_to_json(ms));
      artifacts.push_back("series.json");
      spec.map_kind = MomentMap::Kind::Series;
      spec.series = ms;
      spec.system = *lti;
      summary["reduction"] = Json{{"kind", "series"}, {"order", cfg.order},
                                  {"center", cfg.center}, {"nu", gen.nu}};
    } else {
      const BasisSet basis = parse_basis_spec(cfg.basis_spec);
      WeightMatrix w;
      if (cfg.reduction == "basis") {
        const std::vector<double> params =
            linspace(interval[0], interval[1], cfg.sample_count);
        w = fit_model_based(*lti, gen, basis, params);
      } else {
        // A data fit is only valid on the sampled range, which may be
        // narrower than the plant's interval.
        w = fit_data_driven(*dataset, basis);
        spec.param_interval = w.param_interval;
      }
      write_json(result.dir / "weights.json", weights_to_json(w));
      artifacts.push_back("weights.json");
      spec.map_kind = MomentMap::Kind::Basis;
      spec.weights = std::move(w);
      summary["reduction"] = Json{{"kind", cfg.reduction}, {"basis", cfg.basis_spec},
                                  {"nu", gen.nu}};
    }

    if (cfg.gain_kind == "preserving") {
      x_series = nested_lyapunov(*lti, cfg.center, cfg.lyap_order,
                                 Matrix::Identity(lti->n, lti->n));
      spec.gain_kind = GainMap::Kind::Preserving;
      spec.x_series = x_series;
    } else {
      spec.gain_kind = GainMap::Kind::Constant;
      spec.gain_value = cfg.gain_kind == "placed"
                            ? place_constant_gain(gen, cfg.gain_zeta)
                            : stabilizing_constant_gain(gen, cfg.gain_scale);
    }
    write_json(result.dir / "rom.json", rom_to_json(spec));
    artifacts.push_back("rom.json");
    model = realize_rom(spec);
  } else {
    const Matrix joint = [&dataset, &gen]() {
      const SnapshotDataset& ds = *dataset;
      const Index h = ds.windows.front().outputs.size();
      Matrix m(h * static_cast<Index>(ds.windows.size()), gen.nu + 1);
      Index r = 0;
      for (const auto& win : ds.windows)
        for (Index j = 0; j < h; ++j, ++r) {
          m.row(r).head(gen.nu) = win.omega.row(j);
          m(r, gen.nu) = win.param;
        }
      return m;
    }();
    const NonlinearBasisSet basis =
        cfg.nl_poly > 0 ? NonlinearBasisSet::product_poly_state(cfg.nl_poly, gen.nu)
                        : NonlinearBasisSet::gaussian_rbf(joint, cfg.rbf, cfg.width, cfg.seed);
    NlRomSpec spec;
    spec.gen = gen;
    spec.weights = fit_nonlinear_moment(*dataset, basis);
    spec.delta = cfg.gain_scale * gen.L.transpose();
    write_json(result.dir / "nl_weights.json", nl_weights_to_json(spec.weights));
    write_json(result.dir / "nl_rom.json", nl_rom_to_json(spec));
    artifacts.push_back("nl_weights.json");
    artifacts.push_back("nl_rom.json");
    nl_model = realize_nl_rom(spec);
    summary["reduction"] =
        Json{{"kind", "nl"}, {"terms", nl_model->weights.theta.size()}, {"nu", gen.nu}};
  }

  if (cfg.verify) {
    PreservationSpec vspec;
    vspec.property = cfg.property == "stability" ? PreservedProperty::Stability
                                                 : PreservedProperty::Dissipativity;
    vspec.margin = cfg.margin;
    const std::vector<double> grid =
        linspace(model->param_interval[0], model->param_interval[1], cfg.verify_grid);
    std::function<Matrix(double)> x_fn;
    if (vspec.property == PreservedProperty::Dissipativity) {
      const LyapunovSeries xs = *x_series;
      x_fn = [xs](double p) { return eval_lyapunov_series(xs, p); };
    }
    const GridReport rep = verify_preservation_grid(*model, vspec, grid, x_fn);
    const double worst = *std::max_element(rep.values.begin(), rep.values.end());
    Json values = Json::array();
    for (double v : rep.values) values.push_back(v);
    write_json(result.dir / "verification.json",
               Json{{"property", cfg.property},
                    {"grid", cfg.verify_grid},
                    {"margin", cfg.margin},
                    {"worst", worst},
                    {"pass", rep.pass},
                    {"values", std::move(values)}});
    artifacts.push_back("verification.json");
    summary["verification"] = Json{{"property", cfg.property}, {"pass", rep.pass},
                                   {"worst", worst}};
  }

  if (cfg.evaluate) {
    const std::string sys_hash =
        lti ? content_hash(system_to_json(*lti)) : ("nl-duffing-" + std::to_string(nlsys->n));
    if (cfg.metric == "l2-moment") {
      const std::vector<double> grid =
          linspace(model->param_interval[0], model->param_interval[1], cfg.eval_grid);
      Vector errors(cfg.eval_grid);
      const ParametricLTI& sys = *lti;
      const MomentMap& map = model->moment_map;
      parallel_for(cfg.eval_grid, [&](Index i) {
        const ErrorCurve c = moment_error_curve(sys, gen, map, {grid[i]});
        errors[i] = c.errors[0];
      });
      CurveDoc doc;
      doc.xname = "p";
      doc.yname = "rel_l2_error";
      doc.x = Eigen::Map<const Vector>(grid.data(), cfg.eval_grid);
      doc.y = errors;
      doc.meta = {{"metric", "l2-moment"},
                  {"system", sys_hash},
                  {"settings", "grid=" + std::to_string(cfg.eval_grid)}};
      write_curve(result.dir / "l2_moment.csv", doc);
      artifacts.push_back("l2_moment.csv");
      summary["evaluation"] = Json{{"metric", "l2-moment"},
                                   {"max_error", errors.maxCoeff()},
                                   {"mean_error", errors.mean()}};
    } else if (cfg.metric == "h2") {
      const std::vector<double> params =
          cfg.eval_params.empty()
              ? linspace(model->param_interval[0], model->param_interval[1], 5)
              : cfg.eval_params;
      const Index count = static_cast<Index>(params.size());
      Vector errors(count);
      const ParametricLTI& sys = *lti;
      const ReducedModel& rom = *model;
      const Vector grid = log_grid(-1.0, 4.0, cfg.eval_grid);
      parallel_for(count, [&](Index i) {
        errors[i] = h2_relative_error(sys, rom, params[static_cast<std::size_t>(i)], grid);
      });
      CurveDoc doc;
      doc.xname = "p";
      doc.yname = "rel_h2_error";
      doc.x = Eigen::Map<const Vector>(params.data(), count);
      doc.y = errors;
      doc.meta = {{"metric", "h2"},
                  {"system", sys_hash},
                  {"settings", "freq_grid=" + std::to_string(cfg.eval_grid)}};
      write_curve(result.dir / "h2.csv", doc);
      artifacts.push_back("h2.csv");
      summary["evaluation"] = Json{{"metric", "h2"}, {"max_error", errors.maxCoeff()}};
    } else if (cfg.metric == "bode") {
      const Vector grid = log_grid(-1.0, 4.0, cfg.eval_grid);
      const BodeCurve full = bode_magnitude(*lti, cfg.bode_p, grid);
      const BodeCurve rom = bode_magnitude(*model, cfg.bode_p, grid);
      const auto write_bode = [&](const char* name, const BodeCurve& curve) {
        CurveDoc doc;
        doc.xname = "omega";
        doc.yname = "magnitude";
        doc.x = curve.freqs;
        doc.y = curve.magnitude;
        doc.meta = {{"metric", "bode"},
                    {"system", sys_hash},
                    {"settings", "p=" + detail::format_number(cfg.bode_p)}};
        write_curve(result.dir / name, doc);
        artifacts.push_back(name);
      };
      write_bode("bode_full.csv", full);
      write_bode("bode_rom.csv", rom);
      const double gap =
          ((full.magnitude - rom.magnitude).cwiseAbs().array() /
           (1.0 + full.magnitude.array().abs()))
              .maxCoeff();
      summary["evaluation"] = Json{{"metric", "bode"}, {"max_rel_gap", gap}};
    } else {
      const std::vector<double>& params = cfg.eval_params;
      if (params.empty()) throw ConfigInvalid("evaluation.params: nrmse needs held-out values");
      const Index count = static_cast<Index>(params.size());
      Vector errors(count);
      SimConfig sim;
      sim.dt = cfg.dt;
      sim.t_end = cfg.win_end;
      const NonlinearParametricSystem& plant = *nlsys;
      const NonlinearReducedModel& rom = *nl_model;
      parallel_for(count, [&](Index i) {
        const double p = params[static_cast<std::size_t>(i)];
        const Trajectory full = simulate_interconnection(plant, gen, p, std::nullopt, sim);
        const Trajectory red = simulate_interconnection(rom, p, std::nullopt, sim);
        const SnapshotWindow wf = extract_window(full, gen, cfg.win_start, cfg.win_end, cfg.h);
        const SnapshotWindow wr = extract_window(red, gen, cfg.win_start, cfg.win_end, cfg.h);
        errors[i] = detail::nrmse_between(wf.outputs, wr.outputs);
      });
      CurveDoc doc;
      doc.xname = "p";
      doc.yname = "nrmse";
      doc.x = Eigen::Map<const Vector>(params.data(), count);
      doc.y = errors;
      doc.meta = {{"metric", "nrmse"}, {"system", sys_hash}};
      write_curve(result.dir / "nrmse.csv", doc);
      artifacts.push_back("nrmse.csv");
      summary["evaluation"] = Json{{"metric", "nrmse"}, {"max_error", errors.maxCoeff()}};
    }
  }

  Json art = Json::array();
  for (const auto& a : artifacts) art.push_back(a);
  summary["artifacts"] = std::move(art);
  write_json(result.dir / "summary.json", summary);
  result.summary = std::move(summary);
  return result;
}

inline RunResult run_experiment_file(const std::filesystem::path& config_path,
                                     const std::filesystem::path& out_root) {
  return run_experiment(read_json(config_path), out_root);
}

}  // namespace parmor
