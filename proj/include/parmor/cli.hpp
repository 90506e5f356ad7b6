#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "parmor/experiment.hpp"

// Command-line front end. Subcommands are thin wrappers over the library
// operations; every artifact they exchange is one of the io.hpp documents.
//
// Exit codes: 0 success, 1 a verified property failed, 2 invalid
// configuration or arguments, 3 numerical failure, 4 I/O failure.

namespace parmor {

namespace cli_detail {

inline std::vector<double> parse_number_list(const std::string& s, const char* who) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const std::string tok =
        comma == std::string::npos ? s.substr(pos) : s.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw ConfigInvalid(std::string(who) + ": bad number '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// "a:b:c" with c an integer count.
inline std::array<double, 3> parse_triple(const std::string& s, const char* who) {
  const auto c1 = s.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : s.find(':', c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw ConfigInvalid(std::string(who) + ": expected lo:hi:count");
  try {
    return {std::stod(s.substr(0, c1)), std::stod(s.substr(c1 + 1, c2 - c1 - 1)),
            std::stod(s.substr(c2 + 1))};
  } catch (const std::logic_error&) {
    throw ConfigInvalid(std::string(who) + ": expected lo:hi:count");
  }
}

struct GenFlags {
  std::string freqs;
  std::string interp_grid;
  bool include_zero = false;
  std::string l_row;
  std::string omega0;
};

inline void add_gen_flags(CLI::App* cmd, GenFlags& flags) {
  cmd->add_option("--freqs", flags.freqs, "comma list of oscillation frequencies (rad/s)");
  cmd->add_option("--interp-grid", flags.interp_grid,
                  "lo:hi:count log-spaced interpolation frequencies");
  cmd->add_flag("--include-zero", flags.include_zero, "add a constant-input block");
  cmd->add_option("--gen-l", flags.l_row, "comma list overriding the exciter output row");
  cmd->add_option("--gen-omega0", flags.omega0,
                  "comma list overriding the exciter initial state");
}

inline SignalGenerator build_generator(const GenFlags& flags) {
  if (!flags.freqs.empty() && !flags.interp_grid.empty())
    throw ConfigInvalid("--freqs and --interp-grid are mutually exclusive");
  std::optional<RowVector> l_row;
  if (!flags.l_row.empty()) {
    const auto list = parse_number_list(flags.l_row, "--gen-l");
    RowVector v(static_cast<Index>(list.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = list[static_cast<std::size_t>(i)];
    l_row = std::move(v);
  }
  std::optional<Vector> w0;
  if (!flags.omega0.empty()) {
    const auto list = parse_number_list(flags.omega0, "--gen-omega0");
    Vector v(static_cast<Index>(list.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = list[static_cast<std::size_t>(i)];
    w0 = std::move(v);
  }
  if (!flags.freqs.empty()) {
    const auto list = parse_number_list(flags.freqs, "--freqs");
    Vector v(static_cast<Index>(list.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = list[static_cast<std::size_t>(i)];
    return from_frequencies(v, flags.include_zero, l_row, w0);
  }
  double lo = 1.0, hi = std::pow(10.0, 3.1);
  Index count = 16;
  if (!flags.interp_grid.empty()) {
    const auto t = parse_triple(flags.interp_grid, "--interp-grid");
    lo = t[0];
    hi = t[1];
    count = static_cast<Index>(t[2]);
    if (!(lo > 0.0) || !(hi > lo) || count < 1)
      throw ConfigInvalid("--interp-grid: need 0 < lo < hi and a positive count");
  }
  return from_frequencies(log_grid(std::log10(lo), std::log10(hi), count), flags.include_zero,
                          l_row, w0);
}

inline ParametricLTI load_system(const std::string& path) {
  return system_from_json(read_json(path));
}

struct GainFlags {
  std::string kind = "stabilizing";
  double scale = 1.0;
  double zeta = 0.3;
  Index lyap_order = 0;  // 0: inherit the map order
};

inline void add_gain_flags(CLI::App* cmd, GainFlags& flags) {
  cmd->add_option("--gain", flags.kind, "gain rule: stabilizing | placed | preserving");
  cmd->add_option("--gain-scale", flags.scale, "scale for the stabilizing gain");
  cmd->add_option("--gain-zeta", flags.zeta, "damping ratio for the placed gain");
  cmd->add_option("--lyap-order", flags.lyap_order,
                  "certificate series terms for a preserving gain");
}

// Completes a RomSpec whose map fields are already populated, realizes it to
// surface assembly errors before anything is written, then writes it.
inline void finish_rom(RomSpec spec, const GainFlags& gain, Index map_order,
                       const std::string& rom_path) {
  if (gain.kind == "stabilizing") {
    spec.gain_kind = GainMap::Kind::Constant;
    spec.gain_value = stabilizing_constant_gain(spec.gen, gain.scale);
  } else if (gain.kind == "placed") {
    spec.gain_kind = GainMap::Kind::Constant;
    spec.gain_value = place_constant_gain(spec.gen, gain.zeta);
  } else if (gain.kind == "preserving") {
    if (!spec.system || spec.map_kind != MomentMap::Kind::Series)
      throw ConfigInvalid("--gain preserving: needs a series reduction of a known system");
    spec.gain_kind = GainMap::Kind::Preserving;
    const Index terms = gain.lyap_order > 0 ? gain.lyap_order : map_order;
    spec.x_series = nested_lyapunov(*spec.system, spec.series->p0, terms,
                                    Matrix::Identity(spec.system->n, spec.system->n));
  } else {
    throw ConfigInvalid("--gain: expected stabilizing, placed, or preserving");
  }
  realize_rom(spec);
  write_json(rom_path, rom_to_json(spec));
  std::cout << "wrote " << rom_path << "\n";
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"data-driven model reduction by moment matching"};
  app.require_subcommand(1);
  int exit_code = 0;

  // bench gen
  auto* bench = app.add_subcommand("bench", "benchmark plants");
  bench->require_subcommand(1);
  auto* bench_gen = bench->add_subcommand("gen", "write the parametric benchmark system");
  Index bench_k = 500;
  std::string bench_out;
  bench_gen->add_option("--k", bench_k, "oscillator pair count (state dim = 2k)");
  bench_gen->add_option("-o,--output", bench_out, "system JSON path")->required();
  bench_gen->callback([&] {
    const ParametricLTI sys = make_benchmark(bench_k);
    write_json(bench_out, system_to_json(sys));
    std::cout << "wrote " << bench_out << " (n = " << sys.n << ")\n";
  });

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "drive a plant with the exciter");
  struct {
    std::string system, out, collect, params, window, method;
    bool nl = false;
    double p = 0.55, t_start = 0.0, t_end = 20.0, dt = 1e-3;
  } sim;
  cli_detail::GenFlags sim_gen;
  sim_cmd->add_option("--system", sim.system, "system JSON path");
  sim_cmd->add_flag("--nl", sim.nl, "use the built-in nonlinear benchmark");
  sim_cmd->add_option("--p", sim.p, "parameter value");
  sim_cmd->add_option("--t-start", sim.t_start, "recording start time");
  sim_cmd->add_option("--t-end", sim.t_end, "end time");
  sim_cmd->add_option("--dt", sim.dt, "integration step");
  sim_cmd->add_option("--method", sim.method, "stepper: expm | rk4");
  sim_cmd->add_option("-o,--output", sim.out, "trajectory CSV path");
  sim_cmd->add_option("--collect", sim.collect, "write a snapshot dataset directory");
  sim_cmd->add_option("--params", sim.params, "lo:hi:count parameter sweep for --collect");
  sim_cmd->add_option("--window", sim.window, "start:end:h snapshot window for --collect");
  cli_detail::add_gen_flags(sim_cmd, sim_gen);
  sim_cmd->callback([&] {
    if (sim.system.empty() == !sim.nl)
      throw ConfigInvalid("simulate: give exactly one of --system and --nl");
    const SignalGenerator gen = cli_detail::build_generator(sim_gen);
    SimConfig cfg;
    cfg.dt = sim.dt;
    cfg.t_start = sim.t_start;
    cfg.t_end = sim.t_end;
    if (sim.method == "expm") cfg.method = StepMethod::ExpmLTI;
    if (sim.method == "rk4") cfg.method = StepMethod::Rk4;
    if (!sim.method.empty() && !cfg.method)
      throw ConfigInvalid("--method: expected expm or rk4");

    std::optional<ParametricLTI> lti;
    std::optional<NonlinearParametricSystem> nlsys;
    if (sim.nl) {
      nlsys = make_nl_benchmark();
    } else {
      lti = cli_detail::load_system(sim.system);
    }

    if (!sim.collect.empty()) {
      if (sim.params.empty() || sim.window.empty())
        throw ConfigInvalid("--collect: needs --params and --window");
      const auto pr = cli_detail::parse_triple(sim.params, "--params");
      const auto wi = cli_detail::parse_triple(sim.window, "--window");
      const std::vector<double> params =
          linspace(pr[0], pr[1], static_cast<Index>(pr[2]));
      const SnapshotDataset ds =
          lti ? collect_snapshots(*lti, gen, params, wi[0], wi[1],
                                  static_cast<Index>(wi[2]), cfg)
              : collect_snapshots(*nlsys, gen, params, wi[0], wi[1],
                                  static_cast<Index>(wi[2]), cfg);
      write_dataset(sim.collect, ds, gen);
      std::cout << "wrote " << sim.collect << " (" << ds.windows.size() << " windows)\n";
      return;
    }
    if (sim.out.empty()) throw ConfigInvalid("simulate: need -o or --collect");
    const Trajectory traj =
        lti ? simulate_interconnection(*lti, gen, sim.p, std::nullopt, cfg)
            : simulate_interconnection(*nlsys, gen, sim.p, std::nullopt, cfg);
    write_trajectory(sim.out, traj);
    std::cout << "wrote " << sim.out << " (" << traj.times.size() << " samples)\n";
  });

  // reduce {series | basis | data | nl}
  auto* reduce = app.add_subcommand("reduce", "estimate a moment map and assemble a model");
  reduce->require_subcommand(1);

  auto* red_series = reduce->add_subcommand("series", "nested power-series estimate");
  struct {
    std::string system, out, rom;
    Index order = 4;
    double center = 0.55;
  } rs;
  cli_detail::GenFlags rs_gen;
  cli_detail::GainFlags rs_gain;
  red_series->add_option("--system", rs.system, "system JSON path")->required();
  red_series->add_option("--order", rs.order, "series terms");
  red_series->add_option("--center", rs.center, "expansion point");
  red_series->add_option("-o,--output", rs.out, "series JSON path")->required();
  red_series->add_option("--rom", rs.rom, "also write a reduced-model JSON");
  cli_detail::add_gen_flags(red_series, rs_gen);
  cli_detail::add_gain_flags(red_series, rs_gain);
  red_series->callback([&] {
    const ParametricLTI sys = cli_detail::load_system(rs.system);
    const SignalGenerator gen = cli_detail::build_generator(rs_gen);
    const MomentSeries ms = nested_sylvester(sys, gen, rs.center, rs.order);
    write_json(rs.out, series_to_json(ms));
    std::cout << "wrote " << rs.out << " (" << ms.order() << " terms)\n";
    if (!rs.rom.empty()) {
      RomSpec spec;
      spec.gen = gen;
      spec.param_interval = sys.param_interval;
      spec.map_kind = MomentMap::Kind::Series;
      spec.series = ms;
      spec.system = sys;
      cli_detail::finish_rom(std::move(spec), rs_gain, rs.order, rs.rom);
    }
  });

  auto* red_basis = reduce->add_subcommand("basis", "model-based basis regression");
  struct {
    std::string system, basis = "poly:6", out, rom;
    Index samples = 10;
  } rb;
  cli_detail::GenFlags rb_gen;
  cli_detail::GainFlags rb_gain;
  red_basis->add_option("--system", rb.system, "system JSON path")->required();
  red_basis->add_option("--basis", rb.basis, "basis spec: poly:N | fourier:PERIOD:N");
  red_basis->add_option("--K", rb.samples, "parameter sample count");
  red_basis->add_option("-o,--output", rb.out, "weights JSON path")->required();
  red_basis->add_option("--rom", rb.rom, "also write a reduced-model JSON");
  cli_detail::add_gen_flags(red_basis, rb_gen);
  cli_detail::add_gain_flags(red_basis, rb_gain);
  red_basis->callback([&] {
    const ParametricLTI sys = cli_detail::load_system(rb.system);
    const SignalGenerator gen = cli_detail::build_generator(rb_gen);
    const std::vector<double> params =
        linspace(sys.param_interval[0], sys.param_interval[1], rb.samples);
    const WeightMatrix w = fit_model_based(sys, gen, parse_basis_spec(rb.basis), params);
    write_json(rb.out, weights_to_json(w));
    std::cout << "wrote " << rb.out << "\n";
    if (!rb.rom.empty()) {
      RomSpec spec;
      spec.gen = gen;
      spec.param_interval = sys.param_interval;
      spec.map_kind = MomentMap::Kind::Basis;
      spec.weights = w;
      cli_detail::finish_rom(std::move(spec), rb_gain, 0, rb.rom);
    }
  });

  auto* red_data = reduce->add_subcommand("data", "data-driven basis regression");
  struct {
    std::string dataset, basis = "poly:6", out, rom;
  } rd;
  cli_detail::GainFlags rd_gain;
  red_data->add_option("--dataset", rd.dataset, "snapshot dataset directory")->required();
  red_data->add_option("--basis", rd.basis, "basis spec: poly:N | fourier:PERIOD:N");
  red_data->add_option("-o,--output", rd.out, "weights JSON path")->required();
  red_data->add_option("--rom", rd.rom, "also write a reduced-model JSON");
  cli_detail::add_gain_flags(red_data, rd_gain);
  red_data->callback([&] {
    const DatasetArtifact art = read_dataset(rd.dataset);
    const WeightMatrix w = fit_data_driven(art.data, parse_basis_spec(rd.basis));
    write_json(rd.out, weights_to_json(w));
    std::cout << "wrote " << rd.out << "\n";
    if (!rd.rom.empty()) {
      RomSpec spec;
      spec.gen = art.gen;
      spec.param_interval = w.param_interval;
      spec.map_kind = MomentMap::Kind::Basis;
      spec.weights = w;
      cli_detail::finish_rom(std::move(spec), rd_gain, 0, rd.rom);
    }
  });

  auto* red_nl = reduce->add_subcommand("nl", "nonlinear kernel regression");
  struct {
    std::string dataset, out, rom;
    Index rbf = 40, poly = 0;
    double width = 1.0, gain_scale = 1.0, margin = 0.0;
    std::uint64_t seed = 1;
  } rn;
  red_nl->add_option("--dataset", rn.dataset, "snapshot dataset directory")->required();
  red_nl->add_option("--rbf", rn.rbf, "Gaussian kernel count");
  red_nl->add_option("--seed", rn.seed, "kernel center sampling seed");
  red_nl->add_option("--width", rn.width, "kernel width after standardization");
  red_nl->add_option("--poly", rn.poly, "use a product basis of this order instead");
  red_nl->add_option("--gain-scale", rn.gain_scale, "injection gain scale");
  red_nl->add_option("--margin", rn.margin, "required decay margin of the model");
  red_nl->add_option("-o,--output", rn.out, "weights JSON path")->required();
  red_nl->add_option("--rom", rn.rom, "also write a reduced-model JSON");
  red_nl->callback([&] {
    const DatasetArtifact art = read_dataset(rn.dataset);
    const SignalGenerator& gen = art.gen;
    const Index h = art.data.windows.front().outputs.size();
    Matrix joint(h * static_cast<Index>(art.data.windows.size()), gen.nu + 1);
    Index r = 0;
    for (const auto& win : art.data.windows)
      for (Index j = 0; j < h; ++j, ++r) {
        joint.row(r).head(gen.nu) = win.omega.row(j);
        joint(r, gen.nu) = win.param;
      }
    const NonlinearBasisSet basis =
        rn.poly > 0 ? NonlinearBasisSet::product_poly_state(rn.poly, gen.nu)
                    : NonlinearBasisSet::gaussian_rbf(joint, rn.rbf, rn.width, rn.seed);
    NlRomSpec spec;
    spec.gen = gen;
    spec.weights = fit_nonlinear_moment(art.data, basis);
    spec.delta = rn.gain_scale * gen.L.transpose();
    spec.margin = rn.margin;
    write_json(rn.out, nl_weights_to_json(spec.weights));
    std::cout << "wrote " << rn.out << "\n";
    if (!rn.rom.empty()) {
      realize_nl_rom(spec);
      write_json(rn.rom, nl_rom_to_json(spec));
      std::cout << "wrote " << rn.rom << "\n";
    }
  });

  // verify
  auto* verify = app.add_subcommand("verify", "check a preserved property on a grid");
  struct {
    std::string rom, property = "stability";
    Index grid = 50;
    double margin = 0.0;
  } vf;
  verify->add_option("--rom", vf.rom, "reduced-model JSON path")->required();
  verify->add_option("--property", vf.property, "stability | dissipativity");
  verify->add_option("--grid", vf.grid, "parameter grid size");
  verify->add_option("--margin", vf.margin, "required decay margin");
  verify->callback([&] {
    const RomSpec spec = rom_from_json(read_json(vf.rom));
    const ReducedModel model = realize_rom(spec);
    PreservationSpec pspec;
    if (vf.property == "stability") {
      pspec.property = PreservedProperty::Stability;
    } else if (vf.property == "dissipativity") {
      pspec.property = PreservedProperty::Dissipativity;
    } else {
      throw ConfigInvalid("--property: expected stability or dissipativity");
    }
    pspec.margin = vf.margin;
    std::function<Matrix(double)> x_fn;
    if (pspec.property == PreservedProperty::Dissipativity) {
      if (!spec.x_series)
        throw ConfigInvalid("--property dissipativity: model carries no certificate series");
      const LyapunovSeries xs = *spec.x_series;
      x_fn = [xs](double p) { return eval_lyapunov_series(xs, p); };
    }
    const std::vector<double> grid =
        linspace(model.param_interval[0], model.param_interval[1], vf.grid);
    const GridReport rep = verify_preservation_grid(model, pspec, grid, x_fn);
    const double worst = *std::max_element(rep.values.begin(), rep.values.end());
    std::cout << vf.property << " on " << vf.grid << " points: worst " << worst << " => "
              << (rep.pass ? "PASS" : "FAIL") << "\n";
    if (!rep.pass) exit_code = 1;
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "error metrics against the full system");
  struct {
    std::string metric, system, rom, out, params;
    Index grid = 0;
  } ev;
  eval_cmd->add_option("--metric", ev.metric, "l2-moment | h2 | bode")->required();
  eval_cmd->add_option("--system", ev.system, "system JSON path")->required();
  eval_cmd->add_option("--rom", ev.rom, "reduced-model JSON path")->required();
  eval_cmd->add_option("--grid", ev.grid, "grid size (parameters or frequencies)");
  eval_cmd->add_option("--p", ev.params, "comma list of parameters (h2) or one value (bode)");
  eval_cmd->add_option("-o,--output", ev.out, "curve CSV path")->required();
  eval_cmd->callback([&] {
    const ParametricLTI sys = cli_detail::load_system(ev.system);
    const RomSpec spec = rom_from_json(read_json(ev.rom));
    const ReducedModel model = realize_rom(spec);
    const std::string sys_hash = content_hash(system_to_json(sys));
    if (ev.metric == "l2-moment") {
      const Index count = ev.grid > 0 ? ev.grid : 200;
      const std::vector<double> grid =
          linspace(model.param_interval[0], model.param_interval[1], count);
      const ErrorCurve curve = moment_error_curve(sys, model.gen, model.moment_map, grid);
      CurveDoc doc;
      doc.xname = "p";
      doc.yname = "rel_l2_error";
      doc.x = Eigen::Map<const Vector>(grid.data(), count);
      doc.y = Eigen::Map<const Vector>(curve.errors.data(), count);
      doc.meta = {{"metric", "l2-moment"},
                  {"system", sys_hash},
                  {"settings", "grid=" + std::to_string(count)}};
      write_curve(ev.out, doc);
      std::cout << "wrote " << ev.out << " (max " << doc.y.maxCoeff() << ")\n";
    } else if (ev.metric == "h2") {
      const std::vector<double> params =
          ev.params.empty()
              ? linspace(model.param_interval[0], model.param_interval[1], 5)
              : cli_detail::parse_number_list(ev.params, "--p");
      const Vector freq_grid = log_grid(-1.0, 4.0, ev.grid > 0 ? ev.grid : 1000);
      Vector errors(static_cast<Index>(params.size()));
      for (Index i = 0; i < errors.size(); ++i)
        errors[i] = h2_relative_error(sys, model, params[static_cast<std::size_t>(i)],
                                      freq_grid);
      CurveDoc doc;
      doc.xname = "p";
      doc.yname = "rel_h2_error";
      doc.x = Eigen::Map<const Vector>(params.data(), errors.size());
      doc.y = errors;
      doc.meta = {{"metric", "h2"},
                  {"system", sys_hash},
                  {"settings", "freq_grid=" + std::to_string(freq_grid.size())}};
      write_curve(ev.out, doc);
      std::cout << "wrote " << ev.out << " (max " << errors.maxCoeff() << ")\n";
    } else if (ev.metric == "bode") {
      const double p = ev.params.empty()
                           ? 0.5 * (model.param_interval[0] + model.param_interval[1])
                           : cli_detail::parse_number_list(ev.params, "--p").at(0);
      const Vector freq_grid = log_grid(-1.0, 4.0, ev.grid > 0 ? ev.grid : 200);
      const BodeCurve full = bode_magnitude(sys, p, freq_grid);
      const BodeCurve rom = bode_magnitude(model, p, freq_grid);
      const auto write_one = [&](const std::filesystem::path& path, const BodeCurve& curve) {
        CurveDoc doc;
        doc.xname = "omega";
        doc.yname = "magnitude";
        doc.x = curve.freqs;
        doc.y = curve.magnitude;
        doc.meta = {{"metric", "bode"},
                    {"system", sys_hash},
                    {"settings", "p=" + detail::format_number(p)}};
        write_curve(path, doc);
        std::cout << "wrote " << path.string() << "\n";
      };
      std::filesystem::path full_path(ev.out);
      full_path.replace_extension(".full" + full_path.extension().string());
      write_one(ev.out, rom);
      write_one(full_path, full);
    } else {
      throw ConfigInvalid("--metric: expected l2-moment, h2, or bode");
    }
  });

  // run
  auto* run = app.add_subcommand("run", "execute an experiment config end to end");
  struct {
    std::string config, out = "runs";
  } rr;
  run->add_option("config", rr.config, "experiment JSON path")->required();
  run->add_option("--out", rr.out, "root directory for run artifacts");
  run->callback([&] {
    const RunResult result = run_experiment_file(rr.config, rr.out);
    std::cout << "run dir: " << result.dir.string() << "\n";
    if (result.summary.contains("evaluation"))
      std::cout << "evaluation: " << result.summary["evaluation"].dump() << "\n";
    if (result.summary.contains("verification"))
      std::cout << "verification: " << result.summary["verification"].dump() << "\n";
  });

  try {
    app.parse(argc, argv);
    return exit_code;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ConfigInvalid& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DimensionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParameterOutOfRange& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DuplicateFrequency& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const WindowOutsideTrajectory& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NonAnalyticCoefficient& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

inline int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace parmor
