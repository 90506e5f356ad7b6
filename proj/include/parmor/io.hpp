#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "parmor/moment_basis.hpp"
#include "parmor/moment_series.hpp"
#include "parmor/nonlinear.hpp"
#include "parmor/psys.hpp"
#include "parmor/rom.hpp"
#include "parmor/sim.hpp"

// On-disk artifact formats. Every document carries only plain data; maps that
// are closures in memory (exact moments, preserving gains) serialize through
// the data they were built from and are rebuilt on load.

namespace parmor {

using Json = nlohmann::json;

namespace detail {

inline Json json_from_matrix(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json json_from_vector(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Json json_from_rowvector(const RowVector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline const Json& json_field(const Json& j, const char* key, const char* who) {
  const auto it = j.find(key);
  if (it == j.end()) throw IoError(std::string(who) + ": missing field '" + key + "'");
  return *it;
}

inline double json_number(const Json& j, const char* who) {
  if (!j.is_number()) throw IoError(std::string(who) + ": expected a number");
  return j.get<double>();
}

inline Matrix matrix_from_json(const Json& j, const char* who) {
  if (!j.is_array()) throw IoError(std::string(who) + ": expected an array of rows");
  const Index rows = static_cast<Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  if (!j[0].is_array()) throw IoError(std::string(who) + ": expected nested arrays");
  const Index cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<Index>(j[i].size()) != cols)
      throw IoError(std::string(who) + ": ragged matrix rows");
    for (Index c = 0; c < cols; ++c) m(i, c) = json_number(j[i][c], who);
  }
  return m;
}

inline Vector vector_from_json(const Json& j, const char* who) {
  if (!j.is_array()) throw IoError(std::string(who) + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = json_number(j[i], who);
  return v;
}

inline RowVector rowvector_from_json(const Json& j, const char* who) {
  const Vector v = vector_from_json(j, who);
  return v.transpose();
}

// Fixed-width round-trip formatting keeps CSV bytes reproducible across runs.
inline std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  return out;
}

inline double parse_number(const std::string& s, const char* who) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(std::string(who) + ": bad numeric cell '" + s + "'");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// file primitives

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
  if (!out) throw IoError("short write to " + path.string());
}

inline Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string content_hash(const Json& j) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(j.dump());
  return os.str();
}

// ---------------------------------------------------------------------------
// coefficient functions

inline Json coeff_to_json(const CoefficientFunction& f) {
  Json j;
  switch (f.kind()) {
    case CoefficientFunction::Kind::Polynomial:
      j["kind"] = "polynomial";
      j["coeffs"] = detail::json_from_vector(f.coeffs());
      break;
    case CoefficientFunction::Kind::Sinusoid:
      j["kind"] = "sinusoid";
      j["amplitude"] = f.amplitude();
      j["frequency"] = f.frequency();
      j["phase"] = f.phase();
      break;
    case CoefficientFunction::Kind::Exponential:
      j["kind"] = "exponential";
      j["rate"] = f.rate();
      j["scale"] = f.scale();
      break;
    case CoefficientFunction::Kind::Tabulated:
      j["kind"] = "tabulated";
      j["grid"] = detail::json_from_vector(f.grid());
      j["values"] = detail::json_from_vector(f.values());
      break;
  }
  return j;
}

inline CoefficientFunction coeff_from_json(const Json& j) {
  const std::string kind = detail::json_field(j, "kind", "coefficient").get<std::string>();
  if (kind == "polynomial")
    return CoefficientFunction::polynomial(
        detail::vector_from_json(detail::json_field(j, "coeffs", "coefficient"), "coeffs"));
  if (kind == "sinusoid")
    return CoefficientFunction::sinusoid(
        detail::json_number(detail::json_field(j, "amplitude", "coefficient"), "amplitude"),
        detail::json_number(detail::json_field(j, "frequency", "coefficient"), "frequency"),
        detail::json_number(detail::json_field(j, "phase", "coefficient"), "phase"));
  if (kind == "exponential")
    return CoefficientFunction::exponential(
        detail::json_number(detail::json_field(j, "rate", "coefficient"), "rate"),
        detail::json_number(detail::json_field(j, "scale", "coefficient"), "scale"));
  if (kind == "tabulated")
    return CoefficientFunction::tabulated(
        detail::vector_from_json(detail::json_field(j, "grid", "coefficient"), "grid"),
        detail::vector_from_json(detail::json_field(j, "values", "coefficient"), "values"));
  throw IoError("coefficient: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// systems and generators

inline Json system_to_json(const ParametricLTI& sys) {
  const auto terms_json = [](const std::vector<ParametricTerm>& terms) {
    Json arr = Json::array();
    for (const auto& t : terms)
      arr.push_back({{"fn", coeff_to_json(t.fn)}, {"matrix", detail::json_from_matrix(t.mat)}});
    return arr;
  };
  return Json{{"n", sys.n},
              {"A_terms", terms_json(sys.A_terms)},
              {"B_terms", terms_json(sys.B_terms)},
              {"C_terms", terms_json(sys.C_terms)},
              {"param_interval", {sys.param_interval[0], sys.param_interval[1]}}};
}

inline ParametricLTI system_from_json(const Json& j) {
  const auto terms_from = [](const Json& arr, const char* who) {
    if (!arr.is_array()) throw IoError(std::string(who) + ": expected an array of terms");
    std::vector<ParametricTerm> out;
    for (const Json& t : arr)
      out.push_back({coeff_from_json(detail::json_field(t, "fn", who)),
                     detail::matrix_from_json(detail::json_field(t, "matrix", who), who)});
    return out;
  };
  ParametricLTI sys;
  sys.n = static_cast<Index>(
      detail::json_number(detail::json_field(j, "n", "system"), "system.n"));
  sys.A_terms = terms_from(detail::json_field(j, "A_terms", "system"), "system.A_terms");
  sys.B_terms = terms_from(detail::json_field(j, "B_terms", "system"), "system.B_terms");
  sys.C_terms = terms_from(detail::json_field(j, "C_terms", "system"), "system.C_terms");
  const Json& iv = detail::json_field(j, "param_interval", "system");
  if (!iv.is_array() || iv.size() != 2)
    throw IoError("system.param_interval: expected [lo, hi]");
  sys.param_interval = {detail::json_number(iv[0], "param_interval"),
                        detail::json_number(iv[1], "param_interval")};
  sys.validate();
  return sys;
}

inline Json generator_to_json(const SignalGenerator& gen) {
  return Json{{"freqs", detail::json_from_vector(gen.freqs)},
              {"include_zero", gen.include_zero},
              {"L", detail::json_from_rowvector(gen.L)},
              {"omega0", detail::json_from_vector(gen.omega0)}};
}

inline SignalGenerator generator_from_json(const Json& j) {
  const Json& iz = detail::json_field(j, "include_zero", "generator");
  if (!iz.is_boolean()) throw IoError("generator.include_zero: expected a boolean");
  return from_frequencies(
      detail::vector_from_json(detail::json_field(j, "freqs", "generator"), "generator.freqs"),
      iz.get<bool>(),
      detail::rowvector_from_json(detail::json_field(j, "L", "generator"), "generator.L"),
      detail::vector_from_json(detail::json_field(j, "omega0", "generator"),
                               "generator.omega0"));
}

// ---------------------------------------------------------------------------
// series artifacts

inline Json series_to_json(const MomentSeries& ms) {
  Json coeffs = Json::array();
  for (const Matrix& c : ms.coeffs) coeffs.push_back(detail::json_from_matrix(c));
  return Json{{"p0", ms.p0},
              {"N", ms.order()},
              {"coeffs", std::move(coeffs)},
              {"generator", generator_to_json(ms.gen)}};
}

inline MomentSeries series_from_json(const Json& j) {
  MomentSeries ms;
  ms.p0 = detail::json_number(detail::json_field(j, "p0", "series"), "series.p0");
  ms.gen = generator_from_json(detail::json_field(j, "generator", "series"));
  const Json& coeffs = detail::json_field(j, "coeffs", "series");
  if (!coeffs.is_array() || coeffs.empty()) throw IoError("series.coeffs: expected terms");
  for (const Json& c : coeffs)
    ms.coeffs.push_back(detail::matrix_from_json(c, "series.coeffs"));
  return ms;
}

inline Json lyapunov_series_to_json(const LyapunovSeries& ls) {
  Json coeffs = Json::array();
  for (const Matrix& c : ls.coeffs) coeffs.push_back(detail::json_from_matrix(c));
  return Json{{"p0", ls.p0},
              {"coeffs", std::move(coeffs)},
              {"Q", detail::json_from_matrix(ls.Q)}};
}

inline LyapunovSeries lyapunov_series_from_json(const Json& j) {
  LyapunovSeries ls;
  ls.p0 = detail::json_number(detail::json_field(j, "p0", "lyapunov"), "lyapunov.p0");
  ls.Q = detail::matrix_from_json(detail::json_field(j, "Q", "lyapunov"), "lyapunov.Q");
  const Json& coeffs = detail::json_field(j, "coeffs", "lyapunov");
  if (!coeffs.is_array() || coeffs.empty()) throw IoError("lyapunov.coeffs: expected terms");
  for (const Json& c : coeffs)
    ls.coeffs.push_back(detail::matrix_from_json(c, "lyapunov.coeffs"));
  return ls;
}

// ---------------------------------------------------------------------------
// weight artifacts

inline Json basis_to_json(const BasisSet& basis) {
  switch (basis.kind()) {
    case BasisSet::Kind::Polynomial:
      return Json{{"kind", "polynomial"}, {"count", basis.count()}};
    case BasisSet::Kind::GaussianRbf:
      return Json{{"kind", "gaussian-rbf"},
                  {"centers", detail::json_from_vector(basis.centers())},
                  {"widths", detail::json_from_vector(basis.widths())}};
    case BasisSet::Kind::Fourier:
      return Json{{"kind", "fourier"}, {"period", basis.period()}, {"count", basis.count()}};
  }
  throw IoError("basis: unknown kind");
}

inline BasisSet basis_from_json(const Json& j) {
  const std::string kind = detail::json_field(j, "kind", "basis").get<std::string>();
  if (kind == "polynomial")
    return BasisSet::polynomial(static_cast<Index>(
        detail::json_number(detail::json_field(j, "count", "basis"), "basis.count")));
  if (kind == "gaussian-rbf")
    return BasisSet::gaussian_rbf(
        detail::vector_from_json(detail::json_field(j, "centers", "basis"), "basis.centers"),
        detail::vector_from_json(detail::json_field(j, "widths", "basis"), "basis.widths"));
  if (kind == "fourier")
    return BasisSet::fourier(
        detail::json_number(detail::json_field(j, "period", "basis"), "basis.period"),
        static_cast<Index>(
            detail::json_number(detail::json_field(j, "count", "basis"), "basis.count")));
  throw IoError("basis: unknown kind '" + kind + "'");
}

inline Json provenance_to_json(const DataProvenance& d) {
  return Json{{"window_start", d.window_start},
              {"window_end", d.window_end},
              {"K", d.K},
              {"h", d.h}};
}

inline DataProvenance provenance_from_json(const Json& j) {
  DataProvenance d;
  d.window_start =
      detail::json_number(detail::json_field(j, "window_start", "provenance"), "window_start");
  d.window_end =
      detail::json_number(detail::json_field(j, "window_end", "provenance"), "window_end");
  d.K = static_cast<Index>(detail::json_number(detail::json_field(j, "K", "provenance"), "K"));
  d.h = static_cast<Index>(detail::json_number(detail::json_field(j, "h", "provenance"), "h"));
  return d;
}

inline Json weights_to_json(const WeightMatrix& w) {
  Json j{{"gamma", detail::json_from_matrix(w.gamma)},
         {"basis", basis_to_json(w.basis)},
         {"param_interval", {w.param_interval[0], w.param_interval[1]}},
         {"data_driven", w.data_driven}};
  if (w.data) j["data"] = provenance_to_json(*w.data);
  if (w.ridge) j["ridge"] = detail::json_from_vector(*w.ridge);
  return j;
}

inline WeightMatrix weights_from_json(const Json& j) {
  WeightMatrix w;
  w.gamma = detail::matrix_from_json(detail::json_field(j, "gamma", "weights"),
                                     "weights.gamma");
  w.basis = basis_from_json(detail::json_field(j, "basis", "weights"));
  const Json& iv = detail::json_field(j, "param_interval", "weights");
  if (!iv.is_array() || iv.size() != 2)
    throw IoError("weights.param_interval: expected [lo, hi]");
  w.param_interval = {detail::json_number(iv[0], "param_interval"),
                      detail::json_number(iv[1], "param_interval")};
  const Json& dd = detail::json_field(j, "data_driven", "weights");
  if (!dd.is_boolean()) throw IoError("weights.data_driven: expected a boolean");
  w.data_driven = dd.get<bool>();
  if (j.contains("data")) w.data = provenance_from_json(j["data"]);
  if (j.contains("ridge")) w.ridge = detail::vector_from_json(j["ridge"], "weights.ridge");
  if (w.gamma.rows() != w.basis.count())
    throw IoError("weights: gamma rows do not match the basis count");
  return w;
}

inline Json nl_basis_to_json(const NonlinearBasisSet& basis) {
  if (basis.kind() == NonlinearBasisSet::Kind::ProductPolyState)
    return Json{{"kind", "product-poly-state"},
                {"poly_count", basis.poly_count()},
                {"joint_dim", basis.joint_dim()}};
  return Json{{"kind", "gaussian-rbf"},
              {"centers", detail::json_from_matrix(basis.centers())},
              {"widths", detail::json_from_vector(basis.widths())},
              {"standardization",
               Json{{"mean", detail::json_from_vector(basis.mean())},
                    {"scale", detail::json_from_vector(basis.scale())},
                    {"box_lo", detail::json_from_vector(basis.box_lo())},
                    {"box_hi", detail::json_from_vector(basis.box_hi())}}},
              {"seed", basis.seed()}};
}

inline NonlinearBasisSet nl_basis_from_json(const Json& j) {
  const std::string kind = detail::json_field(j, "kind", "nl_basis").get<std::string>();
  if (kind == "product-poly-state") {
    const Index pc = static_cast<Index>(detail::json_number(
        detail::json_field(j, "poly_count", "nl_basis"), "nl_basis.poly_count"));
    const Index dim = static_cast<Index>(detail::json_number(
        detail::json_field(j, "joint_dim", "nl_basis"), "nl_basis.joint_dim"));
    return NonlinearBasisSet::product_poly_state(pc, dim - 1);
  }
  if (kind == "gaussian-rbf") {
    const Json& st = detail::json_field(j, "standardization", "nl_basis");
    const Json& seed = detail::json_field(j, "seed", "nl_basis");
    if (!seed.is_number_unsigned()) throw IoError("nl_basis.seed: expected an unsigned integer");
    return NonlinearBasisSet::restore_gaussian_rbf(
        detail::matrix_from_json(detail::json_field(j, "centers", "nl_basis"), "centers"),
        detail::vector_from_json(detail::json_field(j, "widths", "nl_basis"), "widths"),
        detail::vector_from_json(detail::json_field(st, "mean", "nl_basis"), "mean"),
        detail::vector_from_json(detail::json_field(st, "scale", "nl_basis"), "scale"),
        detail::vector_from_json(detail::json_field(st, "box_lo", "nl_basis"), "box_lo"),
        detail::vector_from_json(detail::json_field(st, "box_hi", "nl_basis"), "box_hi"),
        seed.get<std::uint64_t>());
  }
  throw IoError("nl_basis: unknown kind '" + kind + "'");
}

inline Json nl_weights_to_json(const NonlinearWeightVector& w) {
  Json j{{"theta", detail::json_from_vector(w.theta)}, {"basis", nl_basis_to_json(w.basis)}};
  if (w.data) j["data"] = provenance_to_json(*w.data);
  return j;
}

inline NonlinearWeightVector nl_weights_from_json(const Json& j) {
  NonlinearWeightVector w;
  w.theta = detail::vector_from_json(detail::json_field(j, "theta", "nl_weights"),
                                     "nl_weights.theta");
  w.basis = nl_basis_from_json(detail::json_field(j, "basis", "nl_weights"));
  if (j.contains("data")) w.data = provenance_from_json(j["data"]);
  if (w.theta.size() != w.basis.count())
    throw IoError("nl_weights: theta length does not match the basis count");
  return w;
}

// ---------------------------------------------------------------------------
// reduced-model artifacts

// Data-level description of a reduced model. Exact and series moment maps and
// preserving gains need the full system (and a certificate series) on board;
// realize_rom rebuilds the closures from these parts.
struct RomSpec {
  SignalGenerator gen;
  std::array<double, 2> param_interval{0.0, 0.0};

  GainMap::Kind gain_kind = GainMap::Kind::Constant;
  Vector gain_value;
  double epsilon = defaults::gain_epsilon;
  std::optional<LyapunovSeries> x_series;

  MomentMap::Kind map_kind = MomentMap::Kind::Series;
  std::optional<MomentSeries> series;
  std::optional<WeightMatrix> weights;
  std::optional<ParametricLTI> system;
};

inline Json rom_to_json(const RomSpec& spec) {
  Json gain;
  switch (spec.gain_kind) {
    case GainMap::Kind::Constant:
      gain = Json{{"kind", "constant"}, {"value", detail::json_from_vector(spec.gain_value)}};
      break;
    case GainMap::Kind::Preserving:
      if (!spec.x_series)
        throw InvalidArgument("rom_to_json: a preserving gain needs a certificate series");
      gain = Json{{"kind", "preserving"},
                  {"epsilon", spec.epsilon},
                  {"x_series", lyapunov_series_to_json(*spec.x_series)}};
      break;
  }
  Json map;
  switch (spec.map_kind) {
    case MomentMap::Kind::Exact:
      map = Json{{"kind", "exact"}};
      break;
    case MomentMap::Kind::Series:
      if (!spec.series) throw InvalidArgument("rom_to_json: series map without series data");
      map = Json{{"kind", "series"}, {"series", series_to_json(*spec.series)}};
      break;
    case MomentMap::Kind::Basis:
      if (!spec.weights) throw InvalidArgument("rom_to_json: basis map without weights");
      map = Json{{"kind", "basis"}, {"weights", weights_to_json(*spec.weights)}};
      break;
  }
  Json j{{"generator", generator_to_json(spec.gen)},
         {"param_interval", {spec.param_interval[0], spec.param_interval[1]}},
         {"gain", std::move(gain)},
         {"moment_map", std::move(map)}};
  if (spec.system) j["system"] = system_to_json(*spec.system);
  return j;
}

inline RomSpec rom_from_json(const Json& j) {
  RomSpec spec;
  spec.gen = generator_from_json(detail::json_field(j, "generator", "rom"));
  const Json& iv = detail::json_field(j, "param_interval", "rom");
  if (!iv.is_array() || iv.size() != 2) throw IoError("rom.param_interval: expected [lo, hi]");
  spec.param_interval = {detail::json_number(iv[0], "param_interval"),
                         detail::json_number(iv[1], "param_interval")};
  if (j.contains("system")) spec.system = system_from_json(j["system"]);

  const Json& gain = detail::json_field(j, "gain", "rom");
  const std::string gkind = detail::json_field(gain, "kind", "rom.gain").get<std::string>();
  if (gkind == "constant") {
    spec.gain_kind = GainMap::Kind::Constant;
    spec.gain_value =
        detail::vector_from_json(detail::json_field(gain, "value", "rom.gain"), "gain.value");
  } else if (gkind == "preserving") {
    spec.gain_kind = GainMap::Kind::Preserving;
    spec.epsilon =
        detail::json_number(detail::json_field(gain, "epsilon", "rom.gain"), "gain.epsilon");
    spec.x_series = lyapunov_series_from_json(detail::json_field(gain, "x_series", "rom.gain"));
  } else {
    throw IoError("rom.gain: unknown kind '" + gkind + "'");
  }

  const Json& map = detail::json_field(j, "moment_map", "rom");
  const std::string mkind = detail::json_field(map, "kind", "rom.moment_map").get<std::string>();
  if (mkind == "exact") {
    spec.map_kind = MomentMap::Kind::Exact;
  } else if (mkind == "series") {
    spec.map_kind = MomentMap::Kind::Series;
    spec.series = series_from_json(detail::json_field(map, "series", "rom.moment_map"));
  } else if (mkind == "basis") {
    spec.map_kind = MomentMap::Kind::Basis;
    spec.weights = weights_from_json(detail::json_field(map, "weights", "rom.moment_map"));
  } else {
    throw IoError("rom.moment_map: unknown kind '" + mkind + "'");
  }
  return spec;
}

inline ReducedModel realize_rom(const RomSpec& spec) {
  MomentMap map = [&spec]() {
    switch (spec.map_kind) {
      case MomentMap::Kind::Exact:
        if (!spec.system)
          throw InvalidArgument("realize_rom: an exact map needs the full system");
        return MomentMap::exact(*spec.system, spec.gen);
      case MomentMap::Kind::Series:
        if (!spec.series || !spec.system)
          throw InvalidArgument("realize_rom: a series map needs the series and the system");
        return MomentMap::from_series(*spec.series, *spec.system);
      case MomentMap::Kind::Basis:
        if (!spec.weights) throw InvalidArgument("realize_rom: a basis map needs weights");
        return MomentMap::from_weights(*spec.weights);
    }
    throw InvalidArgument("realize_rom: unknown map kind");
  }();

  GainMap gain = [&spec, &map]() {
    if (spec.gain_kind == GainMap::Kind::Constant)
      return GainMap::constant(spec.gain_value, spec.gen);
    if (!spec.x_series || !spec.system)
      throw InvalidArgument(
          "realize_rom: a preserving gain needs a certificate series and the system");
    if (!map.has_pi())
      throw InvalidArgument("realize_rom: a preserving gain needs a full state map");
    const LyapunovSeries xs = *spec.x_series;
    const ParametricLTI sys = *spec.system;
    return GainMap::preserving([map](double p) { return map.pi(p); },
                               [xs](double p) { return eval_lyapunov_series(xs, p); },
                               [sys](double p) { return eval(sys, p).B; }, spec.epsilon);
  }();

  return assemble(spec.gen, gain, map, spec.param_interval, spec.system);
}

struct NlRomSpec {
  SignalGenerator gen;
  Vector delta;
  NonlinearWeightVector weights;
  double margin = 0.0;
};

inline Json nl_rom_to_json(const NlRomSpec& spec) {
  return Json{{"generator", generator_to_json(spec.gen)},
              {"delta", detail::json_from_vector(spec.delta)},
              {"weights", nl_weights_to_json(spec.weights)},
              {"margin", spec.margin}};
}

inline NlRomSpec nl_rom_from_json(const Json& j) {
  NlRomSpec spec;
  spec.gen = generator_from_json(detail::json_field(j, "generator", "nl_rom"));
  spec.delta =
      detail::vector_from_json(detail::json_field(j, "delta", "nl_rom"), "nl_rom.delta");
  spec.weights = nl_weights_from_json(detail::json_field(j, "weights", "nl_rom"));
  spec.margin = detail::json_number(detail::json_field(j, "margin", "nl_rom"), "nl_rom.margin");
  return spec;
}

inline NonlinearReducedModel realize_nl_rom(const NlRomSpec& spec) {
  return assemble_nonlinear_rom(spec.gen, spec.delta, spec.weights, spec.margin);
}

// ---------------------------------------------------------------------------
// trajectory CSV: t, x0..x{n-1}, y

inline void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  std::ostringstream os;
  os << "t";
  for (Index c = 0; c < traj.states.cols(); ++c) os << ",x" << c;
  os << ",y\n";
  for (Index k = 0; k < traj.times.size(); ++k) {
    os << detail::format_number(traj.times[k]);
    for (Index c = 0; c < traj.states.cols(); ++c)
      os << ',' << detail::format_number(traj.states(k, c));
    os << ',' << detail::format_number(traj.outputs[k]) << '\n';
  }
  write_text(path, os.str());
}

inline Trajectory read_trajectory(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty trajectory file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header.front() != "t" || header.back() != "y")
    throw IoError(path.string() + ": expected a t,x...,y header");
  const Index n = static_cast<Index>(header.size()) - 2;
  std::vector<double> times, outputs;
  std::vector<Vector> states;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (static_cast<Index>(cells.size()) != n + 2)
      throw IoError(path.string() + ": ragged trajectory row");
    times.push_back(detail::parse_number(cells.front(), "trajectory"));
    Vector x(n);
    for (Index c = 0; c < n; ++c) x[c] = detail::parse_number(cells[c + 1], "trajectory");
    states.push_back(std::move(x));
    outputs.push_back(detail::parse_number(cells.back(), "trajectory"));
  }
  Trajectory traj;
  traj.times = Eigen::Map<const Vector>(times.data(), static_cast<Index>(times.size()));
  traj.outputs = Eigen::Map<const Vector>(outputs.data(), static_cast<Index>(outputs.size()));
  traj.states.resize(static_cast<Index>(states.size()), n);
  for (Index k = 0; k < traj.states.rows(); ++k) traj.states.row(k) = states[k].transpose();
  return traj;
}

// ---------------------------------------------------------------------------
// snapshot dataset directory: omega.csv + y_<k>.csv + metadata.json
//
// All windows collected from one generator share the sample grid, so the
// exciter trajectory is stored once; the writer refuses datasets whose windows
// disagree.

struct DatasetArtifact {
  SnapshotDataset data;
  SignalGenerator gen;
};

inline void write_dataset(const std::filesystem::path& dir, const SnapshotDataset& ds,
                          const SignalGenerator& gen) {
  if (ds.windows.empty()) throw InvalidArgument("write_dataset: empty dataset");
  const SnapshotWindow& first = ds.windows.front();
  for (const auto& win : ds.windows) {
    if (win.times.size() != first.times.size() ||
        (win.times - first.times).cwiseAbs().maxCoeff() > 1e-12)
      throw InvalidArgument("write_dataset: windows must share one sample grid");
    if (win.omega.rows() != first.omega.rows() || win.omega.cols() != first.omega.cols() ||
        (win.omega - first.omega).cwiseAbs().maxCoeff() > 1e-12)
      throw InvalidArgument("write_dataset: windows must share the exciter trajectory");
  }
  std::filesystem::create_directories(dir);

  std::ostringstream om;
  om << "t";
  for (Index c = 0; c < first.omega.cols(); ++c) om << ",w" << c;
  om << '\n';
  for (Index k = 0; k < first.times.size(); ++k) {
    om << detail::format_number(first.times[k]);
    for (Index c = 0; c < first.omega.cols(); ++c)
      om << ',' << detail::format_number(first.omega(k, c));
    om << '\n';
  }
  write_text(dir / "omega.csv", om.str());

  Json params = Json::array();
  for (std::size_t k = 0; k < ds.windows.size(); ++k) {
    const SnapshotWindow& win = ds.windows[k];
    params.push_back(win.param);
    std::ostringstream ys;
    ys << "t,y\n";
    for (Index r = 0; r < win.times.size(); ++r)
      ys << detail::format_number(win.times[r]) << ','
         << detail::format_number(win.outputs[r]) << '\n';
    write_text(dir / ("y_" + std::to_string(k) + ".csv"), ys.str());
  }

  write_json(dir / "metadata.json",
             Json{{"params", std::move(params)},
                  {"times", detail::json_from_vector(first.times)},
                  {"noise",
                   Json{{"stddev", ds.noise.stddev},
                        {"seed", ds.noise.seed},
                        {"applied", ds.noise.applied}}},
                  {"generator", generator_to_json(gen)}});
}

inline DatasetArtifact read_dataset(const std::filesystem::path& dir) {
  const Json meta = read_json(dir / "metadata.json");
  DatasetArtifact art;
  art.gen = generator_from_json(detail::json_field(meta, "generator", "metadata"));
  const Vector times = detail::vector_from_json(
      detail::json_field(meta, "times", "metadata"), "metadata.times");
  const Json& noise = detail::json_field(meta, "noise", "metadata");
  art.data.noise.stddev = detail::json_number(detail::json_field(noise, "stddev", "noise"),
                                              "noise.stddev");
  art.data.noise.seed = static_cast<std::uint64_t>(
      detail::json_number(detail::json_field(noise, "seed", "noise"), "noise.seed"));
  const Json& applied = detail::json_field(noise, "applied", "noise");
  if (!applied.is_boolean()) throw IoError("metadata.noise.applied: expected a boolean");
  art.data.noise.applied = applied.get<bool>();

  std::istringstream om(read_text(dir / "omega.csv"));
  std::string line;
  if (!std::getline(om, line)) throw IoError("omega.csv: empty file");
  const Index nu = static_cast<Index>(detail::split_csv_line(line).size()) - 1;
  if (nu < 1) throw IoError("omega.csv: expected a t,w... header");
  Matrix omega(times.size(), nu);
  Index row = 0;
  while (std::getline(om, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (static_cast<Index>(cells.size()) != nu + 1 || row >= times.size())
      throw IoError("omega.csv: rows do not match metadata times");
    for (Index c = 0; c < nu; ++c)
      omega(row, c) = detail::parse_number(cells[c + 1], "omega.csv");
    ++row;
  }
  if (row != times.size()) throw IoError("omega.csv: rows do not match metadata times");

  const Json& params = detail::json_field(meta, "params", "metadata");
  if (!params.is_array() || params.empty()) throw IoError("metadata.params: expected values");
  for (std::size_t k = 0; k < params.size(); ++k) {
    SnapshotWindow win;
    win.param = detail::json_number(params[k], "metadata.params");
    win.times = times;
    win.omega = omega;
    win.outputs.resize(times.size());
    std::istringstream ys(read_text(dir / ("y_" + std::to_string(k) + ".csv")));
    if (!std::getline(ys, line)) throw IoError("y csv: empty file");
    Index r = 0;
    while (std::getline(ys, line)) {
      if (line.empty()) continue;
      const auto cells = detail::split_csv_line(line);
      if (cells.size() != 2 || r >= times.size())
        throw IoError("y csv: rows do not match metadata times");
      win.outputs[r] = detail::parse_number(cells[1], "y csv");
      ++r;
    }
    if (r != times.size()) throw IoError("y csv: rows do not match metadata times");
    art.data.windows.push_back(std::move(win));
  }
  return art;
}

// ---------------------------------------------------------------------------
// curve CSV with '#' metadata header lines

struct CurveDoc {
  std::string xname = "p";
  std::string yname = "value";
  Vector x;
  Vector y;
  std::vector<std::pair<std::string, std::string>> meta;
};

inline void write_curve(const std::filesystem::path& path, const CurveDoc& doc) {
  if (doc.x.size() != doc.y.size())
    throw DimensionMismatch("write_curve: x and y lengths differ");
  std::ostringstream os;
  for (const auto& [key, value] : doc.meta) os << "# " << key << ": " << value << '\n';
  os << doc.xname << ',' << doc.yname << '\n';
  for (Index k = 0; k < doc.x.size(); ++k)
    os << detail::format_number(doc.x[k]) << ',' << detail::format_number(doc.y[k]) << '\n';
  write_text(path, os.str());
}

inline CurveDoc read_curve(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  CurveDoc doc;
  std::string line;
  std::vector<double> xs, ys;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon == std::string::npos) throw IoError(path.string() + ": bad metadata line");
      doc.meta.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
      continue;
    }
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 2) throw IoError(path.string() + ": expected two columns");
    if (!saw_header) {
      doc.xname = cells[0];
      doc.yname = cells[1];
      saw_header = true;
      continue;
    }
    xs.push_back(detail::parse_number(cells[0], "curve"));
    ys.push_back(detail::parse_number(cells[1], "curve"));
  }
  if (!saw_header) throw IoError(path.string() + ": missing column header");
  doc.x = Eigen::Map<const Vector>(xs.data(), static_cast<Index>(xs.size()));
  doc.y = Eigen::Map<const Vector>(ys.data(), static_cast<Index>(ys.size()));
  return doc;
}

}  // namespace parmor
