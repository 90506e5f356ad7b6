#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "parmor/errors.hpp"
#include "parmor/linalg.hpp"
#include "parmor/moment_basis.hpp"
#include "parmor/moment_series.hpp"
#include "parmor/psys.hpp"
#include "parmor/siggen.hpp"
#include "parmor/types.hpp"

namespace parmor {

// Regularized projection gain (Pi^T X Pi + eps I)^{-1} Pi^T X B. With eps = 0
// a numerically singular Gram matrix is an error; with eps > 0 the solve is
// always defined. rank_warning, when supplied, flags a column-rank-deficient
// steady-state map without failing.
inline Vector preserving_gain(const Matrix& pi_p, const Matrix& x_p, const Matrix& b_p,
                              double epsilon, bool* rank_warning = nullptr) {
  const Index n = pi_p.rows(), nu = pi_p.cols();
  if (x_p.rows() != n || x_p.cols() != n || b_p.rows() != n || b_p.cols() != 1)
    throw DimensionMismatch("preserving_gain: operand shapes disagree");
  if ((x_p - x_p.transpose()).norm() > 1e-10 * std::max(1.0, x_p.norm()))
    throw InvalidArgument("preserving_gain: certificate must be symmetric");
  if (epsilon < 0.0) throw InvalidArgument("preserving_gain: epsilon must be nonnegative");
  if (rank_warning != nullptr) *rank_warning = numerical_rank(pi_p) < nu;

  Matrix gram = pi_p.transpose() * x_p * pi_p + epsilon * Matrix::Identity(nu, nu);
  if (epsilon == 0.0) {
    Eigen::FullPivLU<Matrix> lu(gram);
    lu.setThreshold(defaults::rank_tol);
    if (lu.rank() < nu)
      throw SingularGram("preserving_gain: Gram matrix is singular; use epsilon > 0");
    return lu.solve(pi_p.transpose() * x_p * b_p).col(0);
  }
  // LDLT, not a rank-revealing solver: a rank-truncated solve would discard the
  // tiny eigenvalues the regularizer was added to control and lose stability.
  return gram.ldlt().solve(pi_p.transpose() * x_p * b_p).col(0);
}

// Output-injection gain on the exciter pair. Plain constant choice: S is a
// rotation generator and (S, L) is observable, so feeding -c L^T L back makes
// every mode strictly decaying for any c > 0.
inline Vector stabilizing_constant_gain(const SignalGenerator& gen, double c = 1.0) {
  if (!(c > 0.0)) throw InvalidArgument("stabilizing_constant_gain: c must be positive");
  return c * gen.L.transpose();
}

namespace detail {

// Places sigma(S - g L) at the target multiset through the residue formula in
// the exciter eigenbasis: for diagonal Lambda and a rank-one update, matching
// residues of det(sI - Lambda + g l^T) / det(sI - Lambda) against the target
// characteristic ratio gives l_m g_m = prod_j (lam_m - mu_j) / prod_{j != m}
// (lam_m - lam_j). Exact for the rotation-form S, whose eigenstructure is
// known in closed form, and well conditioned when each target sits near its
// index-paired eigenvalue: the products are then grouped into O(1) ratios.
// Targets must form a conjugate-closed multiset ordered like the eigenvalues
// (zero block first, then [+i w_j, -i w_j] per frequency); the returned gain
// is real by that symmetry.
inline Vector place_on_eigenbasis(const SignalGenerator& gen,
                                  const std::vector<std::complex<double>>& mu) {
  using Cplx = std::complex<double>;
  const Index nu = gen.nu;
  std::vector<Cplx> lam(static_cast<std::size_t>(nu));
  std::vector<Cplx> ltil(static_cast<std::size_t>(nu));
  const Index off = gen.include_zero ? 1 : 0;
  if (gen.include_zero) {
    lam[0] = 0.0;
    ltil[0] = gen.L[0];
  }
  for (Index j = 0; j < gen.freqs.size(); ++j) {
    const Index m = off + 2 * j;
    lam[m] = Cplx(0.0, gen.freqs[j]);
    lam[m + 1] = Cplx(0.0, -gen.freqs[j]);
    // The L block [l1, l2] acts as l1 + i l2 on the +iw eigenvector.
    ltil[m] = Cplx(gen.L[m], gen.L[m + 1]);
    ltil[m + 1] = std::conj(ltil[m]);
  }
  const auto residue = [&](Index m) {
    if (std::abs(ltil[m]) < defaults::rank_tol)
      throw NumericalFailure("place_constant_gain: exciter pair too close to unobservable");
    Cplx acc = lam[m] - mu[m];
    for (Index i = 0; i < nu; ++i) {
      if (i == m) continue;
      acc *= (lam[m] - mu[i]) / (lam[m] - lam[i]);
    }
    return acc / ltil[m];
  };
  Vector g(nu);
  if (gen.include_zero) g[0] = residue(0).real();
  for (Index j = 0; j < gen.freqs.size(); ++j) {
    const Index m = off + 2 * j;
    const std::complex<double> gt = residue(m);
    g[m] = 2.0 * gt.real();
    g[m + 1] = -2.0 * gt.imag();
  }
  return g;
}

}  // namespace detail

// Places sigma(S - g L) at the given real targets, ordered like the exciter
// states (zero block first, then one target per rotation state).
inline Vector place_constant_gain(const SignalGenerator& gen, const Vector& targets) {
  if (targets.size() != gen.nu)
    throw DimensionMismatch("place_constant_gain: need one target per exciter state");
  std::vector<std::complex<double>> mu(static_cast<std::size_t>(gen.nu));
  for (Index i = 0; i < gen.nu; ++i) mu[static_cast<std::size_t>(i)] = targets[i];
  return detail::place_on_eigenbasis(gen, mu);
}

// Damped copies of the exciter spectrum: each rotation pair moves to
// -zeta w +/- i w, the zero block to -zeta times the slowest frequency. Keeps
// the closed exciter resonant at the interpolation frequencies while damping
// every mode on its own time scale.
inline Vector place_constant_gain(const SignalGenerator& gen, double zeta) {
  if (!(zeta > 0.0)) throw InvalidArgument("place_constant_gain: zeta must be positive");
  std::vector<std::complex<double>> mu(static_cast<std::size_t>(gen.nu));
  const double w_ref = gen.freqs.size() > 0 ? gen.freqs.minCoeff() : 1.0;
  const Index off = gen.include_zero ? 1 : 0;
  if (gen.include_zero) mu[0] = -zeta * w_ref;
  for (Index j = 0; j < gen.freqs.size(); ++j) {
    const double w = gen.freqs[j];
    mu[static_cast<std::size_t>(off + 2 * j)] = {-zeta * w, w};
    mu[static_cast<std::size_t>(off + 2 * j + 1)] = {-zeta * w, -w};
  }
  return detail::place_on_eigenbasis(gen, mu);
}

inline Vector place_constant_gain(const SignalGenerator& gen) {
  return place_constant_gain(gen, 0.3);
}

// Gain schedule G(p): either one constant vector, checked once against the
// exciter spectrum, or the certificate-preserving formula evaluated on demand.
class GainMap {
 public:
  enum class Kind { Constant, Preserving };

  using MatrixFn = std::function<Matrix(double)>;

  static GainMap constant(const Vector& g_bar, const SignalGenerator& gen) {
    if (g_bar.size() != gen.nu)
      throw DimensionMismatch("GainMap: gain length must equal exciter order");
    const Matrix f = gen.S - g_bar * gen.L;
    if (spectrum(f).separation_from(spectrum(gen.S)) < defaults::tol_spec)
      throw SpectrumOverlap("GainMap: closed exciter shares eigenvalues with the open one");
    GainMap g;
    g.kind_ = Kind::Constant;
    g.g_bar_ = g_bar;
    return g;
  }

  static GainMap preserving(MatrixFn pi_fn, MatrixFn x_fn, MatrixFn b_fn,
                            double epsilon = defaults::gain_epsilon) {
    if (epsilon < 0.0) throw InvalidArgument("GainMap: epsilon must be nonnegative");
    GainMap g;
    g.kind_ = Kind::Preserving;
    g.pi_ = std::move(pi_fn);
    g.x_ = std::move(x_fn);
    g.b_ = std::move(b_fn);
    g.epsilon_ = epsilon;
    return g;
  }

  Kind kind() const { return kind_; }
  double epsilon() const { return epsilon_; }

  const Vector& constant_value() const {
    if (kind_ != Kind::Constant) throw InvalidArgument("GainMap: not a constant gain");
    return g_bar_;
  }

  Vector at(double p) const {
    if (kind_ == Kind::Constant) return g_bar_;
    return preserving_gain(pi_(p), x_(p), b_(p), epsilon_);
  }

 private:
  GainMap() = default;

  Kind kind_ = Kind::Constant;
  Vector g_bar_;
  MatrixFn pi_, x_, b_;
  double epsilon_ = defaults::gain_epsilon;
};

// Parameter-to-moment map backing a reduced model: exact steady-state solves,
// a truncated power series, or a fitted basis expansion. Exact and series
// maps also expose the full map Pi(p); basis maps carry only its output row.
class MomentMap {
 public:
  enum class Kind { Exact, Series, Basis };

  static MomentMap exact(ParametricLTI sys, SignalGenerator gen) {
    MomentMap m;
    m.kind_ = Kind::Exact;
    m.nu_ = gen.nu;
    auto solve_pi = [sys, gen](double p) {
      const Realization r = eval(sys, p);
      return solve_sylvester(r.A, gen.S, r.B * gen.L);
    };
    m.pi_ = solve_pi;
    m.cpi_ = [sys, solve_pi](double p) -> RowVector {
      return eval(sys, p).C * solve_pi(p);
    };
    return m;
  }

  static MomentMap from_series(MomentSeries ms, ParametricLTI sys) {
    MomentMap m;
    m.kind_ = Kind::Series;
    m.nu_ = ms.gen.nu;
    m.pi_ = [ms](double p) { return eval_pi_series(ms, p); };
    m.cpi_ = [ms, sys](double p) -> RowVector { return eval_moment_series(ms, sys, p); };
    return m;
  }

  static MomentMap from_weights(WeightMatrix w) {
    MomentMap m;
    m.kind_ = Kind::Basis;
    m.nu_ = w.gamma.cols();
    m.cpi_ = [w](double p) -> RowVector { return eval_basis_moment(w, p); };
    return m;
  }

  Kind kind() const { return kind_; }
  Index nu() const { return nu_; }
  RowVector cpi(double p) const { return cpi_(p); }
  bool has_pi() const { return static_cast<bool>(pi_); }

  Matrix pi(double p) const {
    if (!pi_) throw InvalidArgument("MomentMap: this map does not expose the full state map");
    return pi_(p);
  }

 private:
  MomentMap() = default;

  Kind kind_ = Kind::Exact;
  Index nu_ = 0;
  std::function<RowVector(double)> cpi_;
  std::function<Matrix(double)> pi_;
};

struct ReducedModel {
  SignalGenerator gen;
  GainMap gain = GainMap::constant(Vector::Ones(1), from_frequencies(Vector(), true));
  MomentMap moment_map = MomentMap::exact(ParametricLTI{}, from_frequencies(Vector(), true));
  std::optional<ParametricLTI> system_ref;
  std::array<double, 2> param_interval{0.0, 0.0};
};

struct RomRealization {
  Matrix F;
  Vector G;
  RowVector H;
};

inline ReducedModel assemble(const SignalGenerator& gen, const GainMap& gain,
                             const MomentMap& moment_map,
                             const std::array<double, 2>& param_interval,
                             std::optional<ParametricLTI> system_ref = std::nullopt) {
  if (moment_map.nu() != gen.nu)
    throw DimensionMismatch("assemble: moment map and exciter order disagree");
  if (!(param_interval[1] > param_interval[0]))
    throw InvalidArgument("assemble: empty parameter interval");
  if (system_ref && gen.nu >= system_ref->n)
    throw InvalidArgument("assemble: reduced order must be below the full order");
  ReducedModel model;
  model.gen = gen;
  model.gain = gain;
  model.moment_map = moment_map;
  model.system_ref = std::move(system_ref);
  model.param_interval = param_interval;
  return model;
}

inline ReducedModel assemble(const SignalGenerator& gen, const GainMap& gain,
                             const MomentMap& moment_map, const ParametricLTI& sys) {
  return assemble(gen, gain, moment_map, sys.param_interval, sys);
}

inline RomRealization eval_rom(const ReducedModel& model, double p) {
  const double tol = 1e-12 * std::max(1.0, std::abs(model.param_interval[1]));
  if (p < model.param_interval[0] - tol || p > model.param_interval[1] + tol)
    throw ParameterOutOfRange("eval_rom: p outside the model's interval");
  RomRealization r;
  r.G = model.gain.at(p);
  r.F = model.gen.S - r.G * model.gen.L;
  r.H = model.moment_map.cpi(p);
  return r;
}

// Wraps the model frozen at p as a constant linear system, so the simulation
// and evaluation machinery applies unchanged.
inline ParametricLTI rom_to_lti(const ReducedModel& model, double p) {
  const RomRealization r = eval_rom(model, p);
  ParametricLTI sys;
  sys.n = model.gen.nu;
  sys.A_terms.push_back({CoefficientFunction::constant(1.0), r.F});
  sys.B_terms.push_back({CoefficientFunction::constant(1.0), r.G});
  sys.C_terms.push_back({CoefficientFunction::constant(1.0), r.H});
  sys.param_interval = model.param_interval;
  sys.validate();
  return sys;
}

// Interpolation abscissae of the exciter: 0 for the constant block, +/- i w
// for every rotation block.
inline std::vector<Complex> interpolation_points(const SignalGenerator& gen) {
  std::vector<Complex> pts;
  if (gen.include_zero) pts.emplace_back(0.0, 0.0);
  for (double f : gen.freqs) {
    pts.emplace_back(0.0, f);
    pts.emplace_back(0.0, -f);
  }
  return pts;
}

struct MomentMatchReport {
  double p = 0.0;
  // Distance of the reduced steady-state map from the identity; the reduced
  // model is built so this map is exactly I.
  double projector_deviation = 0.0;
  // Relative gap between the model's output map and the exact moment.
  double map_deviation = 0.0;
  double max_transfer_error = 0.0;
  bool exact_map = false;
  bool pass = false;
};

inline MomentMatchReport verify_moment_matching(const ReducedModel& model,
                                                const ParametricLTI& sys, double p,
                                                double tol = defaults::residual_tol) {
  const RomRealization rom = eval_rom(model, p);
  if (spectrum(rom.F).separation_from(spectrum(model.gen.S)) < defaults::tol_spec)
    throw SpectrumOverlap("verify_moment_matching: closed exciter not disjoint from S");

  // (S - GL) P + G L = P S; the unique solution is the identity.
  const Matrix proj = solve_sylvester(rom.F, model.gen.S, rom.G * model.gen.L);
  MomentMatchReport rep;
  rep.p = p;
  rep.exact_map = model.moment_map.kind() == MomentMap::Kind::Exact;
  rep.projector_deviation =
      (proj - Matrix::Identity(model.gen.nu, model.gen.nu)).norm();

  const Realization full = eval(sys, p);
  const Matrix pi = solve_sylvester(full.A, model.gen.S, full.B * model.gen.L);
  const RowVector cpi_exact = full.C * pi;
  rep.map_deviation = ((rom.H * proj) - cpi_exact).norm() /
                      std::max(defaults::rank_tol, cpi_exact.norm());

  for (const Complex& s : interpolation_points(model.gen)) {
    const Complex w_full = transfer(full.A, full.B, full.C, s);
    const Complex w_rom = transfer(rom.F, Matrix(rom.G), Matrix(rom.H), s);
    const double err = std::abs(w_rom - w_full) / (1.0 + std::abs(w_full));
    rep.max_transfer_error = std::max(rep.max_transfer_error, err);
  }
  rep.pass = !rep.exact_map || rep.max_transfer_error <= tol;
  return rep;
}

enum class PreservedProperty { Stability, Dissipativity };

struct PreservationSpec {
  PreservedProperty property = PreservedProperty::Stability;
  double margin = 0.0;                              // stability: require max Re <= -margin
  DissipativitySpec qsr = DissipativitySpec::passivity();  // dissipativity only
};

struct GridReport {
  std::vector<double> grid;
  // Stability: max real part of the closed exciter. Dissipativity: largest
  // eigenvalue of the reduced supply-rate matrix.
  std::vector<double> values;
  std::vector<bool> ok;
  bool pass = false;
  std::string note;
};

inline GridReport verify_preservation_grid(
    const ReducedModel& model, const PreservationSpec& spec, const std::vector<double>& grid,
    const std::function<Matrix(double)>& x_fn = nullptr) {
  GridReport rep;
  rep.grid = grid;
  rep.pass = true;
  for (double p : grid) {
    const RomRealization rom = eval_rom(model, p);
    double value = 0.0;
    bool ok = false;
    if (spec.property == PreservedProperty::Stability) {
      value = spectrum(rom.F).max_real();
      ok = value <= -spec.margin;
    } else {
      if (!x_fn) throw InvalidArgument("verify_preservation_grid: need a certificate");
      if (!model.moment_map.has_pi())
        throw InvalidArgument(
            "verify_preservation_grid: dissipativity needs the full steady-state map");
      const Matrix pi = model.moment_map.pi(p);
      const Matrix x_red = pi.transpose() * x_fn(p) * pi;
      const Matrix lmi =
          dissipativity_lmi(rom.F, Matrix(rom.G), Matrix(rom.H), x_red,
                            spec.qsr.Q_fn(p), spec.qsr.S_fn(p), spec.qsr.R_fn(p));
      value = max_eig_sym(lmi);
      ok = value <= defaults::psd_tol;
    }
    rep.values.push_back(value);
    rep.ok.push_back(ok);
    rep.pass = rep.pass && ok;
  }
  rep.note = "checked " + std::to_string(grid.size()) +
             " grid points; parameters between nodes are not certified";
  return rep;
}

}  // namespace parmor
