#pragma once

// Data-driven moment matching for nonlinear parametric plants: a closed term
// language for vector fields (linear part, monomials up to degree 3,
// saturation), Gaussian RBF regression of the steady-state output map over
// joint (omega, p) space, and reduced models whose dynamics stay linear while
// the output map carries the nonlinearity.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "parmor/coeff.hpp"
#include "parmor/errors.hpp"
#include "parmor/linalg.hpp"
#include "parmor/moment_basis.hpp"
#include "parmor/psys.hpp"
#include "parmor/siggen.hpp"
#include "parmor/sim.hpp"
#include "parmor/types.hpp"

namespace parmor {

// One additive term of a state or output equation: a parameter coefficient
// times a state monomial, the input, or tanh of one state. Every kind
// vanishes at (x, u) = 0, which keeps the origin an equilibrium by
// construction.
struct NlTerm {
  enum class Kind { Linear, Input, Monomial, Saturation };

  Kind kind = Kind::Linear;
  CoefficientFunction fn = CoefficientFunction::constant(1.0);
  std::vector<Index> vars;  // Linear/Saturation: one state; Monomial: two or three

  static NlTerm linear(Index j, CoefficientFunction f = CoefficientFunction::constant(1.0)) {
    return {Kind::Linear, std::move(f), {j}};
  }
  static NlTerm input(CoefficientFunction f = CoefficientFunction::constant(1.0)) {
    return {Kind::Input, std::move(f), {}};
  }
  static NlTerm monomial(std::vector<Index> js,
                         CoefficientFunction f = CoefficientFunction::constant(1.0)) {
    return {Kind::Monomial, std::move(f), std::move(js)};
  }
  static NlTerm saturation(Index j,
                           CoefficientFunction f = CoefficientFunction::constant(1.0)) {
    return {Kind::Saturation, std::move(f), {j}};
  }
};

namespace detail {

inline double eval_nl_term(const NlTerm& t, const Vector& x, double u, double p) {
  const double a = t.fn(p);
  switch (t.kind) {
    case NlTerm::Kind::Linear:
      return a * x[t.vars[0]];
    case NlTerm::Kind::Input:
      return a * u;
    case NlTerm::Kind::Monomial: {
      double prod = a;
      for (Index j : t.vars) prod *= x[j];
      return prod;
    }
    case NlTerm::Kind::Saturation:
      return a * std::tanh(x[t.vars[0]]);
  }
  throw NumericalFailure("unreachable term kind");
}

inline void check_nl_term(const NlTerm& t, Index n, const char* who) {
  const std::size_t arity = t.vars.size();
  const bool ok = (t.kind == NlTerm::Kind::Linear && arity == 1) ||
                  (t.kind == NlTerm::Kind::Input && arity == 0) ||
                  (t.kind == NlTerm::Kind::Monomial && arity >= 2 && arity <= 3) ||
                  (t.kind == NlTerm::Kind::Saturation && arity == 1);
  if (!ok)
    throw InvalidArgument(std::string(who) + ": term arity does not match its kind");
  for (Index j : t.vars)
    if (j < 0 || j >= n)
      throw InvalidArgument(std::string(who) + ": state index out of range");
}

}  // namespace detail

struct NonlinearParametricSystem {
  Index n = 0;
  std::vector<std::vector<NlTerm>> f_terms;  // one term list per state equation
  std::vector<NlTerm> h_terms;               // scalar output equation
  std::array<double, 2> param_interval{0.0, 1.0};

  void validate() const {
    if (n <= 0)
      throw InvalidArgument("NonlinearParametricSystem: state dimension must be positive");
    if (!(param_interval[0] < param_interval[1]))
      throw InvalidArgument("NonlinearParametricSystem: parameter interval must be nonempty");
    if (static_cast<Index>(f_terms.size()) != n)
      throw InvalidArgument("NonlinearParametricSystem: need one term list per state");
    for (const auto& row : f_terms)
      for (const NlTerm& t : row) detail::check_nl_term(t, n, "NonlinearParametricSystem f");
    for (const NlTerm& t : h_terms) {
      detail::check_nl_term(t, n, "NonlinearParametricSystem h");
      if (t.kind == NlTerm::Kind::Input)
        throw InvalidArgument("NonlinearParametricSystem: output may not feed the input through");
    }
    // The term language vanishes at the origin; evaluate anyway so the
    // equilibrium assumption is checked, not just assumed.
    const Vector zero = Vector::Zero(n);
    for (double p : linspace(param_interval[0], param_interval[1], 5)) {
      double fn = 0.0;
      for (const auto& row : f_terms)
        for (const NlTerm& t : row) fn += std::abs(detail::eval_nl_term(t, zero, 0.0, p));
      for (const NlTerm& t : h_terms) fn += std::abs(detail::eval_nl_term(t, zero, 0.0, p));
      if (fn != 0.0)
        throw InvalidArgument("NonlinearParametricSystem: origin is not an equilibrium");
    }
  }

  bool contains(double p) const {
    return p >= param_interval[0] && p <= param_interval[1];
  }
};

inline Vector nl_rhs(const NonlinearParametricSystem& sys, const Vector& x, double u,
                     double p) {
  Vector dx = Vector::Zero(sys.n);
  for (Index i = 0; i < sys.n; ++i)
    for (const NlTerm& t : sys.f_terms[static_cast<std::size_t>(i)])
      dx[i] += detail::eval_nl_term(t, x, u, p);
  return dx;
}

inline double nl_output(const NonlinearParametricSystem& sys, const Vector& x, double p) {
  double y = 0.0;
  for (const NlTerm& t : sys.h_terms) y += detail::eval_nl_term(t, x, 0.0, p);
  return y;
}

// Jacobian of f with respect to x at the origin: monomials of degree >= 2
// drop out, tanh contributes its unit slope.
inline Matrix linearization(const NonlinearParametricSystem& sys, double p) {
  Matrix jac = Matrix::Zero(sys.n, sys.n);
  for (Index i = 0; i < sys.n; ++i) {
    for (const NlTerm& t : sys.f_terms[static_cast<std::size_t>(i)]) {
      if (t.kind == NlTerm::Kind::Linear || t.kind == NlTerm::Kind::Saturation)
        jac(i, t.vars[0]) += t.fn(p);
    }
  }
  return jac;
}

inline StabilityReport check_local_stability(const NonlinearParametricSystem& sys,
                                             const std::vector<double>& grid,
                                             double margin = 0.0) {
  StabilityReport rep;
  rep.grid = grid;
  if (grid.empty()) {
    rep.warning = "empty grid: stability check is vacuous";
    return rep;
  }
  for (double p : grid) {
    if (!sys.contains(p))
      throw ParameterOutOfRange("check_local_stability: p outside parameter interval");
    const double mr = spectrum(linearization(sys, p)).max_real();
    rep.max_real.push_back(mr);
    if (!(mr <= -margin)) rep.pass = false;
  }
  return rep;
}

// Three cascaded Duffing oscillators with linear coupling; the output reads
// the last oscillator through a cubic. Local decay rate -1/4 at every p.
inline NonlinearParametricSystem make_nl_benchmark(
    std::array<double, 2> p_interval = {0.5, 2.0}) {
  const CoefficientFunction stiffness =
      CoefficientFunction::polynomial((Vector(2) << -1.0, -1.0).finished());
  NonlinearParametricSystem sys;
  sys.n = 6;
  sys.f_terms.resize(6);
  for (Index osc = 0; osc < 3; ++osc) {
    const Index pos = 2 * osc, vel = 2 * osc + 1;
    sys.f_terms[static_cast<std::size_t>(pos)].push_back(NlTerm::linear(vel));
    auto& row = sys.f_terms[static_cast<std::size_t>(vel)];
    row.push_back(NlTerm::linear(pos, stiffness));
    row.push_back(NlTerm::linear(vel, CoefficientFunction::constant(-0.5)));
    row.push_back(NlTerm::monomial({pos, pos, pos}, CoefficientFunction::constant(-0.3)));
    if (osc == 0)
      row.push_back(NlTerm::input());
    else
      row.push_back(NlTerm::linear(pos - 2));  // position of the previous oscillator
  }
  sys.h_terms.push_back(NlTerm::linear(4));
  sys.h_terms.push_back(NlTerm::monomial({4, 4, 4}, CoefficientFunction::constant(0.1)));
  sys.param_interval = p_interval;
  sys.validate();
  return sys;
}

inline Trajectory simulate_interconnection(const NonlinearParametricSystem& sys,
                                           const SignalGenerator& gen, double p,
                                           const std::optional<Vector>& x0_opt,
                                           const SimConfig& cfg) {
  cfg.validate();
  ensure_finite(p, "parameter value");
  if (!sys.contains(p))
    throw ParameterOutOfRange("simulate_interconnection: p outside parameter interval");
  if (cfg.method.value_or(StepMethod::Rk4) != StepMethod::Rk4)
    throw ConfigInvalid("simulate_interconnection: nonlinear plants integrate with rk4");
  Vector x0 = x0_opt.value_or(Vector::Zero(sys.n));
  if (x0.size() != sys.n)
    throw DimensionMismatch("simulate_interconnection: x0 has wrong length");
  Trajectory traj = integrate_rk4(
      [&](const Vector& x, double u) { return nl_rhs(sys, x, u, p); },
      [&](const Vector& x) { return nl_output(sys, x, p); }, gen, x0, cfg);
  traj.param = p;
  return traj;
}

// Regression basis over the joint (omega, p) space. The Gaussian kind samples
// centers from the per-coordinate box [2 min - max, 2 max - min] of the
// training data and evaluates kernels in standardized coordinates, so one
// width fits coordinates of very different scales. The product kind spans
// p^k * omega_l, which reproduces the linear pipeline inside the nonlinear
// one and is exact whenever the moment is polynomial in p.
class NonlinearBasisSet {
 public:
  enum class Kind { GaussianRbf, ProductPolyState };

  // samples: one raw joint vector (omega..., p) per row.
  static NonlinearBasisSet gaussian_rbf(const Matrix& samples, Index count,
                                        double width = 1.0, std::uint64_t seed = 1) {
    if (samples.rows() < 2 || samples.cols() < 2)
      throw InvalidArgument("NonlinearBasisSet: need at least two samples and coordinates");
    if (count < 1) throw InvalidArgument("NonlinearBasisSet: need at least one kernel");
    if (!(width > 0.0)) throw InvalidArgument("NonlinearBasisSet: width must be positive");
    ensure_finite(samples, "NonlinearBasisSet samples");

    NonlinearBasisSet b;
    b.kind_ = Kind::GaussianRbf;
    b.dim_ = samples.cols();
    b.seed_ = seed;
    b.widths_ = Vector::Constant(count, width);
    b.mean_ = samples.colwise().mean().transpose();
    b.scale_ = ((samples.rowwise() - b.mean_.transpose()).array().square().colwise().sum() /
                static_cast<double>(samples.rows()))
                   .sqrt()
                   .matrix()
                   .transpose();
    for (Index c = 0; c < b.dim_; ++c)
      if (b.scale_[c] < 1e-12) b.scale_[c] = 1.0;
    const Vector smin = samples.colwise().minCoeff().transpose();
    const Vector smax = samples.colwise().maxCoeff().transpose();
    b.box_lo_ = 2.0 * smin - smax;
    b.box_hi_ = 2.0 * smax - smin;

    std::mt19937_64 eng(seed);
    b.centers_.resize(count, b.dim_);
    for (Index j = 0; j < count; ++j) {
      for (Index c = 0; c < b.dim_; ++c) {
        const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
        const double raw = b.box_lo_[c] + u * (b.box_hi_[c] - b.box_lo_[c]);
        b.centers_(j, c) = (raw - b.mean_[c]) / b.scale_[c];
      }
    }
    return b;
  }

  // Rebuilds a kernel basis from previously exported fields; centers are taken
  // verbatim (already standardized), no new sampling happens.
  static NonlinearBasisSet restore_gaussian_rbf(Matrix centers, Vector widths, Vector mean,
                                                Vector scale, Vector box_lo, Vector box_hi,
                                                std::uint64_t seed) {
    const Index dim = centers.cols();
    if (centers.rows() < 1 || dim < 2)
      throw InvalidArgument("NonlinearBasisSet: restored basis needs kernels and a joint dim");
    if (widths.size() != centers.rows() || (widths.array() <= 0.0).any())
      throw InvalidArgument("NonlinearBasisSet: one positive width per kernel");
    if (mean.size() != dim || scale.size() != dim || box_lo.size() != dim ||
        box_hi.size() != dim)
      throw DimensionMismatch("NonlinearBasisSet: standardization fields must match dim");
    if ((scale.array() <= 0.0).any())
      throw InvalidArgument("NonlinearBasisSet: scales must be positive");
    NonlinearBasisSet b;
    b.kind_ = Kind::GaussianRbf;
    b.dim_ = dim;
    b.seed_ = seed;
    b.centers_ = std::move(centers);
    b.widths_ = std::move(widths);
    b.mean_ = std::move(mean);
    b.scale_ = std::move(scale);
    b.box_lo_ = std::move(box_lo);
    b.box_hi_ = std::move(box_hi);
    return b;
  }

  static NonlinearBasisSet product_poly_state(Index poly_count, Index nu) {
    if (poly_count < 1 || nu < 1)
      throw InvalidArgument("NonlinearBasisSet: need positive polynomial and state counts");
    NonlinearBasisSet b;
    b.kind_ = Kind::ProductPolyState;
    b.dim_ = nu + 1;
    b.poly_count_ = poly_count;
    return b;
  }

  Kind kind() const { return kind_; }
  Index joint_dim() const { return dim_; }

  Index count() const {
    return kind_ == Kind::GaussianRbf ? centers_.rows() : poly_count_ * (dim_ - 1);
  }

  RowVector eval(const Vector& omega, double p) const {
    if (omega.size() != dim_ - 1)
      throw DimensionMismatch("NonlinearBasisSet: omega has wrong length");
    if (kind_ == Kind::ProductPolyState) {
      RowVector row(count());
      double pk = 1.0;
      for (Index k = 0; k < poly_count_; ++k) {
        for (Index l = 0; l < dim_ - 1; ++l) row[k * (dim_ - 1) + l] = pk * omega[l];
        pk *= p;
      }
      return row;
    }
    Vector z(dim_);
    for (Index c = 0; c < dim_ - 1; ++c) z[c] = (omega[c] - mean_[c]) / scale_[c];
    z[dim_ - 1] = (p - mean_[dim_ - 1]) / scale_[dim_ - 1];
    RowVector row(centers_.rows());
    for (Index j = 0; j < centers_.rows(); ++j) {
      const double d2 = (z.transpose() - centers_.row(j)).squaredNorm();
      row[j] = std::exp(-d2 / (2.0 * widths_[j] * widths_[j]));
    }
    return row;
  }

  // Trust region: the raw sampling box the kernels were laid out in. The
  // product kind has no box and accepts everything.
  bool in_sampling_box(const Vector& omega, double p) const {
    if (kind_ == Kind::ProductPolyState) return true;
    if (omega.size() != dim_ - 1)
      throw DimensionMismatch("NonlinearBasisSet: omega has wrong length");
    const double tol = 1e-9;
    for (Index c = 0; c < dim_ - 1; ++c) {
      const double span = box_hi_[c] - box_lo_[c];
      if (omega[c] < box_lo_[c] - tol * span || omega[c] > box_hi_[c] + tol * span)
        return false;
    }
    const double span = box_hi_[dim_ - 1] - box_lo_[dim_ - 1];
    return p >= box_lo_[dim_ - 1] - tol * span && p <= box_hi_[dim_ - 1] + tol * span;
  }

  const Matrix& centers() const { return centers_; }  // standardized coordinates
  const Vector& widths() const { return widths_; }
  const Vector& mean() const { return mean_; }
  const Vector& scale() const { return scale_; }
  const Vector& box_lo() const { return box_lo_; }
  const Vector& box_hi() const { return box_hi_; }
  std::uint64_t seed() const { return seed_; }
  Index poly_count() const { return poly_count_; }

 private:
  NonlinearBasisSet() = default;

  Kind kind_ = Kind::GaussianRbf;
  Index dim_ = 0;
  Index poly_count_ = 0;
  Matrix centers_;
  Vector widths_;
  Vector mean_, scale_, box_lo_, box_hi_;
  std::uint64_t seed_ = 0;
};

struct NonlinearWeightVector {
  Vector theta;
  NonlinearBasisSet basis = NonlinearBasisSet::product_poly_state(1, 1);
  std::optional<DataProvenance> data;
};

inline NonlinearWeightVector fit_nonlinear_moment(
    const SnapshotDataset& data, const NonlinearBasisSet& basis,
    const std::optional<Vector>& ridge = std::nullopt) {
  if (data.windows.empty()) throw InvalidArgument("fit_nonlinear_moment: empty dataset");
  const Index big_k = static_cast<Index>(data.windows.size());
  const Index h = data.windows.front().outputs.size();
  const Index nu = data.windows.front().omega.cols();
  if (basis.joint_dim() != nu + 1)
    throw DimensionMismatch("fit_nonlinear_moment: basis joint dimension must be nu + 1");
  if (h < nu)
    throw WindowTooShort("fit_nonlinear_moment: need at least nu samples per window");
  const Index n_basis = basis.count();
  if (h * big_k < n_basis)
    throw RankDeficient("fit_nonlinear_moment: fewer samples than basis functions");

  Matrix rows(h * big_k, n_basis);
  Vector targets(h * big_k);
  for (Index k = 0; k < big_k; ++k) {
    const SnapshotWindow& win = data.windows[static_cast<std::size_t>(k)];
    if (win.outputs.size() != h || win.omega.rows() != h || win.omega.cols() != nu)
      throw DimensionMismatch("fit_nonlinear_moment: windows have inconsistent shapes");
    for (Index j = 0; j < h; ++j) {
      rows.row(k * h + j) = basis.eval(win.omega.row(j).transpose(), win.param);
      targets[k * h + j] = win.outputs[j];
    }
  }

  NonlinearWeightVector w;
  w.theta = least_squares(rows, targets, ridge).col(0);
  w.basis = basis;
  w.data = DataProvenance{data.windows.front().times[0],
                          data.windows.front().times[h - 1], big_k, h};
  return w;
}

// box_warning, when supplied, flags evaluation outside the kernel sampling
// box; the regression extrapolates there with no accuracy claim.
inline double eval_nonlinear_moment(const NonlinearWeightVector& w, const Vector& omega,
                                    double p, bool* box_warning = nullptr) {
  if (box_warning != nullptr) *box_warning = !w.basis.in_sampling_box(omega, p);
  return (w.basis.eval(omega, p) * w.theta)(0, 0);
}

// Reduced model xi' = (S - delta L) xi + delta u with the fitted nonlinear
// output psi = kappa(xi, p). The dynamics stay linear; only the output map
// carries the nonlinearity.
struct NonlinearReducedModel {
  SignalGenerator gen;
  Vector delta;
  NonlinearWeightVector weights;
};

inline NonlinearReducedModel assemble_nonlinear_rom(const SignalGenerator& gen,
                                                    const Vector& delta,
                                                    NonlinearWeightVector weights,
                                                    double margin = 0.0) {
  if (delta.size() != gen.nu)
    throw DimensionMismatch("assemble_nonlinear_rom: delta length must equal exciter order");
  if (weights.basis.joint_dim() != gen.nu + 1)
    throw DimensionMismatch("assemble_nonlinear_rom: weights fitted for a different order");
  if (!(spectrum(gen.S - delta * gen.L).max_real() < -margin))
    throw NotHurwitz("assemble_nonlinear_rom: S - delta L must be Hurwitz");
  return {gen, delta, std::move(weights)};
}

inline Trajectory simulate_interconnection(const NonlinearReducedModel& model, double p,
                                           const std::optional<Vector>& xi0,
                                           const SimConfig& cfg) {
  // The state equation is exactly linear, so the exact stepper applies; the
  // nonlinear output map is applied to the recorded states afterwards.
  ParametricLTI wrap;
  wrap.n = model.gen.nu;
  wrap.A_terms.push_back(
      {CoefficientFunction::constant(1.0), model.gen.S - model.delta * model.gen.L});
  wrap.B_terms.push_back({CoefficientFunction::constant(1.0), model.delta});
  wrap.C_terms.push_back(
      {CoefficientFunction::constant(1.0), RowVector::Zero(model.gen.nu)});
  wrap.param_interval = {p - 1.0, p + 1.0};
  wrap.validate();
  Trajectory traj = simulate_interconnection(wrap, model.gen, p, xi0, cfg);
  traj.param = p;
  for (Index k = 0; k < traj.outputs.size(); ++k)
    traj.outputs[k] =
        eval_nonlinear_moment(model.weights, traj.states.row(k).transpose(), p);
  return traj;
}

}  // namespace parmor
