#pragma once

// Error metrics and frequency-response sweeps: relative moment-approximation
// curves over the parameter, Bode magnitude data, and a quadrature-based
// relative H2 error with a Gramian cross-check for small linear instances.

#include <cmath>
#include <vector>

#include "parmor/errors.hpp"
#include "parmor/linalg.hpp"
#include "parmor/moment_basis.hpp"
#include "parmor/moment_series.hpp"
#include "parmor/psys.hpp"
#include "parmor/rom.hpp"
#include "parmor/siggen.hpp"
#include "parmor/types.hpp"

namespace parmor {

// Many shifted solves against one real Schur factorization: W(s) = C(sI-A)^-1 B
// costs O(n^2) per shift after the O(n^3) setup. SISO only.
class FrequencyEvaluator {
 public:
  FrequencyEvaluator(const Matrix& a, const Matrix& b, const Matrix& c) {
    const Index n = a.rows();
    if (a.cols() != n || b.rows() != n || b.cols() != 1 || c.rows() != 1 || c.cols() != n)
      throw DimensionMismatch("FrequencyEvaluator: expected square A, n x 1 B, 1 x n C");
    ensure_finite(a, "FrequencyEvaluator A");
    Eigen::RealSchur<Matrix> schur(a);
    if (schur.info() != Eigen::Success)
      throw NumericalFailure("FrequencyEvaluator: Schur factorization failed");
    t_ = schur.matrixT();
    const Matrix& u = schur.matrixU();
    bt_ = (u.transpose() * b).col(0).cast<Complex>();
    cu_ = (c * u).row(0).cast<Complex>();
    poles_ = detail::quasi_tri_eigenvalues(t_);
    scale_ = std::max(1.0, t_.cwiseAbs().maxCoeff());
  }

  const Spectrum& poles() const { return poles_; }

  Complex at(Complex s) const {
    const Index n = t_.rows();
    CVector y = bt_;
    // Back-substitution on (sI - T) y = U^T B, by 1x1 / 2x2 diagonal blocks.
    Index i = n;
    while (i > 0) {
      const bool pair = i >= 2 && t_(i - 1, i - 2) != 0.0;
      if (pair) {
        const Index r = i - 2;
        const Complex t00 = s - t_(r, r), t01 = -t_(r, r + 1);
        const Complex t10 = -t_(r + 1, r), t11 = s - t_(r + 1, r + 1);
        const Complex det = t00 * t11 - t01 * t10;
        if (std::abs(det) < 1e-28 * scale_ * scale_)
          throw SingularShift("FrequencyEvaluator: shift on the spectrum");
        const Complex r0 = y[r], r1 = y[r + 1];
        y[r] = (t11 * r0 - t01 * r1) / det;
        y[r + 1] = (t00 * r1 - t10 * r0) / det;
        if (r > 0)
          y.head(r) += t_.block(0, r, r, 2).cast<Complex>() * y.segment(r, 2);
        i -= 2;
      } else {
        const Index r = i - 1;
        const Complex d = s - t_(r, r);
        if (std::abs(d) < 1e-14 * scale_)
          throw SingularShift("FrequencyEvaluator: shift on the spectrum");
        y[r] /= d;
        if (r > 0) y.head(r) += t_.block(0, r, r, 1).cast<Complex>() * y[r];
        i -= 1;
      }
    }
    Complex w(0.0, 0.0);
    for (Index j = 0; j < n; ++j) w += cu_[j] * y[j];
    return w;
  }

 private:
  Matrix t_;
  CVector bt_;
  CVector cu_;
  Spectrum poles_;
  double scale_ = 1.0;
};

struct ErrorCurve {
  std::vector<double> params;
  std::vector<double> errors;
};

// Relative gap between an approximate moment map and the exact steady-state
// output map, per grid parameter.
inline ErrorCurve moment_error_curve(const ParametricLTI& sys, const SignalGenerator& gen,
                                     const MomentMap& approx,
                                     const std::vector<double>& p_grid) {
  if (approx.nu() != gen.nu)
    throw DimensionMismatch("moment_error_curve: moment map and exciter order disagree");
  ErrorCurve curve;
  curve.params = p_grid;
  for (double p : p_grid) {
    const Realization r = eval(sys, p);
    const RowVector exact = r.C * solve_sylvester(r.A, gen.S, r.B * gen.L);
    const RowVector got = approx.cpi(p);
    curve.errors.push_back((got - exact).norm() /
                           std::max(defaults::rank_tol, exact.norm()));
  }
  return curve;
}

struct BodeCurve {
  Vector freqs;      // rad/s
  Vector magnitude;  // |W(i freq)|
};

inline BodeCurve bode_magnitude(const Matrix& a, const Matrix& b, const Matrix& c,
                                const Vector& freq_grid) {
  ensure_finite(freq_grid, "bode frequency grid");
  FrequencyEvaluator ev(a, b, c);
  BodeCurve curve;
  curve.freqs = freq_grid;
  curve.magnitude.resize(freq_grid.size());
  for (Index j = 0; j < freq_grid.size(); ++j)
    curve.magnitude[j] = std::abs(ev.at(Complex(0.0, freq_grid[j])));
  return curve;
}

inline BodeCurve bode_magnitude(const ParametricLTI& sys, double p, const Vector& freq_grid) {
  check_in_interval(sys, p, "bode_magnitude");
  const Realization r = eval(sys, p);
  return bode_magnitude(r.A, r.B, r.C, freq_grid);
}

inline BodeCurve bode_magnitude(const ReducedModel& model, double p, const Vector& freq_grid) {
  const RomRealization r = eval_rom(model, p);
  return bode_magnitude(r.F, Matrix(r.G), Matrix(r.H), freq_grid);
}

// H2 norm through the controllability Gramian: ||W||_2 = sqrt(C P C^T) with
// A P + P A^T = -B B^T. Dense Lyapunov solve, so only sensible for small n.
inline double h2_norm_gramian(const Matrix& a, const Matrix& b, const Matrix& c) {
  if (!is_hurwitz(a)) throw NotHurwitz("h2_norm_gramian: state matrix must be Hurwitz");
  const Matrix p = solve_lyapunov(a.transpose(), b * b.transpose());
  return std::sqrt(std::max(0.0, (c * p * c.transpose())(0, 0)));
}

namespace detail {

inline void check_quadrature_grid(const Vector& grid) {
  if (grid.size() < 2)
    throw InvalidArgument("h2_relative_error: frequency grid needs at least two points");
  for (Index j = 0; j < grid.size(); ++j) {
    if (!(grid[j] > 0.0) || (j > 0 && !(grid[j] > grid[j - 1])))
      throw InvalidArgument("h2_relative_error: grid must be positive and ascending");
  }
}

}  // namespace detail

// Relative H2 error sqrt(int |W - W_rom|^2 / int |W|^2) by trapezoidal
// quadrature on the given positive frequency grid. Both integrands are even
// in the frequency, so restricting to positive frequencies leaves the ratio
// unchanged.
inline double h2_relative_error(const Realization& full, const RomRealization& rom,
                                const Vector& freq_grid) {
  detail::check_quadrature_grid(freq_grid);
  const FrequencyEvaluator ev_full(full.A, full.B, full.C);
  const FrequencyEvaluator ev_rom(rom.F, Matrix(rom.G), Matrix(rom.H));
  if (ev_full.poles().max_real() >= 0.0)
    throw NotHurwitz("h2_relative_error: full model not asymptotically stable");
  if (ev_rom.poles().max_real() >= 0.0)
    throw NotHurwitz("h2_relative_error: reduced model not asymptotically stable");

  double num = 0.0, den = 0.0, prev_d2 = 0.0, prev_f2 = 0.0;
  for (Index j = 0; j < freq_grid.size(); ++j) {
    const Complex s(0.0, freq_grid[j]);
    const Complex wf = ev_full.at(s);
    const Complex wr = ev_rom.at(s);
    const double d2 = std::norm(wf - wr);
    const double f2 = std::norm(wf);
    if (j > 0) {
      const double dw = freq_grid[j] - freq_grid[j - 1];
      num += 0.5 * (prev_d2 + d2) * dw;
      den += 0.5 * (prev_f2 + f2) * dw;
    }
    prev_d2 = d2;
    prev_f2 = f2;
  }
  if (!(den > 0.0))
    throw NumericalFailure("h2_relative_error: full response vanishes on the grid");
  return std::sqrt(num / den);
}

inline double h2_relative_error(const ParametricLTI& sys, const ReducedModel& model, double p,
                                const Vector& freq_grid = log_grid(-1.0, 4.0, 1000)) {
  check_in_interval(sys, p, "h2_relative_error");
  return h2_relative_error(eval(sys, p), eval_rom(model, p), freq_grid);
}

// Gramian-route relative H2 error via the block-diagonal difference system;
// cross-checks the quadrature on instances small enough for dense Lyapunov.
inline double h2_relative_error_gramian(const Realization& full, const RomRealization& rom) {
  const Index n = full.A.rows(), nu = rom.F.rows();
  Matrix ae = Matrix::Zero(n + nu, n + nu);
  ae.topLeftCorner(n, n) = full.A;
  ae.bottomRightCorner(nu, nu) = rom.F;
  Matrix be(n + nu, 1);
  be.topRows(n) = full.B;
  be.bottomRows(nu) = rom.G;
  Matrix ce(1, n + nu);
  ce.leftCols(n) = full.C;
  ce.rightCols(nu) = -rom.H;
  return h2_norm_gramian(ae, be, ce) / h2_norm_gramian(full.A, full.B, full.C);
}

}  // namespace parmor
