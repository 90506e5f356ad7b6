#pragma once

// Affine-parametric SISO LTI systems A(p) = A0 + sum_i f_i(p) A_i (same form
// for B, C), transfer evaluation, the synthetic oscillator-chain benchmark,
// and quadratic supply rates for dissipativity checks.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "parmor/coeff.hpp"
#include "parmor/linalg.hpp"
#include "parmor/types.hpp"

namespace parmor {

struct ParametricTerm {
  CoefficientFunction fn;
  Matrix mat;
};

struct ParametricLTI {
  Index n = 0;
  std::vector<ParametricTerm> A_terms;
  std::vector<ParametricTerm> B_terms;  // matrices n x 1
  std::vector<ParametricTerm> C_terms;  // matrices 1 x n
  std::array<double, 2> param_interval{0.0, 1.0};

  void validate() const {
    if (n <= 0) throw InvalidArgument("ParametricLTI: state dimension must be positive");
    if (!(param_interval[0] < param_interval[1]))
      throw InvalidArgument("ParametricLTI: parameter interval must be nonempty");
    if (A_terms.empty() || B_terms.empty() || C_terms.empty())
      throw InvalidArgument("ParametricLTI: A, B, C each need at least one term");
    if (!A_terms.front().fn.is_constant() || !B_terms.front().fn.is_constant() ||
        !C_terms.front().fn.is_constant())
      throw InvalidArgument("ParametricLTI: leading term of each list must be constant");
    auto check = [&](const std::vector<ParametricTerm>& terms, Index rows, Index cols,
                     const char* who) {
      for (const auto& t : terms) {
        if (t.mat.rows() != rows || t.mat.cols() != cols)
          throw DimensionMismatch(std::string("ParametricLTI: ") + who +
                                  " term has wrong shape");
        ensure_finite(t.mat, who);
      }
    };
    check(A_terms, n, n, "A");
    check(B_terms, n, 1, "B");
    check(C_terms, 1, n, "C");
  }

  bool contains(double p) const {
    return p >= param_interval[0] && p <= param_interval[1];
  }
};

namespace detail {
inline Matrix eval_terms(const std::vector<ParametricTerm>& terms, double p) {
  Matrix acc = terms.front().fn(p) * terms.front().mat;
  for (size_t i = 1; i < terms.size(); ++i) acc += terms[i].fn(p) * terms[i].mat;
  return acc;
}
}  // namespace detail

struct Realization {
  Matrix A;  // n x n
  Matrix B;  // n x 1
  Matrix C;  // 1 x n
};

inline void check_in_interval(const ParametricLTI& sys, double p, const char* who) {
  ensure_finite(p, "parameter value");
  if (!sys.contains(p)) {
    std::ostringstream msg;
    msg << who << ": p = " << p << " outside parameter interval [" << sys.param_interval[0]
        << ", " << sys.param_interval[1] << "]";
    throw ParameterOutOfRange(msg.str());
  }
}

inline Realization eval(const ParametricLTI& sys, double p) {
  check_in_interval(sys, p, "eval");
  return Realization{detail::eval_terms(sys.A_terms, p), detail::eval_terms(sys.B_terms, p),
                     detail::eval_terms(sys.C_terms, p)};
}

// W(s, p) = C(p) (sI - A(p))^{-1} B(p) via one linear solve.
inline Complex transfer(const Matrix& a, const Matrix& b, const Matrix& c, Complex s) {
  const Index n = a.rows();
  CMatrix shifted = -a.cast<Complex>();
  shifted.diagonal().array() += s;
  CVector rhs = b.col(0).cast<Complex>();
  Eigen::PartialPivLU<CMatrix> lu(shifted);
  CVector x = lu.solve(rhs);
  const double resid = (shifted * x - rhs).norm();
  if (!(resid <= 1e-8 * (1.0 + rhs.norm()) * std::max(1.0, shifted.norm())))
    throw SingularShift("transfer: shift is numerically on the spectrum of A");
  Complex w = 0.0;
  for (Index i = 0; i < n; ++i) w += c(0, i) * x[i];
  return w;
}

inline Complex transfer(const ParametricLTI& sys, double p, Complex s) {
  check_in_interval(sys, p, "transfer");
  Realization r = eval(sys, p);
  return transfer(r.A, r.B, r.C, s);
}

// Oscillator-chain benchmark: k parametric 2x2 blocks
//   A_i(p) = [[p*a_i, b_i], [-b_i, p*a_i]],  B_i = (2,0)^T,  C_i = (1,0),
// a_i equidistant on a_range, b_i equidistant on b_range (k=1 takes the range
// starts). Eigenvalues are p*a_i +- i*b_i, Hurwitz for p > 0.
inline ParametricLTI make_benchmark(Index k, std::array<double, 2> a_range = {-1e3, -10.0},
                                    std::array<double, 2> b_range = {10.0, 1e3},
                                    std::array<double, 2> param_interval = {0.1, 1.0}) {
  if (k < 1) throw InvalidArgument("make_benchmark: k must be >= 1");
  const Index n = 2 * k;
  Matrix a0 = Matrix::Zero(n, n), a1 = Matrix::Zero(n, n);
  Matrix b = Matrix::Zero(n, 1), c = Matrix::Zero(1, n);
  for (Index i = 0; i < k; ++i) {
    const double t = (k == 1) ? 0.0 : static_cast<double>(i) / static_cast<double>(k - 1);
    const double ai = a_range[0] + t * (a_range[1] - a_range[0]);
    const double bi = b_range[0] + t * (b_range[1] - b_range[0]);
    a0(2 * i, 2 * i + 1) = bi;
    a0(2 * i + 1, 2 * i) = -bi;
    a1(2 * i, 2 * i) = ai;
    a1(2 * i + 1, 2 * i + 1) = ai;
    b(2 * i, 0) = 2.0;
    c(0, 2 * i) = 1.0;
  }
  ParametricLTI sys;
  sys.n = n;
  sys.A_terms.push_back({CoefficientFunction::constant(1.0), std::move(a0)});
  sys.A_terms.push_back({CoefficientFunction::polynomial((Vector(2) << 0.0, 1.0).finished()),
                         std::move(a1)});
  sys.B_terms.push_back({CoefficientFunction::constant(1.0), std::move(b)});
  sys.C_terms.push_back({CoefficientFunction::constant(1.0), std::move(c)});
  sys.param_interval = param_interval;
  sys.validate();
  return sys;
}

struct StabilityReport {
  std::vector<double> grid;
  std::vector<double> max_real;  // per grid point
  bool pass = true;
  std::string warning;
};

inline StabilityReport check_stability_grid(const ParametricLTI& sys,
                                            const std::vector<double>& grid,
                                            double margin = 0.0) {
  StabilityReport rep;
  rep.grid = grid;
  if (grid.empty()) {
    rep.warning = "empty grid: stability check is vacuous";
    return rep;
  }
  for (double p : grid) {
    check_in_interval(sys, p, "check_stability_grid");
    const double mr = spectrum(detail::eval_terms(sys.A_terms, p)).max_real();
    rep.max_real.push_back(mr);
    if (!(mr <= -margin)) rep.pass = false;
  }
  return rep;
}

// Quadratic supply rate s(u, y, p) = y*Q(p)*y + 2*u*S(p)*y + u*R(p)*u (SISO).
struct DissipativitySpec {
  CoefficientFunction Q_fn = CoefficientFunction::constant(0.0);
  CoefficientFunction S_fn = CoefficientFunction::constant(0.0);
  CoefficientFunction R_fn = CoefficientFunction::constant(0.0);

  static DissipativitySpec passivity() {
    return DissipativitySpec{CoefficientFunction::constant(0.0),
                             CoefficientFunction::constant(0.5),
                             CoefficientFunction::constant(0.0)};
  }
};

// Dissipation LMI block matrix for a realization (A, B, C) and certificate X:
//   [[A^T X + X A - C^T Q C,  X B - C^T S],
//    [(X B - C^T S)^T,        -R          ]]
// The closed-loop system is dissipative w.r.t. the supply rate iff this is
// negative semidefinite for some X > 0.
inline Matrix dissipativity_lmi(const Matrix& a, const Matrix& b, const Matrix& c,
                                const Matrix& x, double q, double s, double r) {
  const Index n = a.rows();
  Matrix m = Matrix::Zero(n + 1, n + 1);
  m.topLeftCorner(n, n) = a.transpose() * x + x * a - c.transpose() * q * c;
  m.block(0, n, n, 1) = x * b - c.transpose() * s;
  m.block(n, 0, 1, n) = m.block(0, n, n, 1).transpose();
  m(n, n) = -r;
  return m;
}

}  // namespace parmor
