#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "parmor/errors.hpp"
#include "parmor/linalg.hpp"
#include "parmor/psys.hpp"
#include "parmor/siggen.hpp"
#include "parmor/types.hpp"

namespace parmor {

// Coefficient tables of the plant matrices expanded in powers of (p - p0).
// Entry j of each list multiplies (p - p0)^j; entry 0 is the value at p0.
struct TaylorTables {
  double p0 = 0.0;
  std::vector<Matrix> A, B, C;
};

inline TaylorTables taylor_tables(const ParametricLTI& sys, double p0, Index order) {
  if (order < 0) throw InvalidArgument("taylor_tables: order must be nonnegative");
  TaylorTables tab;
  tab.p0 = p0;
  auto expand = [&](const std::vector<ParametricTerm>& terms, Index rows, Index cols) {
    std::vector<Matrix> out(static_cast<std::size_t>(order) + 1, Matrix::Zero(rows, cols));
    for (const ParametricTerm& term : terms) {
      const Vector c = term.fn.taylor(p0, order);
      for (Index j = 0; j <= order; ++j) {
        if (c[j] != 0.0) out[static_cast<std::size_t>(j)] += c[j] * term.mat;
      }
    }
    return out;
  };
  tab.A = expand(sys.A_terms, sys.n, sys.n);
  tab.B = expand(sys.B_terms, sys.n, 1);
  tab.C = expand(sys.C_terms, 1, sys.n);
  return tab;
}

// Truncated power series of the steady-state map around p0. Coefficient j
// multiplies (p - p0)^j; all coefficients share the plant-by-exciter shape.
struct MomentSeries {
  double p0 = 0.0;
  std::vector<Matrix> coeffs;
  SignalGenerator gen;

  Index order() const { return static_cast<Index>(coeffs.size()); }
};

// Power series of the quadratic stability certificate around p0.
struct LyapunovSeries {
  double p0 = 0.0;
  std::vector<Matrix> coeffs;
  Matrix Q;

  Index order() const { return static_cast<Index>(coeffs.size()); }
};

// Solves the cascade of Sylvester equations
//   Pi_0 S = A_0 Pi_0 + B_0 L,
//   Pi_j S = A_0 Pi_j + sum_{k=1..j} A_k Pi_{j-k} + B_j L,
// reusing one factorization of (A_0, S) for every order.
inline MomentSeries nested_sylvester(const ParametricLTI& sys, const SignalGenerator& gen,
                                     double p0, Index N) {
  if (N < 1) throw InvalidArgument("nested_sylvester: need at least one term");
  const TaylorTables tab = taylor_tables(sys, p0, N - 1);
  SylvesterSolver solver(tab.A[0], gen.S);
  MomentSeries ms;
  ms.p0 = p0;
  ms.gen = gen;
  ms.coeffs.reserve(static_cast<std::size_t>(N));
  for (Index j = 0; j < N; ++j) {
    Matrix f = tab.B[static_cast<std::size_t>(j)] * gen.L;
    for (Index k = 1; k <= j; ++k)
      f += tab.A[static_cast<std::size_t>(k)] * ms.coeffs[static_cast<std::size_t>(j - k)];
    ms.coeffs.push_back(solver.solve(f));
  }
  return ms;
}

// Solves the cascade of Lyapunov equations
//   A_0^T X_0 + X_0 A_0 = -Q,
//   A_0^T X_j + X_j A_0 = -sum_{k=1..j} (A_k^T X_{j-k} + X_{j-k} A_k).
inline LyapunovSeries nested_lyapunov(const ParametricLTI& sys, double p0, Index N,
                                      const Matrix& q) {
  if (N < 1) throw InvalidArgument("nested_lyapunov: need at least one term");
  if (q.rows() != sys.n || q.cols() != sys.n)
    throw DimensionMismatch("nested_lyapunov: Q has wrong shape");
  if ((q - q.transpose()).norm() > 1e-12 * std::max(1.0, q.norm()))
    throw InvalidArgument("nested_lyapunov: Q must be symmetric");
  if (min_eig_sym(q) <= 0.0)
    throw InvalidArgument("nested_lyapunov: Q must be positive definite");
  const TaylorTables tab = taylor_tables(sys, p0, N - 1);
  LyapunovSolver solver(tab.A[0]);
  LyapunovSeries ls;
  ls.p0 = p0;
  ls.Q = q;
  ls.coeffs.reserve(static_cast<std::size_t>(N));
  for (Index j = 0; j < N; ++j) {
    Matrix rhs;
    if (j == 0) {
      rhs = q;
    } else {
      rhs = Matrix::Zero(sys.n, sys.n);
      for (Index k = 1; k <= j; ++k) {
        const Matrix& ak = tab.A[static_cast<std::size_t>(k)];
        const Matrix& xk = ls.coeffs[static_cast<std::size_t>(j - k)];
        rhs += ak.transpose() * xk + xk * ak;
      }
      rhs = 0.5 * (rhs + rhs.transpose());
    }
    ls.coeffs.push_back(solver.solve(rhs));
  }
  return ls;
}

namespace detail {

inline Matrix horner(const std::vector<Matrix>& coeffs, double dp) {
  Matrix acc = coeffs.back();
  for (std::size_t j = coeffs.size() - 1; j-- > 0;) acc = coeffs[j] + dp * acc;
  return acc;
}

}  // namespace detail

// The series has no computed convergence radius; flag evaluations farther
// from the center than half the parameter interval's radius as untrusted.
inline bool series_outside_trust_region(double p0, double p,
                                        const std::array<double, 2>& interval) {
  return std::abs(p - p0) > 0.25 * (interval[1] - interval[0]);
}

inline Matrix eval_pi_series(const MomentSeries& ms, double p) {
  return detail::horner(ms.coeffs, p - ms.p0);
}

inline RowVector eval_moment_series(const MomentSeries& ms, const ParametricLTI& sys, double p,
                                    bool* trust_warning = nullptr) {
  check_in_interval(sys, p, "eval_moment_series");
  if (trust_warning != nullptr)
    *trust_warning = series_outside_trust_region(ms.p0, p, sys.param_interval);
  const Realization r = eval(sys, p);
  return r.C * eval_pi_series(ms, p);
}

inline Matrix eval_lyapunov_series(const LyapunovSeries& ls, double p) {
  Matrix x = detail::horner(ls.coeffs, p - ls.p0);
  return 0.5 * (x + x.transpose());
}

}  // namespace parmor
