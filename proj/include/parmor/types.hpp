#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "parmor/errors.hpp"

namespace parmor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;
using Index = Eigen::Index;

// Complex eigenvalue list with the queries the stability checks need.
struct Spectrum {
  CVector values;

  double max_real() const {
    double m = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < values.size(); ++i) m = std::max(m, values[i].real());
    return m;
  }

  double max_abs() const {
    double m = 0.0;
    for (Index i = 0; i < values.size(); ++i) m = std::max(m, std::abs(values[i]));
    return m;
  }

  // Smallest pairwise distance between this spectrum and another one.
  double separation_from(const Spectrum& other) const {
    double sep = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < values.size(); ++i)
      for (Index j = 0; j < other.values.size(); ++j)
        sep = std::min(sep, std::abs(values[i] - other.values[j]));
    return sep;
  }
};

namespace defaults {
// Relative spectral-separation floor below which Sylvester solves are refused.
inline constexpr double tol_spec = 1e-10;
// Relative singular-value cutoff for numerical rank decisions.
inline constexpr double rank_tol = 1e-10;
// Relative residual bound every successful Sylvester/Lyapunov solve must meet.
inline constexpr double residual_tol = 1e-8;
// Largest Kronecker system dimension (n*nu) the vectorized solver will build.
inline constexpr Index kron_limit = 4000;
// Tikhonov floor used by the dissipativity-preserving gain.
inline constexpr double gain_epsilon = 1e-14;
// PSD slack allowed when checking LMIs numerically.
inline constexpr double psd_tol = 1e-8;
}  // namespace defaults

inline void ensure_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NonFiniteValue(what + " contains a non-finite entry");
}

inline void ensure_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NonFiniteValue(what + " is not finite");
}

inline std::vector<double> linspace(double lo, double hi, Index count) {
  if (count < 1) return {};
  if (count == 1) return {lo};
  std::vector<double> v(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i)
    v[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  v.back() = hi;  // pin the endpoint against rounding
  return v;
}

}  // namespace parmor
