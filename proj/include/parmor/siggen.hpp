#pragma once

// Signal generator (S, L, omega(0)) in real Jordan form: an optional scalar
// zero block followed by one 2x2 rotation block per positive frequency.
// Trajectories are evaluated in closed form so the estimator's input side
// carries no integration error.

#include <algorithm>
#include <cmath>
#include <vector>

#include "parmor/linalg.hpp"
#include "parmor/types.hpp"

namespace parmor {

struct SignalGenerator {
  Vector freqs;       // positive rotation frequencies, ascending (rad/s)
  bool include_zero = false;
  Matrix S;           // nu x nu
  RowVector L;        // 1 x nu
  Vector omega0;      // nu x 1
  Index nu = 0;

  // u(t) = L * omega(t)
  double input_at(const Vector& omega) const { return L.dot(omega); }
};

inline Vector log_grid(double lo_exp, double hi_exp, Index count) {
  if (count < 1) throw InvalidArgument("log_grid: count must be >= 1");
  if (count == 1) return Vector::Constant(1, std::pow(10.0, lo_exp));
  if (!(lo_exp < hi_exp)) throw InvalidArgument("log_grid: lo_exp must be < hi_exp");
  Vector out(count);
  for (Index j = 0; j < count; ++j)
    out[j] = std::pow(10.0, lo_exp + (hi_exp - lo_exp) * static_cast<double>(j) /
                                static_cast<double>(count - 1));
  return out;
}

// Builds the generator from distinct positive frequencies. L and omega(0)
// default to all ones, which keeps every block observable and excited; both
// conditions are re-verified per block because callers may override them.
// The per-block test is the PBH criterion evaluated in closed form: a rotation
// block is unobservable exactly when both of its L entries vanish (the Krylov
// rank test is numerically meaningless at nu ~ 100 with frequencies spanning
// three decades, where S^{nu-1} overflows the double range).
inline SignalGenerator from_frequencies(const Vector& freqs, bool include_zero,
                                        std::optional<RowVector> L_opt = std::nullopt,
                                        std::optional<Vector> omega0_opt = std::nullopt) {
  std::vector<double> fs(freqs.data(), freqs.data() + freqs.size());
  std::sort(fs.begin(), fs.end());
  for (double f : fs) {
    ensure_finite(f, "generator frequency");
    if (!(f > 0.0)) throw InvalidArgument("from_frequencies: frequencies must be positive");
  }
  for (size_t i = 1; i < fs.size(); ++i)
    if (fs[i] - fs[i - 1] <= 1e-12 * std::max(1.0, fs[i]))
      throw DuplicateFrequency("from_frequencies: frequencies must be distinct");
  const Index nu = 2 * static_cast<Index>(fs.size()) + (include_zero ? 1 : 0);
  if (nu == 0) throw InvalidArgument("from_frequencies: generator would be empty");

  SignalGenerator gen;
  gen.freqs = Eigen::Map<const Vector>(fs.data(), static_cast<Index>(fs.size()));
  gen.include_zero = include_zero;
  gen.nu = nu;
  gen.S = Matrix::Zero(nu, nu);
  Index off = include_zero ? 1 : 0;
  for (size_t b = 0; b < fs.size(); ++b) {
    gen.S(off + 2 * b, off + 2 * b + 1) = fs[b];
    gen.S(off + 2 * b + 1, off + 2 * b) = -fs[b];
  }
  gen.L = L_opt ? *L_opt : RowVector::Ones(nu);
  gen.omega0 = omega0_opt ? *omega0_opt : Vector::Ones(nu);
  if (gen.L.size() != nu || gen.omega0.size() != nu)
    throw DimensionMismatch("from_frequencies: L or omega0 has wrong length");
  ensure_finite(gen.L, "generator L");
  ensure_finite(gen.omega0, "generator omega0");

  auto block_norm = [&](const auto& v, Index b0, Index w) {
    double s = 0.0;
    for (Index i = 0; i < w; ++i) s += v[b0 + i] * v[b0 + i];
    return std::sqrt(s);
  };
  const double l_scale = std::max(1e-300, gen.L.cwiseAbs().maxCoeff());
  const double w_scale = std::max(1e-300, gen.omega0.cwiseAbs().maxCoeff());
  if (include_zero) {
    if (block_norm(gen.L, 0, 1) <= 1e-12 * l_scale)
      throw ObservabilityFailure("from_frequencies: zero block unobservable through L");
    if (block_norm(gen.omega0, 0, 1) <= 1e-12 * w_scale)
      throw ExcitabilityFailure("from_frequencies: zero block not excited by omega(0)");
  }
  for (size_t b = 0; b < fs.size(); ++b) {
    if (block_norm(gen.L, off + 2 * b, 2) <= 1e-12 * l_scale)
      throw ObservabilityFailure("from_frequencies: rotation block unobservable through L");
    if (block_norm(gen.omega0, off + 2 * b, 2) <= 1e-12 * w_scale)
      throw ExcitabilityFailure("from_frequencies: rotation block not excited by omega(0)");
  }
  return gen;
}

// omega(t) per block: the zero block is constant; a rotation block applies
// exp(S_b t) = [[cos wt, sin wt], [-sin wt, cos wt]] to its slice of omega(0).
inline Vector omega_at(const SignalGenerator& gen, double t) {
  ensure_finite(t, "trajectory time");
  Vector w(gen.nu);
  Index off = 0;
  if (gen.include_zero) {
    w[0] = gen.omega0[0];
    off = 1;
  }
  for (Index b = 0; b < gen.freqs.size(); ++b) {
    const double c = std::cos(gen.freqs[b] * t), s = std::sin(gen.freqs[b] * t);
    const double w1 = gen.omega0[off + 2 * b], w2 = gen.omega0[off + 2 * b + 1];
    w[off + 2 * b] = c * w1 + s * w2;
    w[off + 2 * b + 1] = -s * w1 + c * w2;
  }
  return w;
}

inline Matrix omega_trajectory(const SignalGenerator& gen, const Vector& times) {
  Matrix out(times.size(), gen.nu);
  for (Index k = 0; k < times.size(); ++k) out.row(k) = omega_at(gen, times[k]).transpose();
  return out;
}

// Krylov observability matrix [L; LS; ...; L S^{nu-1}]. Only meaningful for
// small nu; retained for tests of the rank invariants.
inline Matrix observability_matrix(const SignalGenerator& gen) {
  Matrix obs(gen.nu, gen.nu);
  RowVector row = gen.L;
  for (Index k = 0; k < gen.nu; ++k) {
    obs.row(k) = row;
    row = row * gen.S;
  }
  return obs;
}

inline Matrix excitability_matrix(const SignalGenerator& gen) {
  Matrix ex(gen.nu, gen.nu);
  Vector col = gen.omega0;
  for (Index k = 0; k < gen.nu; ++k) {
    ex.col(k) = col;
    col = gen.S * col;
  }
  return ex;
}

}  // namespace parmor
