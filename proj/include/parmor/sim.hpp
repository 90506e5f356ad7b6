#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "parmor/errors.hpp"
#include "parmor/linalg.hpp"
#include "parmor/psys.hpp"
#include "parmor/siggen.hpp"
#include "parmor/types.hpp"

namespace parmor {

enum class StepMethod { Rk4, ExpmLTI };

// Integration runs from t = 0 with the given initial state; recording starts
// at t_start. The split lets snapshot experiments place their sample grid
// exactly on integration nodes instead of interpolating a fast signal.
struct SimConfig {
  double dt = 1e-3;
  double t_start = 0.0;
  double t_end = 1.0;
  // Unset selects the exact stepper for linear systems and rk4 otherwise.
  std::optional<StepMethod> method;
  Index record_stride = 1;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt))
      throw ConfigInvalid("SimConfig: dt must be positive and finite");
    if (!(t_start >= 0.0) || !std::isfinite(t_start))
      throw ConfigInvalid("SimConfig: t_start must be nonnegative");
    if (!(t_end >= t_start + dt))
      throw ConfigInvalid("SimConfig: t_end must be at least one step after t_start");
    if (record_stride < 1)
      throw ConfigInvalid("SimConfig: record_stride must be >= 1");
  }
};

struct Trajectory {
  Vector times;
  Matrix states;  // one row per recorded sample
  Vector outputs;
  double param = 0.0;
};

struct SnapshotWindow {
  Vector times;
  Matrix omega;  // h x nu, exciter state at the sample times
  Vector outputs;
  double param = 0.0;
};

struct NoiseMeta {
  double stddev = 0.0;
  std::uint64_t seed = 0;
  bool applied = false;
};

struct SnapshotDataset {
  std::vector<SnapshotWindow> windows;
  NoiseMeta noise;
};

namespace detail {

// The recording grid divides [t_start, t_end] into n_steps equal steps; dt is
// nudged by less than half a step so the horizon lands exactly on a node.
struct StepPlan {
  Index n_steps;
  double dt;
};

inline StepPlan make_step_plan(const SimConfig& cfg) {
  const double span = cfg.t_end - cfg.t_start;
  Index n = static_cast<Index>(std::llround(span / cfg.dt));
  if (n < 1) n = 1;
  return {n, span / static_cast<double>(n)};
}

inline std::vector<Index> record_indices(Index n_steps, Index stride) {
  std::vector<Index> idx;
  for (Index i = 0; i <= n_steps; i += stride) idx.push_back(i);
  if (idx.back() != n_steps) idx.push_back(n_steps);
  return idx;
}

inline void check_state_finite(const Vector& x, double t) {
  if (!x.allFinite() || x.norm() > 1e150) {
    throw NonFiniteState("simulation diverged near t = " + std::to_string(t));
  }
}

// Uniform draws use the top 53 bits of the engine so the stream does not
// depend on the standard library's distribution implementation.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : eng_(seed) {}

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // in (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace detail

// Classic rk4 with the exciter input evaluated in closed form at the stage
// times. rhs(x, u) returns the state derivative; out(x) the scalar output.
template <typename Rhs, typename OutputFn>
Trajectory integrate_rk4(const Rhs& rhs, const OutputFn& out, const SignalGenerator& gen,
                         const Vector& x0, const SimConfig& cfg) {
  cfg.validate();
  Vector x = x0;
  const auto u_at = [&gen](double t) { return (gen.L * omega_at(gen, t))(0, 0); };
  const auto step = [&](double t, double h) {
    const double u0 = u_at(t), um = u_at(t + 0.5 * h), ue = u_at(t + h);
    const Vector k1 = rhs(x, u0);
    const Vector k2 = rhs(x + (0.5 * h) * k1, um);
    const Vector k3 = rhs(x + (0.5 * h) * k2, um);
    const Vector k4 = rhs(x + h * k3, ue);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };

  if (cfg.t_start > 0.0) {
    Index n1 = static_cast<Index>(std::ceil(cfg.t_start / cfg.dt - 1e-9));
    if (n1 < 1) n1 = 1;
    const double h1 = cfg.t_start / static_cast<double>(n1);
    for (Index i = 0; i < n1; ++i) {
      step(h1 * static_cast<double>(i), h1);
      if ((i & 1023) == 0) detail::check_state_finite(x, h1 * static_cast<double>(i));
    }
  }

  const auto plan = detail::make_step_plan(cfg);
  const auto rec = detail::record_indices(plan.n_steps, cfg.record_stride);
  Trajectory traj;
  traj.times.resize(static_cast<Index>(rec.size()));
  traj.states.resize(static_cast<Index>(rec.size()), x0.size());
  traj.outputs.resize(static_cast<Index>(rec.size()));
  Index next = 0;
  for (Index i = 0; i <= plan.n_steps; ++i) {
    const double t = cfg.t_start + plan.dt * static_cast<double>(i);
    if (next < static_cast<Index>(rec.size()) && rec[static_cast<std::size_t>(next)] == i) {
      detail::check_state_finite(x, t);
      traj.times[next] = t;
      traj.states.row(next) = x.transpose();
      traj.outputs[next] = out(x);
      ++next;
    }
    if (i < plan.n_steps) step(t, plan.dt);
  }
  return traj;
}

// Interconnection of a linear plant with the exciter. The exact stepper
// propagates the augmented pair (omega, x) with matrix exponentials, so the
// only error is expm accuracy; recording hops record-to-record, which keeps
// the cost at one exponential per distinct hop length.
inline Trajectory simulate_interconnection(const ParametricLTI& sys, const SignalGenerator& gen,
                                           double p, const std::optional<Vector>& x0_opt,
                                           const SimConfig& cfg) {
  cfg.validate();
  check_in_interval(sys, p, "simulate_interconnection");
  const Realization r = eval(sys, p);
  Vector x0 = x0_opt.value_or(Vector::Zero(sys.n));
  if (x0.size() != sys.n)
    throw DimensionMismatch("simulate_interconnection: x0 has wrong length");

  const StepMethod method = cfg.method.value_or(StepMethod::ExpmLTI);
  if (method == StepMethod::Rk4) {
    Trajectory traj = integrate_rk4(
        [&r](const Vector& x, double u) -> Vector { return r.A * x + r.B.col(0) * u; },
        [&r](const Vector& x) -> double { return (r.C * x)(0, 0); }, gen, x0, cfg);
    traj.param = p;
    return traj;
  }

  const Index nu = gen.nu, n = sys.n;
  Matrix big = Matrix::Zero(nu + n, nu + n);
  big.topLeftCorner(nu, nu) = gen.S;
  big.bottomLeftCorner(n, nu) = r.B * gen.L;
  big.bottomRightCorner(n, n) = r.A;

  Vector z(nu + n);
  z.head(nu) = gen.omega0;
  z.tail(n) = x0;
  if (cfg.t_start > 0.0) z = expm(big * cfg.t_start) * z;

  const auto plan = detail::make_step_plan(cfg);
  const auto rec = detail::record_indices(plan.n_steps, cfg.record_stride);
  const Matrix phi = expm(big * (plan.dt * static_cast<double>(cfg.record_stride)));

  Trajectory traj;
  traj.param = p;
  traj.times.resize(static_cast<Index>(rec.size()));
  traj.states.resize(static_cast<Index>(rec.size()), n);
  traj.outputs.resize(static_cast<Index>(rec.size()));
  for (std::size_t k = 0; k < rec.size(); ++k) {
    if (k > 0) {
      const Index gap = rec[k] - rec[k - 1];
      if (gap == cfg.record_stride) {
        z = phi * z;
      } else {
        z = expm(big * (plan.dt * static_cast<double>(gap))) * z;
      }
    }
    const double t = cfg.t_start + plan.dt * static_cast<double>(rec[k]);
    const Vector x = z.tail(n);
    detail::check_state_finite(x, t);
    const Index row = static_cast<Index>(k);
    traj.times[row] = t;
    traj.states.row(row) = x.transpose();
    traj.outputs[row] = (r.C * x)(0, 0);
  }
  return traj;
}

// Resamples h equidistant times in [t0, t1], pairing the closed-form exciter
// state with the recorded output (linearly interpolated between records; a
// sample landing on a record is taken verbatim). Refusing windows finer than
// the recording keeps interpolation from inventing data.
inline SnapshotWindow extract_window(const Trajectory& traj, const SignalGenerator& gen,
                                     double t0, double t1, Index h) {
  const Index m = traj.times.size();
  if (m < 2) throw WindowOutsideTrajectory("extract_window: trajectory too short");
  if (h < gen.nu)
    throw WindowTooShort("extract_window: need at least as many samples as exciter states");
  if (h < 2) throw InvalidArgument("extract_window: need at least two samples");
  const double lo = traj.times[0], hi = traj.times[m - 1];
  const double tol = 1e-9 * std::max(1.0, std::abs(hi));
  if (!(t1 > t0) || t0 < lo - tol || t1 > hi + tol)
    throw WindowOutsideTrajectory("extract_window: window not inside the recorded span");

  const double ws = (t1 - t0) / static_cast<double>(h - 1);
  double max_gap = 0.0;
  for (Index i = 0; i + 1 < m; ++i) max_gap = std::max(max_gap, traj.times[i + 1] - traj.times[i]);
  if (ws < max_gap * (1.0 - 1e-9))
    throw WindowAliased("extract_window: recording is coarser than the requested sampling");

  SnapshotWindow win;
  win.param = traj.param;
  win.times.resize(h);
  win.omega.resize(h, gen.nu);
  win.outputs.resize(h);
  const double* tb = traj.times.data();
  for (Index j = 0; j < h; ++j) {
    const double t = (j == h - 1) ? t1 : t0 + ws * static_cast<double>(j);
    Index i = static_cast<Index>(std::upper_bound(tb, tb + m, t) - tb) - 1;
    i = std::clamp<Index>(i, 0, m - 2);
    double w = (t - traj.times[i]) / (traj.times[i + 1] - traj.times[i]);
    w = std::clamp(w, 0.0, 1.0);
    if (w < 1e-9) {
      win.outputs[j] = traj.outputs[i];
    } else if (w > 1.0 - 1e-9) {
      win.outputs[j] = traj.outputs[i + 1];
    } else {
      win.outputs[j] = (1.0 - w) * traj.outputs[i] + w * traj.outputs[i + 1];
    }
    win.times[j] = t;
    win.omega.row(j) = omega_at(gen, t).transpose();
  }
  return win;
}

// One window per parameter value, with the integration grid aligned to the
// window so every snapshot time is an integration node.
template <typename System>
SnapshotDataset collect_snapshots(const System& sys, const SignalGenerator& gen,
                                  const std::vector<double>& params, double win_start,
                                  double win_end, Index h, SimConfig cfg) {
  if (h < 2) throw InvalidArgument("collect_snapshots: need at least two samples");
  if (!(win_end > win_start) || !(win_start >= 0.0))
    throw InvalidArgument("collect_snapshots: bad window");
  const double ws = (win_end - win_start) / static_cast<double>(h - 1);
  Index stride = static_cast<Index>(std::ceil(ws / cfg.dt - 1e-9));
  if (stride < 1) stride = 1;
  cfg.dt = ws / static_cast<double>(stride);
  cfg.record_stride = stride;
  cfg.t_start = win_start;
  cfg.t_end = win_end;

  SnapshotDataset ds;
  ds.windows.reserve(params.size());
  for (double p : params) {
    const Trajectory traj = simulate_interconnection(sys, gen, p, std::nullopt, cfg);
    ds.windows.push_back(extract_window(traj, gen, win_start, win_end, h));
  }
  return ds;
}

// Gaussian noise on the outputs only; the exciter state is known exactly.
inline SnapshotDataset add_output_noise(SnapshotDataset ds, double stddev, std::uint64_t seed) {
  if (stddev < 0.0) throw InvalidArgument("add_output_noise: stddev must be nonnegative");
  ds.noise = {stddev, seed, true};
  if (stddev == 0.0) return ds;
  detail::GaussianStream draw(seed);
  for (SnapshotWindow& win : ds.windows) {
    for (Index i = 0; i < win.outputs.size(); ++i) win.outputs[i] += stddev * draw();
  }
  return ds;
}

}  // namespace parmor
