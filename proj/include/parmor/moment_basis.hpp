#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "parmor/errors.hpp"
#include "parmor/linalg.hpp"
#include "parmor/psys.hpp"
#include "parmor/siggen.hpp"
#include "parmor/sim.hpp"
#include "parmor/types.hpp"

namespace parmor {

// Family of scalar basis functions over the parameter. Polynomials are raw
// monomials p^(j-1); fits recondition them internally but always report
// weights in this raw basis.
class BasisSet {
 public:
  enum class Kind { Polynomial, GaussianRbf, Fourier };

  static BasisSet polynomial(Index count) {
    if (count < 1) throw InvalidArgument("BasisSet: need at least one function");
    BasisSet b;
    b.kind_ = Kind::Polynomial;
    b.count_ = count;
    return b;
  }

  static BasisSet gaussian_rbf(Vector centers, Vector widths) {
    if (centers.size() == 0 || centers.size() != widths.size())
      throw InvalidArgument("BasisSet: centers and widths must match and be nonempty");
    if ((widths.array() <= 0.0).any())
      throw InvalidArgument("BasisSet: widths must be positive");
    BasisSet b;
    b.kind_ = Kind::GaussianRbf;
    b.count_ = centers.size();
    b.centers_ = std::move(centers);
    b.widths_ = std::move(widths);
    return b;
  }

  // 1, sin(2 pi p / T), cos(2 pi p / T), sin(4 pi p / T), ...
  static BasisSet fourier(double base_period, Index count) {
    if (count < 1) throw InvalidArgument("BasisSet: need at least one function");
    if (!(base_period > 0.0)) throw InvalidArgument("BasisSet: period must be positive");
    BasisSet b;
    b.kind_ = Kind::Fourier;
    b.count_ = count;
    b.period_ = base_period;
    return b;
  }

  Kind kind() const { return kind_; }
  Index count() const { return count_; }
  const Vector& centers() const { return centers_; }
  const Vector& widths() const { return widths_; }
  double period() const { return period_; }

  RowVector eval(double p) const {
    RowVector phi(count_);
    switch (kind_) {
      case Kind::Polynomial: {
        double pw = 1.0;
        for (Index j = 0; j < count_; ++j) {
          phi[j] = pw;
          pw *= p;
        }
        break;
      }
      case Kind::GaussianRbf:
        for (Index j = 0; j < count_; ++j) {
          const double z = (p - centers_[j]) / widths_[j];
          phi[j] = std::exp(-0.5 * z * z);
        }
        break;
      case Kind::Fourier:
        for (Index j = 0; j < count_; ++j) {
          if (j == 0) {
            phi[j] = 1.0;
          } else {
            const double arg =
                2.0 * M_PI * static_cast<double>((j + 1) / 2) * p / period_;
            phi[j] = (j % 2 == 1) ? std::sin(arg) : std::cos(arg);
          }
        }
        break;
    }
    return phi;
  }

 private:
  BasisSet() = default;

  Kind kind_ = Kind::Polynomial;
  Index count_ = 0;
  Vector centers_, widths_;
  double period_ = 1.0;
};

inline Matrix interp_matrix(const BasisSet& basis, const std::vector<double>& params) {
  Matrix m(static_cast<Index>(params.size()), basis.count());
  for (std::size_t k = 0; k < params.size(); ++k)
    m.row(static_cast<Index>(k)) = basis.eval(params[k]);
  return m;
}

struct DataProvenance {
  double window_start = 0.0;
  double window_end = 0.0;
  Index K = 0;
  Index h = 0;
};

struct WeightMatrix {
  Matrix gamma;  // basis count x exciter dimension
  BasisSet basis = BasisSet::polynomial(1);
  std::array<double, 2> param_interval{0.0, 0.0};
  bool data_driven = false;
  std::optional<DataProvenance> data;
  std::optional<Vector> ridge;
};

inline RowVector eval_basis_moment(const WeightMatrix& w, double p) {
  const double tol = 1e-12 * std::max(1.0, std::abs(w.param_interval[1]));
  if (p < w.param_interval[0] - tol || p > w.param_interval[1] + tol)
    throw ParameterOutOfRange("eval_basis_moment: p outside the fitted interval");
  return w.basis.eval(p) * w.gamma;
}

namespace detail {

// Affine map q = alpha p + beta sending [lo, hi] to [-1, 1]. Identity when
// the points do not span an interval.
struct ParamScaling {
  double alpha = 1.0;
  double beta = 0.0;
};

inline ParamScaling make_scaling(const std::vector<double>& params) {
  const auto [lo_it, hi_it] = std::minmax_element(params.begin(), params.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) return {};
  return {2.0 / (hi - lo), -(hi + lo) / (hi - lo)};
}

// Rewrites weights for monomials in q = alpha p + beta as weights for raw
// monomials in p, via the binomial expansion of q^m. Exact up to rounding.
inline Matrix scaled_to_raw(const Matrix& gamma_scaled, const ParamScaling& sc) {
  const Index n = gamma_scaled.rows();
  Matrix t = Matrix::Zero(n, n);
  for (Index m = 0; m < n; ++m) {
    double binom = 1.0;  // C(m, r) * alpha^r * beta^(m-r), updated over r
    double term = std::pow(sc.beta, static_cast<double>(m));
    for (Index r = 0; r <= m; ++r) {
      t(r, m) = term * binom;
      if (r < m && sc.beta != 0.0) {
        binom *= static_cast<double>(m - r) / static_cast<double>(r + 1);
        term *= sc.alpha / sc.beta;
      } else if (r < m) {
        // beta == 0: only the r == m entry survives.
        term = 0.0;
        t(r, m) = (r == 0 && m == 0) ? 1.0 : t(r, m);
      }
    }
    if (sc.beta == 0.0) t(m, m) = std::pow(sc.alpha, static_cast<double>(m));
  }
  return t * gamma_scaled;
}

inline Matrix scaled_interp(const BasisSet& basis, const std::vector<double>& params,
                            const ParamScaling& sc) {
  if (basis.kind() != BasisSet::Kind::Polynomial) return interp_matrix(basis, params);
  std::vector<double> q(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) q[k] = sc.alpha * params[k] + sc.beta;
  return interp_matrix(basis, q);
}

inline void check_distinct(const std::vector<double>& params, const char* who) {
  std::vector<double> s = params;
  std::sort(s.begin(), s.end());
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    if (!(s[k + 1] - s[k] > 1e-12 * std::max(1.0, std::abs(s[k + 1]))))
      throw InvalidArgument(std::string(who) + ": sample parameters must be distinct");
  }
}

inline std::array<double, 2> param_hull(const std::vector<double>& params) {
  const auto [lo, hi] = std::minmax_element(params.begin(), params.end());
  return {*lo, *hi};
}

// Exact moment rows C(p_k) Pi(p_k), one steady-state solve per sample.
inline Matrix moment_rows(const ParametricLTI& sys, const SignalGenerator& gen,
                          const std::vector<double>& params) {
  Matrix r(static_cast<Index>(params.size()), gen.nu);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Realization rk = eval(sys, params[k]);
    const Matrix pi = solve_sylvester(rk.A, gen.S, rk.B * gen.L);
    r.row(static_cast<Index>(k)) = rk.C * pi;
  }
  return r;
}

}  // namespace detail

// Least-squares fit of the moment over exact solves at the sample parameters.
// Polynomials are fitted in the [-1, 1] re-parameterization and mapped back,
// which changes nothing but the conditioning of the normal equations.
inline WeightMatrix fit_model_based(const ParametricLTI& sys, const SignalGenerator& gen,
                                    const BasisSet& basis, const std::vector<double>& params) {
  const Index big_k = static_cast<Index>(params.size());
  if (big_k < basis.count())
    throw RankDeficient(
        "fit_model_based: need at least as many samples as basis functions; "
        "consider the ridge variant");
  detail::check_distinct(params, "fit_model_based");
  for (double p : params) check_in_interval(sys, p, "fit_model_based");

  const detail::ParamScaling sc = detail::make_scaling(params);
  const Matrix upsilon = detail::scaled_interp(basis, params, sc);
  if (numerical_rank(upsilon) < basis.count())
    throw RankDeficient(
        "fit_model_based: basis is not unisolvent on the sample set; "
        "consider the ridge variant");
  const Matrix rows = detail::moment_rows(sys, gen, params);

  WeightMatrix w;
  w.gamma = least_squares(upsilon, rows);
  if (basis.kind() == BasisSet::Kind::Polynomial)
    w.gamma = detail::scaled_to_raw(w.gamma, sc);
  w.basis = basis;
  w.param_interval = sys.param_interval;
  return w;
}

// Ridge variant: per-column solves of (Y^T Y + Lambda) g = Y^T r. The penalty
// acts on the raw weights, so no re-parameterization is applied here.
inline WeightMatrix fit_ridge(const ParametricLTI& sys, const SignalGenerator& gen,
                              const BasisSet& basis, const std::vector<double>& params,
                              const Vector& lambda) {
  if (params.empty()) throw InvalidArgument("fit_ridge: need at least one sample");
  if (lambda.size() != basis.count())
    throw DimensionMismatch("fit_ridge: penalty length must equal basis count");
  if ((lambda.array() <= 0.0).any())
    throw InvalidArgument("fit_ridge: penalty must be positive");
  detail::check_distinct(params, "fit_ridge");
  for (double p : params) check_in_interval(sys, p, "fit_ridge");

  const Matrix upsilon = interp_matrix(basis, params);
  const Matrix rows = detail::moment_rows(sys, gen, params);

  WeightMatrix w;
  w.gamma = least_squares(upsilon, rows, lambda);
  w.basis = basis;
  w.param_interval = sys.param_interval;
  w.ridge = lambda;
  return w;
}

// Snapshot estimator. The regressor is the Kronecker product of the basis
// sample matrix with the exciter sample matrix; its normal equations factor
// by the mixed-product rule, so the fit reduces to two small least-squares
// solves and the product is never materialized.
inline WeightMatrix fit_data_driven(const SnapshotDataset& data, const BasisSet& basis) {
  if (data.windows.empty()) throw InvalidArgument("fit_data_driven: empty dataset");
  const Index big_k = static_cast<Index>(data.windows.size());
  const Index h = data.windows.front().outputs.size();
  const Index nu = data.windows.front().omega.cols();
  std::vector<double> params;
  params.reserve(data.windows.size());
  for (const SnapshotWindow& win : data.windows) {
    if (win.outputs.size() != h || win.omega.rows() != h || win.omega.cols() != nu)
      throw DimensionMismatch("fit_data_driven: windows have inconsistent shapes");
    if ((win.times - data.windows.front().times).cwiseAbs().maxCoeff() >
        1e-9 * std::max(1.0, std::abs(win.times[win.times.size() - 1])))
      throw InvalidArgument("fit_data_driven: windows must share their sample times");
    params.push_back(win.param);
  }
  detail::check_distinct(params, "fit_data_driven");
  if (h < nu)
    throw WindowTooShort("fit_data_driven: window must have at least nu samples");
  if (h * big_k < nu * basis.count())
    throw RankDeficient("fit_data_driven: not enough data for the basis size");

  const Matrix& u = data.windows.front().omega;
  if (numerical_rank(u) < nu)
    throw RankDeficient("fit_data_driven: exciter samples do not span the window");
  const detail::ParamScaling sc = detail::make_scaling(params);
  const Matrix upsilon = detail::scaled_interp(basis, params, sc);
  if (numerical_rank(upsilon) < basis.count())
    throw RankDeficient("fit_data_driven: basis is not unisolvent on the sample set");

  Matrix outputs(h, big_k);
  for (Index k = 0; k < big_k; ++k)
    outputs.col(k) = data.windows[static_cast<std::size_t>(k)].outputs;

  // vec(G^T) = (U_K^T U_K)^{-1} U_K^T O with U_K = Upsilon (x) U factors into
  // G = pinv(Upsilon) O^T pinv(U)^T, evaluated as two thin solves.
  const Matrix z = least_squares(u, outputs);            // nu x K
  WeightMatrix w;
  w.gamma = least_squares(upsilon, z.transpose());       // N x nu
  if (basis.kind() == BasisSet::Kind::Polynomial)
    w.gamma = detail::scaled_to_raw(w.gamma, sc);
  w.basis = basis;
  w.param_interval = detail::param_hull(params);
  w.data_driven = true;
  w.data = DataProvenance{data.windows.front().times[0],
                          data.windows.front().times[h - 1], big_k, h};
  return w;
}

}  // namespace parmor
