#pragma once

// Scalar coefficient functions of the parameter. A closed enumeration keeps
// configurations serializable and makes Taylor differentiation exact for the
// analytic kinds.

#include <cmath>
#include <vector>

#include "parmor/errors.hpp"
#include "parmor/types.hpp"

namespace parmor {

class CoefficientFunction {
 public:
  enum class Kind { Polynomial, Sinusoid, Exponential, Tabulated };

  static CoefficientFunction constant(double c) { return polynomial(Vector::Constant(1, c)); }

  // coeffs[j] multiplies p^j.
  static CoefficientFunction polynomial(Vector coeffs) {
    if (coeffs.size() == 0) throw InvalidArgument("polynomial: needs at least one coefficient");
    ensure_finite(coeffs, "polynomial coefficients");
    CoefficientFunction f;
    f.kind_ = Kind::Polynomial;
    f.coeffs_ = std::move(coeffs);
    return f;
  }

  // amplitude * sin(frequency * p + phase)
  static CoefficientFunction sinusoid(double amplitude, double frequency, double phase) {
    ensure_finite(amplitude, "sinusoid amplitude");
    ensure_finite(frequency, "sinusoid frequency");
    ensure_finite(phase, "sinusoid phase");
    CoefficientFunction f;
    f.kind_ = Kind::Sinusoid;
    f.amplitude_ = amplitude;
    f.frequency_ = frequency;
    f.phase_ = phase;
    return f;
  }

  // scale * exp(rate * p)
  static CoefficientFunction exponential(double rate, double scale) {
    ensure_finite(rate, "exponential rate");
    ensure_finite(scale, "exponential scale");
    CoefficientFunction f;
    f.kind_ = Kind::Exponential;
    f.rate_ = rate;
    f.scale_ = scale;
    return f;
  }

  // Piecewise-linear interpolation on an ascending grid; evaluation outside
  // the grid extrapolates the boundary segment.
  static CoefficientFunction tabulated(Vector grid, Vector values) {
    if (grid.size() != values.size() || grid.size() < 2)
      throw InvalidArgument("tabulated: grid and values need equal length >= 2");
    ensure_finite(grid, "tabulated grid");
    ensure_finite(values, "tabulated values");
    for (Index i = 1; i < grid.size(); ++i)
      if (!(grid[i] > grid[i - 1]))
        throw InvalidArgument("tabulated: grid must be strictly ascending");
    CoefficientFunction f;
    f.kind_ = Kind::Tabulated;
    f.grid_ = std::move(grid);
    f.values_ = std::move(values);
    return f;
  }

  Kind kind() const { return kind_; }

  bool is_constant() const { return kind_ == Kind::Polynomial && coeffs_.size() == 1; }

  double operator()(double p) const {
    switch (kind_) {
      case Kind::Polynomial: {
        double acc = 0.0;
        for (Index j = coeffs_.size() - 1; j >= 0; --j) acc = acc * p + coeffs_[j];
        return acc;
      }
      case Kind::Sinusoid:
        return amplitude_ * std::sin(frequency_ * p + phase_);
      case Kind::Exponential:
        return scale_ * std::exp(rate_ * p);
      case Kind::Tabulated: {
        Index hi = 1;
        while (hi + 1 < grid_.size() && grid_[hi] < p) ++hi;
        const double t = (p - grid_[hi - 1]) / (grid_[hi] - grid_[hi - 1]);
        return values_[hi - 1] + t * (values_[hi] - values_[hi - 1]);
      }
    }
    throw NumericalFailure("unreachable coefficient kind");
  }

  // Coefficients of sum_j c_j (p - p0)^j, j = 0..order.
  Vector taylor(double p0, int order) const {
    if (order < 0) throw InvalidArgument("taylor: order must be nonnegative");
    Vector out = Vector::Zero(order + 1);
    switch (kind_) {
      case Kind::Polynomial: {
        // Binomial shift: contribution of c_m p^m to (p-p0)^j is C(m,j) p0^{m-j}.
        for (Index m = 0; m < coeffs_.size(); ++m) {
          double binom = 1.0;  // C(m, 0)
          double power = std::pow(p0, static_cast<double>(m));
          for (Index j = 0; j <= std::min<Index>(m, order); ++j) {
            out[j] += coeffs_[m] * binom * power;
            binom *= static_cast<double>(m - j) / static_cast<double>(j + 1);
            power = (p0 != 0.0) ? power / p0 : ((j + 1 == m) ? 1.0 : 0.0);
          }
        }
        return out;
      }
      case Kind::Sinusoid: {
        double fact = 1.0, fpow = 1.0;
        for (int j = 0; j <= order; ++j) {
          out[j] = amplitude_ * fpow *
                   std::sin(frequency_ * p0 + phase_ + 0.5 * M_PI * j) / fact;
          fpow *= frequency_;
          fact *= j + 1.0;
        }
        return out;
      }
      case Kind::Exponential: {
        double term = scale_ * std::exp(rate_ * p0);
        for (int j = 0; j <= order; ++j) {
          out[j] = term;
          term *= rate_ / (j + 1.0);
        }
        return out;
      }
      case Kind::Tabulated:
        throw NonAnalyticCoefficient("taylor: tabulated coefficients are not analytic");
    }
    throw NumericalFailure("unreachable coefficient kind");
  }

  // Accessors used by serialization.
  const Vector& coeffs() const { return coeffs_; }
  double amplitude() const { return amplitude_; }
  double frequency() const { return frequency_; }
  double phase() const { return phase_; }
  double rate() const { return rate_; }
  double scale() const { return scale_; }
  const Vector& grid() const { return grid_; }
  const Vector& values() const { return values_; }

 private:
  CoefficientFunction() = default;
  Kind kind_ = Kind::Polynomial;
  Vector coeffs_;
  double amplitude_ = 0.0, frequency_ = 0.0, phase_ = 0.0;
  double rate_ = 0.0, scale_ = 0.0;
  Vector grid_, values_;
};

}  // namespace parmor
