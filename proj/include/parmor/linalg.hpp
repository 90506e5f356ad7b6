#pragma once

// Dense kernels shared by every module: eigenvalue queries, least squares,
// and the two Sylvester/Lyapunov routes (blocked Schur sweep as the workhorse,
// vectorized Kronecker solve as the independent cross-check).

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "parmor/errors.hpp"
#include "parmor/types.hpp"

namespace parmor {

namespace detail {
bool is_quasi_upper_triangular(const Matrix& t);
Spectrum quasi_tri_eigenvalues(const Matrix& t);
}  // namespace detail

inline Spectrum spectrum(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("spectrum: matrix must be square");
  ensure_finite(a, "spectrum input");
  if (a.rows() == 0) return Spectrum{CVector(0)};
  if (detail::is_quasi_upper_triangular(a)) return detail::quasi_tri_eigenvalues(a);
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericalFailure("spectrum: eigenvalue iteration failed");
  return Spectrum{es.eigenvalues()};
}

inline bool is_hurwitz(const Matrix& a, double margin = 0.0) {
  return spectrum(a).max_real() <= -margin;
}

inline double min_eig_sym(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("min_eig_sym: matrix must be square");
  ensure_finite(a, "min_eig_sym input");
  Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalFailure("min_eig_sym: iteration failed");
  return es.eigenvalues().minCoeff();
}

inline double max_eig_sym(const Matrix& a) { return -min_eig_sym(-a); }

inline Index numerical_rank(const Matrix& a, double rel_tol = defaults::rank_tol) {
  if (a.size() == 0) return 0;
  ensure_finite(a, "numerical_rank input");
  Eigen::BDCSVD<Matrix> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv[i] >= rel_tol * sv[0]) ++r;
  return r;
}

// Minimizes ||M X - B||_F columnwise. Without ridge the solution is the
// pseudoinverse applied to B and M must have full numerical column rank;
// with ridge it is (M^T M + diag(ridge))^{ -1} M^T B, ridge entries > 0.
inline Matrix least_squares(const Matrix& m, const Matrix& b,
                            const std::optional<Vector>& ridge = std::nullopt,
                            double rank_tol = defaults::rank_tol) {
  if (m.rows() != b.rows()) throw DimensionMismatch("least_squares: row counts differ");
  ensure_finite(m, "least_squares M");
  ensure_finite(b, "least_squares B");
  if (ridge) {
    if (ridge->size() != m.cols())
      throw DimensionMismatch("least_squares: ridge length must equal column count");
    if ((ridge->array() <= 0.0).any())
      throw InvalidArgument("least_squares: ridge weights must be positive");
    Matrix gram = m.transpose() * m;
    gram += ridge->asDiagonal();
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
      throw NumericalFailure("least_squares: regularized Gram factorization failed");
    return ldlt.solve(m.transpose() * b);
  }
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (m.rows() < m.cols() || sv.size() == 0 || sv[0] == 0.0 ||
      sv[sv.size() - 1] < rank_tol * sv[0])
    throw RankDeficient("least_squares: matrix is numerically column-rank deficient");
  return svd.solve(b);
}

inline Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("expm: matrix must be square");
  ensure_finite(a, "expm input");
  return a.exp();
}

namespace detail {

// True when every entry below the first subdiagonal is exactly zero and no
// two consecutive subdiagonal entries are nonzero, i.e. the matrix is already
// in real Schur (quasi upper triangular) form. Exact-zero tests keep the fast
// path free of false positives; anything else goes through a real Schur
// factorization instead.
inline bool is_quasi_upper_triangular(const Matrix& t) {
  const Index n = t.rows();
  for (Index j = 0; j < n; ++j)
    for (Index i = j + 2; i < n; ++i)
      if (t(i, j) != 0.0) return false;
  for (Index j = 0; j + 2 < n; ++j)
    if (t(j + 1, j) != 0.0 && t(j + 2, j + 1) != 0.0) return false;
  return true;
}

// 1x1 / 2x2 diagonal block starts of a quasi triangular matrix.
inline std::vector<Index> quasi_tri_blocks(const Matrix& t) {
  std::vector<Index> starts;
  const Index n = t.rows();
  Index i = 0;
  while (i < n) {
    starts.push_back(i);
    if (i + 1 < n && t(i + 1, i) != 0.0)
      i += 2;
    else
      i += 1;
  }
  starts.push_back(n);
  return starts;
}

inline Spectrum quasi_tri_eigenvalues(const Matrix& t) {
  CVector vals(t.rows());
  const auto blocks = quasi_tri_blocks(t);
  for (size_t b = 0; b + 1 < blocks.size(); ++b) {
    const Index i = blocks[b];
    if (blocks[b + 1] - i == 1) {
      vals[i] = Complex(t(i, i), 0.0);
    } else {
      const double tr = 0.5 * (t(i, i) + t(i + 1, i + 1));
      const double det = t(i, i) * t(i + 1, i + 1) - t(i, i + 1) * t(i + 1, i);
      const double disc = tr * tr - det;
      if (disc >= 0.0) {
        const double r = std::sqrt(disc);
        vals[i] = Complex(tr + r, 0.0);
        vals[i + 1] = Complex(tr - r, 0.0);
      } else {
        const double im = std::sqrt(-disc);
        vals[i] = Complex(tr, im);
        vals[i + 1] = Complex(tr, -im);
      }
    }
  }
  return Spectrum{vals};
}

struct SchurForm {
  Matrix t;
  Matrix u;          // empty when the input was already quasi triangular
  bool identity_u = false;
};

inline SchurForm real_schur(const Matrix& a) {
  SchurForm f;
  if (is_quasi_upper_triangular(a)) {
    f.t = a;
    f.identity_u = true;
    return f;
  }
  Eigen::RealSchur<Matrix> rs(a);
  if (rs.info() != Eigen::Success) throw NumericalFailure("real Schur iteration failed");
  f.t = rs.matrixT();
  f.u = rs.matrixU();
  return f;
}

// Solves ta*y - y*ts = rhs for blocks of size at most 2x2 via vectorization.
inline Matrix solve_small_sylvester(const Eigen::Ref<const Matrix>& ta,
                                    const Eigen::Ref<const Matrix>& ts,
                                    const Eigen::Ref<const Matrix>& rhs) {
  const Index m = ta.rows(), q = ts.rows();
  Matrix k = Matrix::Zero(m * q, m * q);
  for (Index j = 0; j < q; ++j) k.block(j * m, j * m, m, m) = ta;
  for (Index j = 0; j < q; ++j)
    for (Index l = 0; l < q; ++l) k.block(j * m, l * m, m, m).diagonal().array() -= ts(l, j);
  Eigen::Map<const Vector> vec_rhs(rhs.data(), m * q);
  Eigen::FullPivLU<Matrix> lu(k);
  if (!lu.isInvertible())
    throw NumericalFailure("Sylvester diagonal block is singular despite separation check");
  Vector v = lu.solve(vec_rhs);
  return Eigen::Map<const Matrix>(v.data(), m, q);
}

// Solves ta^T*x + x*ts = rhs for blocks of size at most 2x2.
inline Matrix solve_small_lyapunov(const Eigen::Ref<const Matrix>& ta,
                                   const Eigen::Ref<const Matrix>& ts,
                                   const Eigen::Ref<const Matrix>& rhs) {
  const Index m = ta.rows(), q = ts.rows();
  Matrix k = Matrix::Zero(m * q, m * q);
  for (Index j = 0; j < q; ++j) k.block(j * m, j * m, m, m) = ta.transpose();
  for (Index j = 0; j < q; ++j)
    for (Index l = 0; l < q; ++l) k.block(j * m, l * m, m, m).diagonal().array() += ts(l, j);
  Eigen::Map<const Vector> vec_rhs(rhs.data(), m * q);
  Eigen::FullPivLU<Matrix> lu(k);
  if (!lu.isInvertible())
    throw NumericalFailure("Lyapunov diagonal block is singular despite Hurwitz check");
  Vector v = lu.solve(vec_rhs);
  return Eigen::Map<const Matrix>(v.data(), m, q);
}

// Back-substitution for ta*y - y*ts = g with both factors quasi triangular.
// Column blocks advance left to right, row blocks bottom to top.
inline Matrix sylvester_tri_sweep(const Matrix& ta, const Matrix& ts, const Matrix& g) {
  const Index n = ta.rows(), nu = ts.rows();
  const auto ab = quasi_tri_blocks(ta);
  const auto sb = quasi_tri_blocks(ts);
  Matrix y = Matrix::Zero(n, nu);
  for (size_t jb = 0; jb + 1 < sb.size(); ++jb) {
    const Index j0 = sb[jb], jw = sb[jb + 1] - j0;
    Matrix rhs_col = g.middleCols(j0, jw);
    if (j0 > 0) rhs_col += y.leftCols(j0) * ts.block(0, j0, j0, jw);
    for (size_t ib = ab.size() - 1; ib-- > 0;) {
      const Index i0 = ab[ib], iw = ab[ib + 1] - i0;
      Matrix rhs = rhs_col.middleRows(i0, iw);
      const Index below = n - i0 - iw;
      if (below > 0)
        rhs -= ta.block(i0, i0 + iw, iw, below) * y.block(i0 + iw, j0, below, jw);
      y.block(i0, j0, iw, jw) =
          solve_small_sylvester(ta.block(i0, i0, iw, iw), ts.block(j0, j0, jw, jw), rhs);
    }
  }
  return y;
}

// Back-substitution for t^T*x + x*t = g with t quasi triangular. Both block
// indices advance left to right / top to bottom because t^T is lower.
inline Matrix lyapunov_tri_sweep(const Matrix& t, const Matrix& g) {
  const Index n = t.rows();
  const auto tb = quasi_tri_blocks(t);
  Matrix x = Matrix::Zero(n, n);
  for (size_t jb = 0; jb + 1 < tb.size(); ++jb) {
    const Index j0 = tb[jb], jw = tb[jb + 1] - j0;
    Matrix rhs_col = g.middleCols(j0, jw);
    if (j0 > 0) rhs_col -= x.leftCols(j0) * t.block(0, j0, j0, jw);
    for (size_t ib = 0; ib + 1 < tb.size(); ++ib) {
      const Index i0 = tb[ib], iw = tb[ib + 1] - i0;
      Matrix rhs = rhs_col.middleRows(i0, iw);
      if (i0 > 0) rhs -= t.block(0, i0, i0, iw).transpose() * x.block(0, j0, i0, jw);
      x.block(i0, j0, iw, jw) =
          solve_small_lyapunov(t.block(i0, i0, iw, iw), t.block(j0, j0, jw, jw), rhs);
    }
  }
  return x;
}

inline void check_separation(const Spectrum& ea, const Spectrum& es, double tol_spec,
                             const char* who) {
  const double sep = ea.separation_from(es);
  if (sep < tol_spec) {
    std::ostringstream msg;
    msg << who << ": spectra of A and S are separated by " << sep << ", below tolerance "
        << tol_spec;
    throw SpectrumOverlap(msg.str());
  }
}

}  // namespace detail

// Factors A and S once so families of equations A*Pi + F = Pi*S sharing the
// same pair can be solved with one Schur decomposition each.
class SylvesterSolver {
 public:
  SylvesterSolver(Matrix a, Matrix s, double tol_spec = defaults::tol_spec)
      : a_(std::move(a)), s_(std::move(s)) {
    if (a_.rows() != a_.cols() || s_.rows() != s_.cols())
      throw DimensionMismatch("SylvesterSolver: A and S must be square");
    ensure_finite(a_, "Sylvester A");
    ensure_finite(s_, "Sylvester S");
    fa_ = detail::real_schur(a_);
    fs_ = detail::real_schur(s_);
    eig_a_ = detail::quasi_tri_eigenvalues(fa_.t);
    eig_s_ = detail::quasi_tri_eigenvalues(fs_.t);
    detail::check_separation(eig_a_, eig_s_, tol_spec, "SylvesterSolver");
  }

  // Solves A*Pi + F = Pi*S and enforces the relative residual bound.
  Matrix solve(const Matrix& f, double residual_tol = defaults::residual_tol) const {
    if (f.rows() != a_.rows() || f.cols() != s_.rows())
      throw DimensionMismatch("SylvesterSolver::solve: F has wrong shape");
    ensure_finite(f, "Sylvester F");
    Matrix g = -f;
    if (!fa_.identity_u) g = fa_.u.transpose() * g;
    if (!fs_.identity_u) g = g * fs_.u;
    Matrix y = detail::sylvester_tri_sweep(fa_.t, fs_.t, g);
    if (!fa_.identity_u) y = fa_.u * y;
    if (!fs_.identity_u) y = y * fs_.u.transpose();
    const double resid = (a_ * y + f - y * s_).norm();
    const double bound =
        residual_tol * (a_.norm() * y.norm() + f.norm() + y.norm() * s_.norm());
    if (!(resid <= bound)) {
      std::ostringstream msg;
      msg << "Sylvester residual " << resid << " exceeds bound " << bound;
      throw NumericalFailure(msg.str());
    }
    return y;
  }

  const Spectrum& eig_a() const { return eig_a_; }
  const Spectrum& eig_s() const { return eig_s_; }

 private:
  Matrix a_, s_;
  detail::SchurForm fa_, fs_;
  Spectrum eig_a_, eig_s_;
};

inline Matrix solve_sylvester(const Matrix& a, const Matrix& s, const Matrix& f,
                              double tol_spec = defaults::tol_spec) {
  return SylvesterSolver(a, s, tol_spec).solve(f);
}

// Vectorized route: vec(Pi) = -(I_nu (x) A - S^T (x) I_n)^{-1} vec(F).
// Independent of the Schur sweep; capped because the dense operator has
// (n*nu)^2 entries.
inline Matrix solve_sylvester_kron(const Matrix& a, const Matrix& s, const Matrix& f,
                                   double tol_spec = defaults::tol_spec,
                                   Index kron_limit = defaults::kron_limit) {
  if (a.rows() != a.cols() || s.rows() != s.cols())
    throw DimensionMismatch("solve_sylvester_kron: A and S must be square");
  if (f.rows() != a.rows() || f.cols() != s.rows())
    throw DimensionMismatch("solve_sylvester_kron: F has wrong shape");
  ensure_finite(a, "Sylvester A");
  ensure_finite(s, "Sylvester S");
  ensure_finite(f, "Sylvester F");
  const Index n = a.rows(), nu = s.rows(), dim = n * nu;
  if (dim > kron_limit) {
    std::ostringstream msg;
    msg << "solve_sylvester_kron: dimension " << dim << " exceeds cap " << kron_limit;
    throw SizeLimitExceeded(msg.str());
  }
  detail::check_separation(spectrum(a), spectrum(s), tol_spec, "solve_sylvester_kron");
  Matrix op = Matrix::Zero(dim, dim);
  for (Index j = 0; j < nu; ++j) op.block(j * n, j * n, n, n) = a;
  for (Index j = 0; j < nu; ++j)
    for (Index l = 0; l < nu; ++l)
      op.block(j * n, l * n, n, n).diagonal().array() -= s(l, j);
  Vector rhs = -Eigen::Map<const Vector>(f.data(), dim);
  Eigen::PartialPivLU<Matrix> lu(op);
  Vector v = lu.solve(rhs);
  Matrix pi = Eigen::Map<const Matrix>(v.data(), n, nu);
  const double resid = (a * pi + f - pi * s).norm();
  const double bound =
      defaults::residual_tol * (a.norm() * pi.norm() + f.norm() + pi.norm() * s.norm());
  if (!(resid <= bound))
    throw NumericalFailure("solve_sylvester_kron: residual bound violated");
  return pi;
}

// Factors a Hurwitz A once for families of equations A^T X + X A = -Q.
class LyapunovSolver {
 public:
  explicit LyapunovSolver(Matrix a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols()) throw DimensionMismatch("LyapunovSolver: A must be square");
    ensure_finite(a_, "Lyapunov A");
    f_ = detail::real_schur(a_);
    eig_ = detail::quasi_tri_eigenvalues(f_.t);
    if (!(eig_.max_real() < 0.0)) {
      std::ostringstream msg;
      msg << "LyapunovSolver: A is not Hurwitz (max real part " << eig_.max_real() << ")";
      throw NotHurwitz(msg.str());
    }
  }

  // Solves A^T X + X A = -Q for symmetric Q; the result is symmetrized.
  Matrix solve(const Matrix& q, double residual_tol = defaults::residual_tol) const {
    if (q.rows() != a_.rows() || q.cols() != a_.rows())
      throw DimensionMismatch("LyapunovSolver::solve: Q has wrong shape");
    ensure_finite(q, "Lyapunov Q");
    if ((q - q.transpose()).norm() > 1e-10 * (1.0 + q.norm()))
      throw InvalidArgument("LyapunovSolver::solve: Q must be symmetric");
    Matrix g = -q;
    if (!f_.identity_u) g = f_.u.transpose() * g * f_.u;
    Matrix x = detail::lyapunov_tri_sweep(f_.t, g);
    if (!f_.identity_u) x = f_.u * x * f_.u.transpose();
    x = 0.5 * (x + x.transpose());
    const double resid = (a_.transpose() * x + x * a_ + q).norm();
    const double bound = residual_tol * (2.0 * a_.norm() * x.norm() + q.norm() + 1.0);
    if (!(resid <= bound)) {
      std::ostringstream msg;
      msg << "Lyapunov residual " << resid << " exceeds bound " << bound;
      throw NumericalFailure(msg.str());
    }
    return x;
  }

  const Spectrum& eig_a() const { return eig_; }

 private:
  Matrix a_;
  detail::SchurForm f_;
  Spectrum eig_;
};

inline Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  return LyapunovSolver(a).solve(q);
}

}  // namespace parmor
