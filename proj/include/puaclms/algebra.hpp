#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "puaclms/errors.hpp"

namespace puaclms::algebra {

using Complex = std::complex<double>;
using CVector = std::vector<Complex>;

/// Dense complex matrix, row-major with explicit shape.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), entries_(rows * cols) {}
  CMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (entries_.size() != rows_ * cols_) {
      throw DimensionError("CMatrix: entry count does not match rows*cols");
    }
  }
  CMatrix(std::initializer_list<std::initializer_list<Complex>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    entries_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
      if (row.size() != cols_) throw DimensionError("CMatrix: ragged initializer");
      entries_.insert(entries_.end(), row.begin(), row.end());
    }
  }

  static CMatrix identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static CMatrix diagonal(std::span<const Complex> d) {
    CMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  Complex& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

  std::span<Complex> entries() { return entries_; }
  std::span<const Complex> entries() const { return entries_; }

  CMatrix& operator+=(const CMatrix& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] += o.entries_[i];
    return *this;
  }
  CMatrix& operator-=(const CMatrix& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] -= o.entries_[i];
    return *this;
  }
  CMatrix& operator*=(Complex s) {
    for (auto& x : entries_) x *= s;
    return *this;
  }

  friend bool operator==(const CMatrix&, const CMatrix&) = default;

 private:
  void require_same_shape(const CMatrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) {
      throw DimensionError(std::string("CMatrix ") + op + ": shape mismatch");
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> entries_;
};

inline CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
inline CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
inline CMatrix operator*(Complex s, CMatrix a) { return a *= s; }
inline CMatrix operator*(CMatrix a, Complex s) { return a *= s; }

namespace detail {

using EigenMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EigenColMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using EigenVec = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

inline Eigen::Map<const EigenMat> view(const CMatrix& m) {
  return {m.entries().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
inline Eigen::Map<EigenMat> view(CMatrix& m) {
  return {m.entries().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
inline Eigen::Map<const EigenVec> view(const CVector& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

template <typename Derived>
CMatrix from_eigen(const Eigen::MatrixBase<Derived>& e) {
  CMatrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  view(m) = e;
  return m;
}

template <typename Derived>
CVector vector_from_eigen(const Eigen::MatrixBase<Derived>& e) {
  CVector v(static_cast<std::size_t>(e.size()));
  for (Eigen::Index i = 0; i < e.size(); ++i) v[static_cast<std::size_t>(i)] = e(i);
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural helpers
// ---------------------------------------------------------------------------

inline CMatrix adjoint(const CMatrix& a) {
  CMatrix r(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) r(j, i) = std::conj(a(i, j));
  return r;
}

inline CMatrix transpose(const CMatrix& a) {
  CMatrix r(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) r(j, i) = a(i, j);
  return r;
}

inline CMatrix conjugate(const CMatrix& a) {
  CMatrix r = a;
  for (auto& x : r.entries()) x = std::conj(x);
  return r;
}

inline CVector conjugate(const CVector& v) {
  CVector r(v.size());
  std::transform(v.begin(), v.end(), r.begin(), [](Complex x) { return std::conj(x); });
  return r;
}

inline Complex trace(const CMatrix& a) {
  if (!a.square()) throw DimensionError("trace: matrix is not square");
  Complex t = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

inline double frobenius_norm(const CMatrix& a) {
  double s = 0.0;
  for (const auto& x : a.entries()) s += std::norm(x);
  return std::sqrt(s);
}

inline double norm_sq(std::span<const Complex> v) {
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return s;
}

inline double norm(std::span<const Complex> v) { return std::sqrt(norm_sq(v)); }

/// x^H y
inline Complex dot(std::span<const Complex> x, std::span<const Complex> y) {
  if (x.size() != y.size()) throw DimensionError("dot: length mismatch");
  Complex s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
  return s;
}

inline bool is_hermitian(const CMatrix& a, double tol = 1e-12) {
  if (!a.square()) return false;
  const double scale = std::max(1.0, frobenius_norm(a));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i; j < a.cols(); ++j)
      if (std::abs(a(i, j) - std::conj(a(j, i))) > tol * scale) return false;
  return true;
}

/// (A + A^H) / 2
inline CMatrix hermitian_part(const CMatrix& a) {
  if (!a.square()) throw DimensionError("hermitian_part: matrix is not square");
  CMatrix r(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
  return r;
}

inline CMatrix outer(std::span<const Complex> x, std::span<const Complex> y) {
  CMatrix r(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) r(i, j) = x[i] * std::conj(y[j]);
  return r;
}

inline CMatrix multiply(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("multiply: inner dimensions differ");
  CMatrix r(a.rows(), b.cols());
  detail::view(r).noalias() = detail::view(a) * detail::view(b);
  return r;
}

inline CVector multiply(const CMatrix& a, std::span<const Complex> x) {
  if (a.cols() != x.size()) throw DimensionError("multiply: matrix/vector length mismatch");
  CVector r(a.rows());
  Eigen::Map<detail::EigenVec> out(r.data(), static_cast<Eigen::Index>(r.size()));
  Eigen::Map<const detail::EigenVec> in(x.data(), static_cast<Eigen::Index>(x.size()));
  out.noalias() = detail::view(a) * in;
  return r;
}

inline CMatrix operator*(const CMatrix& a, const CMatrix& b) { return multiply(a, b); }

// ---------------------------------------------------------------------------
// Kronecker algebra
// ---------------------------------------------------------------------------

/// Standard Kronecker product: (a ⊗ b)(i*p + k, j*q + l) = a(i,j) b(k,l).
inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  const std::size_t p = b.rows(), q = b.cols();
  CMatrix r(a.rows() * p, a.cols() * q);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const Complex aij = a(i, j);
      for (std::size_t k = 0; k < p; ++k)
        for (std::size_t l = 0; l < q; ++l) r(i * p + k, j * q + l) = aij * b(k, l);
    }
  return r;
}

inline CVector kron(std::span<const Complex> x, std::span<const Complex> y) {
  CVector r(x.size() * y.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) r[i * y.size() + j] = x[i] * y[j];
  return r;
}

/// Stacks columns top to bottom.
inline CVector vec(const CMatrix& a) {
  CVector v(a.rows() * a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) v[j * a.rows() + i] = a(i, j);
  return v;
}

inline CMatrix unvec(std::span<const Complex> v, std::size_t rows, std::size_t cols) {
  if (v.size() != rows * cols) throw DimensionError("unvec: length does not match shape");
  CMatrix a(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) a(i, j) = v[j * rows + i];
  return a;
}

/// x^H Σ x for a Hermitian weighting Σ.
inline double weighted_norm_sq(std::span<const Complex> x, const CMatrix& sigma) {
  if (!sigma.square() || sigma.rows() != x.size()) {
    throw DimensionError("weighted_norm_sq: weighting does not match vector length");
  }
  Complex s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Complex row = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) row += sigma(i, j) * x[j];
    s += std::conj(x[i]) * row;
  }
  const double scale = std::max(1.0, norm_sq(x) * frobenius_norm(sigma));
  if (std::abs(s.imag()) > 1e-12 * scale) {
    std::ostringstream os;
    os << "weighted_norm_sq: imaginary part " << s.imag() << " indicates a non-Hermitian weighting";
    throw NumericalError(os.str());
  }
  return s.real();
}

// ---------------------------------------------------------------------------
// Eigensolvers and linear solves
// ---------------------------------------------------------------------------

struct EigenResult {
  std::vector<Complex> values;
  std::optional<CMatrix> vectors;  // eigenvectors in columns
  double residual = 0.0;           // relative to the matrix norm
};

struct EigenOptions {
  /// QR sweep cap is sweeps_per_dimension * n.
  int sweeps_per_dimension = 100;
  bool compute_vectors = true;
  double residual_tolerance = 1e-10;
};

/// Hermitian eigendecomposition (Householder tridiagonalisation + implicit
/// symmetric QR). Eigenvalues are returned in descending order.
inline EigenResult eig_hermitian(const CMatrix& a, const EigenOptions& opt = {}) {
  if (!a.square()) throw DimensionError("eig_hermitian: matrix is not square");
  if (!is_hermitian(a, 1e-10)) throw NumericalError("eig_hermitian: input is not Hermitian");
  const auto n = static_cast<Eigen::Index>(a.rows());
  EigenResult out;
  if (n == 0) return out;

  detail::EigenColMat m = detail::view(a);
  Eigen::SelfAdjointEigenSolver<detail::EigenColMat> solver(
      m, opt.compute_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eig_hermitian: QL iteration did not converge");
  }
  // Eigen returns ascending order.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = n - 1 - i;
  for (auto i : order) out.values.emplace_back(solver.eigenvalues()(i), 0.0);

  const double anorm = std::max(frobenius_norm(a), std::numeric_limits<double>::min());
  if (opt.compute_vectors) {
    CMatrix vecs(a.rows(), a.cols());
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::Index r = 0; r < n; ++r)
        vecs(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
            solver.eigenvectors()(r, order[static_cast<std::size_t>(c)]);
    const detail::EigenColMat v = detail::view(vecs);
    double worst = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      const double lambda = out.values[static_cast<std::size_t>(c)].real();
      worst = std::max(worst, (m * v.col(c) - lambda * v.col(c)).norm());
    }
    out.residual = worst / anorm;
    out.vectors = std::move(vecs);
  } else {
    out.residual = 0.0;
  }
  if (out.residual > opt.residual_tolerance) {
    std::ostringstream os;
    os << "eig_hermitian: residual " << out.residual << " exceeds tolerance";
    throw NumericalError(os.str());
  }
  return out;
}

/// General complex eigenvalues via Hessenberg reduction and shifted QR
/// (complex Schur form). Values are unordered.
inline EigenResult eig_general(const CMatrix& a, const EigenOptions& opt = {.compute_vectors = false}) {
  if (!a.square()) throw DimensionError("eig_general: matrix is not square");
  const auto n = static_cast<Eigen::Index>(a.rows());
  EigenResult out;
  if (n == 0) return out;

  const detail::EigenColMat m = detail::view(a);
  const double anorm = std::max(m.norm(), std::numeric_limits<double>::min());
  const auto cap = static_cast<Eigen::Index>(opt.sweeps_per_dimension) * n;

  if (opt.compute_vectors) {
    Eigen::ComplexEigenSolver<detail::EigenColMat> solver;
    solver.setMaxIterations(cap);
    solver.compute(m, true);
    if (solver.info() != Eigen::Success) {
      throw NumericalError("eig_general: shifted QR did not converge within the sweep cap");
    }
    CMatrix vecs = detail::from_eigen(solver.eigenvectors());
    double worst = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto v = solver.eigenvectors().col(c);
      worst = std::max(worst, (m * v - solver.eigenvalues()(c) * v).norm() / std::max(v.norm(), 1e-300));
      out.values.push_back(solver.eigenvalues()(c));
    }
    out.residual = worst / anorm;
    out.vectors = std::move(vecs);
  } else {
    Eigen::ComplexSchur<detail::EigenColMat> schur;
    schur.setMaxIterations(cap);
    schur.compute(m, true);
    if (schur.info() != Eigen::Success) {
      throw NumericalError("eig_general: shifted QR did not converge within the sweep cap");
    }
    const auto& t = schur.matrixT();
    const auto& u = schur.matrixU();
    out.residual = (u * t * u.adjoint() - m).norm() / anorm;
    for (Eigen::Index i = 0; i < n; ++i) out.values.push_back(t(i, i));
  }
  if (out.residual > opt.residual_tolerance) {
    std::ostringstream os;
    os << "eig_general: Schur backcheck residual " << out.residual << " exceeds tolerance";
    throw NumericalError(os.str());
  }
  return out;
}

inline double spectral_radius(const CMatrix& a) {
  double r = 0.0;
  for (const auto& l : eig_general(a).values) r = std::max(r, std::abs(l));
  return r;
}

struct SolveOptions {
  double condition_cap = 1e12;
  double residual_tolerance = 1e-10;
};

namespace detail {

inline void check_solvable(const CMatrix& a, const Eigen::PartialPivLU<EigenColMat>& lu, const SolveOptions& opt) {
  const double rcond = lu.rcond();
  if (!(rcond > 0.0) || 1.0 / rcond > opt.condition_cap) {
    std::ostringstream os;
    os << "solve: matrix is singular or ill-conditioned (condition estimate "
       << (rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity()) << ", cap " << opt.condition_cap
       << ")";
    throw NumericalError(os.str());
  }
  (void)a;
}

}  // namespace detail

inline CMatrix solve(const CMatrix& a, const CMatrix& b, const SolveOptions& opt = {}) {
  if (!a.square()) throw DimensionError("solve: matrix is not square");
  if (a.rows() != b.rows()) throw DimensionError("solve: right-hand side has wrong row count");
  const detail::EigenColMat m = detail::view(a);
  Eigen::PartialPivLU<detail::EigenColMat> lu(m);
  detail::check_solvable(a, lu, opt);
  const detail::EigenColMat rhs = detail::view(b);
  detail::EigenColMat x = lu.solve(rhs);
  // one step of iterative refinement
  x += lu.solve(rhs - m * x);
  const double res = (m * x - rhs).norm();
  if (res > opt.residual_tolerance * m.norm() * std::max(x.norm(), 1e-300)) {
    std::ostringstream os;
    os << "solve: residual " << res << " exceeds tolerance";
    throw NumericalError(os.str());
  }
  return detail::from_eigen(x);
}

inline CVector solve(const CMatrix& a, std::span<const Complex> b, const SolveOptions& opt = {}) {
  CMatrix rhs(b.size(), 1, CVector(b.begin(), b.end()));
  const CMatrix x = solve(a, rhs, opt);
  return CVector(x.entries().begin(), x.entries().end());
}

}  // namespace puaclms::algebra
