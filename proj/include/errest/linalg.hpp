#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>

#include <complex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace errest {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

/// Thrown on contract violations (dimension mismatches, non-PD inputs, ...).
class LinalgError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw LinalgError(what);
}

/// In-place lower Cholesky of a Hermitian matrix. Returns -1 on success,
/// otherwise the index of the first non-positive pivot.
inline int cholesky_pivot_scan(Matrix m) {
  const int n = static_cast<int>(m.rows());
  for (int k = 0; k < n; ++k) {
    const double d = std::real(m(k, k));
    if (!(d > 0.0) || !std::isfinite(d)) return k;
    const double l = std::sqrt(d);
    m(k, k) = l;
    for (int i = k + 1; i < n; ++i) m(i, k) /= l;
    for (int j = k + 1; j < n; ++j)
      for (int i = j; i < n; ++i) m(i, j) -= m(i, k) * std::conj(m(j, k));
  }
  return -1;
}

}  // namespace detail

/// A finite-dimensional Hilbert space C^dim carrying a Hermitian
/// positive-definite weight. Provides the weighted and inverse-weighted
/// inner products used throughout; the factorization is computed once.
class WeightedSpace {
public:
  explicit WeightedSpace(Matrix weight) : weight_(std::move(weight)) {
    detail::require(weight_.rows() == weight_.cols(),
                    "WeightedSpace: weight must be square");
    const double scale = weight_.cwiseAbs().maxCoeff();
    const double herm_defect = (weight_ - weight_.adjoint()).cwiseAbs().maxCoeff();
    detail::require(herm_defect <= 1e-12 * std::max(1.0, scale),
                    "WeightedSpace: weight is not Hermitian (defect " +
                        std::to_string(herm_defect) + ")");
    weight_ = 0.5 * (weight_ + weight_.adjoint().eval());
    llt_.compute(weight_);
    if (llt_.info() != Eigen::Success) {
      const int pivot = detail::cholesky_pivot_scan(weight_);
      throw LinalgError("WeightedSpace: weight is not positive definite (pivot " +
                        std::to_string(pivot) + ")");
    }
  }

  static WeightedSpace identity(int dim) {
    return WeightedSpace(Matrix::Identity(dim, dim));
  }

  int dim() const { return static_cast<int>(weight_.rows()); }
  const Matrix& weight() const { return weight_; }

  Vector apply(const Vector& u) const { return weight_ * u; }
  Vector apply_inverse(const Vector& u) const { return llt_.solve(u); }

  /// <W u, v>, conjugate-linear in the second argument.
  Complex inner(const Vector& u, const Vector& v) const {
    detail::require(u.size() == dim() && v.size() == dim(),
                    "WeightedSpace::inner: dimension mismatch");
    return (v.adjoint() * (weight_ * u)).value();
  }
  double norm_sq(const Vector& u) const { return std::real(inner(u, u)); }

  /// <W^{-1} u, v>.
  Complex inner_inv(const Vector& u, const Vector& v) const {
    detail::require(u.size() == dim() && v.size() == dim(),
                    "WeightedSpace::inner_inv: dimension mismatch");
    return (v.adjoint() * llt_.solve(u)).value();
  }
  double norm_inv_sq(const Vector& u) const { return std::real(inner_inv(u, u)); }

  /// Space with weight c*W, c > 0.
  WeightedSpace scaled(double c) const {
    detail::require(c > 0.0, "WeightedSpace::scaled: factor must be positive");
    return WeightedSpace(Matrix(c * weight_));
  }

  /// Space with weight W^{-1}, materialized.
  WeightedSpace inverse() const {
    return WeightedSpace(llt_.solve(Matrix::Identity(dim(), dim())));
  }

private:
  Matrix weight_;
  Eigen::LLT<Matrix> llt_;
};

inline Complex weighted_inner(const Vector& u, const Vector& v, const WeightedSpace& w) {
  return w.inner(u, v);
}
inline double weighted_norm_sq(const Vector& u, const WeightedSpace& w) {
  return w.norm_sq(u);
}

/// A bounded operator C^n -> C^m together with its adjoint (conjugate
/// transpose). In the finite-dimensional setting the domains of the operator
/// and its adjoint are the full spaces.
class Operator {
public:
  explicit Operator(Matrix a) : a_(std::move(a)) {}

  int rows() const { return static_cast<int>(a_.rows()); }
  int cols() const { return static_cast<int>(a_.cols()); }

  const Matrix& matrix() const { return a_; }
  Matrix adjoint() const { return a_.adjoint(); }

  Vector apply(const Vector& u) const {
    detail::require(u.size() == cols(), "Operator::apply: dimension mismatch");
    return a_ * u;
  }
  Vector apply_adjoint(const Vector& v) const {
    detail::require(v.size() == rows(), "Operator::apply_adjoint: dimension mismatch");
    return a_.adjoint() * v;
  }

private:
  Matrix a_;
};

/// Threshold above which dense HPD solves switch to preconditioned CG.
inline constexpr int kDirectSolveMaxDim = 2000;

/// Solves M x = b for Hermitian positive-definite M. Direct factorization up
/// to kDirectSolveMaxDim, diagonal-preconditioned CG above (relative residual
/// <= 1e-10, at most 10*dim iterations). Deterministic for fixed inputs.
inline Vector solve_hpd(const Matrix& m, const Vector& b) {
  detail::require(m.rows() == m.cols(), "solve_hpd: matrix must be square");
  detail::require(m.rows() == b.size(), "solve_hpd: dimension mismatch");
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Vector::Zero(b.size());

  Vector x;
  if (m.rows() <= kDirectSolveMaxDim) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) {
      const int pivot = detail::cholesky_pivot_scan(m);
      throw LinalgError("solve_hpd: factorization breakdown at pivot " +
                        std::to_string(pivot));
    }
    x = llt.solve(b);
    // One refinement step keeps the 1e-10 residual contract with headroom.
    x += llt.solve(Vector(b - m * x));
  } else {
    Eigen::ConjugateGradient<Matrix, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-12);
    cg.setMaxIterations(10 * m.rows());
    cg.compute(m);
    x = cg.solve(b);
  }
  const double rel = (m * x - b).norm() / bnorm;
  detail::require(rel <= 1e-10, "solve_hpd: residual " + std::to_string(rel) +
                                    " exceeds contract");
  return x;
}

/// Solves M x = b for a general square complex M (LU with one step of
/// iterative refinement). Used for the non-Hermitian Case II systems.
inline Vector solve_general(const Matrix& m, const Vector& b) {
  detail::require(m.rows() == m.cols(), "solve_general: matrix must be square");
  detail::require(m.rows() == b.size(), "solve_general: dimension mismatch");
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Vector::Zero(b.size());
  Eigen::PartialPivLU<Matrix> lu(m);
  Vector x = lu.solve(b);
  x += lu.solve(Vector(b - m * x));
  const double rel = (m * x - b).norm() / bnorm;
  detail::require(rel <= 1e-10,
                  "solve_general: residual " + std::to_string(rel) + " exceeds contract");
  return x;
}

/// Orthonormal basis of the numerical kernel {v : |Mv| <= tol*|M|*|v|},
/// computed from a singular value decomposition.
inline std::vector<Vector> null_space_basis(const Matrix& m, double tol) {
  detail::require(tol > 0.0, "null_space_basis: tol must be positive");
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const double smax = sigma.size() > 0 ? sigma(0) : 0.0;
  std::vector<Vector> basis;
  // Columns of V beyond min(rows, cols) carry implicit zero singular values.
  for (int i = 0; i < m.cols(); ++i) {
    const double s = i < sigma.size() ? sigma(i) : 0.0;
    if (smax == 0.0 || s <= tol * smax) basis.push_back(svd.matrixV().col(i));
  }
  return basis;
}

/// Strictly convex quadratic  q(z) = sum_k |B_k z - c_k|^2_{W_k}  assembled
/// term by term; solve() returns the unique stationary point via the normal
/// equations, with a relative gradient check.
class LeastSquares {
public:
  LeastSquares& add_term(const Matrix& op, const Vector& data, const WeightedSpace& w) {
    detail::require(op.rows() == data.size() && op.rows() == w.dim(),
                    "LeastSquares::add_term: dimension mismatch");
    const Matrix wb = w.weight() * op;
    if (hessian_.size() == 0) {
      hessian_ = op.adjoint() * wb;
      rhs_ = op.adjoint() * (w.weight() * data);
    } else {
      detail::require(op.cols() == hessian_.cols(),
                      "LeastSquares::add_term: unknown-count mismatch");
      hessian_ += op.adjoint() * wb;
      rhs_ += op.adjoint() * (w.weight() * data);
    }
    return *this;
  }

  Vector solve() const {
    detail::require(hessian_.size() > 0, "LeastSquares::solve: no terms");
    Vector z;
    try {
      z = solve_hpd(hessian_, rhs_);
    } catch (const LinalgError&) {
      throw LinalgError("LeastSquares::solve: quadratic form is not strictly convex");
    }
    const double grad = (hessian_ * z - rhs_).norm();
    detail::require(grad <= 1e-10 * std::max(1.0, rhs_.norm()),
                    "LeastSquares::solve: gradient check failed");
    return z;
  }

private:
  Matrix hessian_;
  Vector rhs_;
};

/// Deterministic complex sample from the closed unit disk.
inline Complex random_unit_disk(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = std::sqrt(unit(rng));
  const double theta = 2.0 * M_PI * unit(rng);
  return std::polar(r, theta);
}

inline Matrix random_complex_matrix(std::mt19937_64& rng, int rows, int cols) {
  Matrix a(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) a(i, j) = random_unit_disk(rng);
  return a;
}

inline Vector random_complex_vector(std::mt19937_64& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = random_unit_disk(rng);
  return v;
}

/// Real SPD weight B^T B + I with B ~ U(-1,1)^{n x n}.
inline Matrix random_spd_weight(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  RealMatrix b(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) b(i, j) = sym(rng);
  RealMatrix w = b.transpose() * b + RealMatrix::Identity(n, n);
  return w.cast<Complex>();
}

}  // namespace errest
