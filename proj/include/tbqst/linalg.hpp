#pragma once

// Dense complex linear algebra and the density-operator value type.
//
// Matrices are Eigen dynamic complex matrices. Indices are (row, col);
// serialized forms use row-major nested arrays. In tensor products the first
// factor is always the signal subsystem, so the joint index of (s, i) is
// s * dim_idler + i.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "tbqst/errors.hpp"

namespace tbqst {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

namespace tol {
inline constexpr double hermitian = 1e-10;
inline constexpr double trace = 1e-10;
inline constexpr double psd = 1e-10;
inline constexpr double spectral = 1e-8;
/// Eigenvalues in [-clamp, 0) are treated as zero by sqrt and log.
inline constexpr double clamp = 1e-8;
}  // namespace tol

inline std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline bool all_finite(const Matrix& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      if (!std::isfinite(m(r, c).real()) || !std::isfinite(m(r, c).imag())) return false;
  return true;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + shape_string(a) + " times " + shape_string(b));
  return a * b;
}

inline Matrix adjoint(const Matrix& a) { return a.adjoint(); }

inline Matrix identity(Eigen::Index d) { return Matrix::Identity(d, d); }

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Max elementwise |a - a^dagger|; infinity for non-square input.
inline double hermiticity_error(const Matrix& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  return max_abs(a - a.adjoint());
}

inline bool is_hermitian(const Matrix& a, double tolerance = tol::hermitian) {
  return hermiticity_error(a) <= tolerance;
}

inline Matrix hermitian_part(const Matrix& a) { return (a + a.adjoint()) * 0.5; }

struct EigenSystem {
  RealVector values;  // ascending
  Matrix vectors;     // orthonormal columns
};

inline EigenSystem eig_hermitian(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("eig_hermitian: non-square " + shape_string(a));
  if (!is_hermitian(a))
    throw ContractViolation("eig_hermitian: input not Hermitian (error " +
                            std::to_string(hermiticity_error(a)) + ")");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian_part(a));
  if (solver.info() != Eigen::Success) throw NumericalError("eig_hermitian: no convergence");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

inline Matrix from_spectrum(const EigenSystem& es, const RealVector& values) {
  return es.vectors * values.cast<Complex>().asDiagonal() * es.vectors.adjoint();
}

inline Matrix matrix_sqrt_psd(const Matrix& a) {
  EigenSystem es = eig_hermitian(a);
  if (es.values.size() > 0 && es.values.minCoeff() < -tol::clamp)
    throw NotPsdError("matrix_sqrt_psd: eigenvalue " + std::to_string(es.values.minCoeff()));
  RealVector roots = es.values.cwiseMax(0.0).cwiseSqrt();
  return from_spectrum(es, roots);
}

/// Kronecker product a (x) b; a is the signal factor.
inline Matrix tensor(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return out;
}

inline Vector tensor(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index r = 0; r < a.size(); ++r) out.segment(r * b.size(), b.size()) = a(r) * b;
  return out;
}

inline Complex trace_product(const Matrix& a, const Matrix& b) {
  // Tr(a b) without forming the product.
  return a.transpose().cwiseProduct(b).sum();
}

/// Physical density operator: Hermitian, unit trace, positive semidefinite.
class DensityOperator {
 public:
  explicit DensityOperator(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
      throw ShapeError("density operator must be square and non-empty, got " + shape_string(m_));
    if (!all_finite(m_)) throw DomainError("density operator has non-finite entries");
    if (!is_hermitian(m_))
      throw ContractViolation("density operator not Hermitian (error " +
                              std::to_string(hermiticity_error(m_)) + ")");
    const Complex tr = m_.trace();
    if (std::abs(tr - Complex(1.0)) > tol::trace)
      throw ContractViolation("density operator trace " + std::to_string(tr.real()) + " != 1");
    const double min_eig = eig_hermitian(m_).values.minCoeff();
    if (min_eig < -tol::psd)
      throw NotPsdError("density operator eigenvalue " + std::to_string(min_eig) + " < 0");
  }

  static DensityOperator maximally_mixed(Eigen::Index d) {
    return DensityOperator(identity(d) / static_cast<double>(d));
  }

  /// |psi><psi| for a normalized psi.
  static DensityOperator from_pure(const Vector& psi) {
    return DensityOperator(psi * psi.adjoint());
  }

  /// Rescales to unit trace and symmetrizes before validating.
  static DensityOperator normalized(const Matrix& m) {
    const double tr = m.trace().real();
    if (!(tr > 0)) throw DomainError("cannot normalize operator with trace " + std::to_string(tr));
    return DensityOperator(hermitian_part(m) / tr);
  }

  Eigen::Index dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }

 private:
  Matrix m_;
};

}  // namespace tbqst
