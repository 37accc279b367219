#pragma once

// Generalized Gell-Mann operator basis and the linear design matrix
// A(i, j) = Tr(E_j G_i) mapping basis coordinates to expected counts.

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/SVD>

#include "tbqst/linalg.hpp"

namespace tbqst {

/// Identity first, then symmetric, antisymmetric, and diagonal generators.
/// Non-identity members satisfy Tr(G_i G_j) = 2 delta_ij.
struct GellMannBasis {
  Eigen::Index dim = 0;
  std::vector<Matrix> matrices;

  std::size_t size() const noexcept { return matrices.size(); }
  const Matrix& operator[](std::size_t i) const { return matrices[i]; }
};

inline GellMannBasis build_basis(Eigen::Index d) {
  if (d < 2) throw DomainError("Gell-Mann basis needs d >= 2, got " + std::to_string(d));
  GellMannBasis basis;
  basis.dim = d;
  basis.matrices.reserve(static_cast<std::size_t>(d * d));
  basis.matrices.push_back(identity(d));

  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index k = j + 1; k < d; ++k) {
      Matrix g = Matrix::Zero(d, d);
      g(j, k) = 1.0;
      g(k, j) = 1.0;
      basis.matrices.push_back(std::move(g));
    }
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index k = j + 1; k < d; ++k) {
      Matrix g = Matrix::Zero(d, d);
      g(j, k) = Complex(0.0, -1.0);
      g(k, j) = Complex(0.0, 1.0);
      basis.matrices.push_back(std::move(g));
    }
  for (Eigen::Index l = 1; l < d; ++l) {
    Matrix g = Matrix::Zero(d, d);
    const double scale = std::sqrt(2.0 / static_cast<double>(l * (l + 1)));
    for (Eigen::Index j = 0; j < l; ++j) g(j, j) = scale;
    g(l, l) = -scale * static_cast<double>(l);
    basis.matrices.push_back(std::move(g));
  }
  return basis;
}

/// Coordinates of an arbitrary square operator: g_0 = Tr(m)/d, g_i = Tr(m G_i)/2.
inline RealVector decompose_operator(const Matrix& m, const GellMannBasis& basis) {
  if (m.rows() != basis.dim || m.cols() != basis.dim)
    throw ShapeError("decompose: operator " + shape_string(m) + " vs basis dim " +
                     std::to_string(basis.dim));
  RealVector g(static_cast<Eigen::Index>(basis.size()));
  g(0) = m.trace().real() / static_cast<double>(basis.dim);
  for (std::size_t i = 1; i < basis.size(); ++i)
    g(static_cast<Eigen::Index>(i)) = 0.5 * trace_product(m, basis[i]).real();
  return g;
}

inline RealVector decompose(const DensityOperator& rho, const GellMannBasis& basis) {
  return decompose_operator(rho.matrix(), basis);
}

inline Matrix compose(const RealVector& g, const GellMannBasis& basis) {
  if (static_cast<std::size_t>(g.size()) != basis.size())
    throw ShapeError("compose: " + std::to_string(g.size()) + " coordinates for basis of size " +
                     std::to_string(basis.size()));
  Matrix out = Matrix::Zero(basis.dim, basis.dim);
  for (std::size_t i = 0; i < basis.size(); ++i) out += g(static_cast<Eigen::Index>(i)) * basis[i];
  return out;
}

inline constexpr double kRankThreshold = 1e-9;

/// Count of singular values above threshold * largest.
inline int numerical_rank(const RealVector& singular_values, double threshold = kRankThreshold) {
  if (singular_values.size() == 0) return 0;
  const double cutoff = threshold * singular_values.maxCoeff();
  int rank = 0;
  for (Eigen::Index i = 0; i < singular_values.size(); ++i)
    if (singular_values(i) > cutoff) ++rank;
  return rank;
}

struct DesignMatrix {
  RealMatrix entries;  // rows: basis index i, cols: measurement j
  RealVector singular_values;
  int rank = 0;
  double max_imaginary_residue = 0.0;
};

inline DesignMatrix design_matrix(std::span<const Matrix> operators, const GellMannBasis& basis) {
  DesignMatrix out;
  out.entries.resize(static_cast<Eigen::Index>(basis.size()),
                     static_cast<Eigen::Index>(operators.size()));
  for (std::size_t j = 0; j < operators.size(); ++j) {
    const Matrix& e = operators[j];
    if (e.rows() != basis.dim || e.cols() != basis.dim)
      throw ShapeError("design_matrix: operator " + std::to_string(j) + " is " + shape_string(e));
    for (std::size_t i = 0; i < basis.size(); ++i) {
      const Complex a = trace_product(e, basis[i]);
      out.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a.real();
      out.max_imaginary_residue = std::max(out.max_imaginary_residue, std::abs(a.imag()));
    }
  }
  if (out.entries.size() > 0) {
    Eigen::BDCSVD<RealMatrix> svd(out.entries);
    out.singular_values = svd.singularValues();
  }
  out.rank = numerical_rank(out.singular_values);
  return out;
}

}  // namespace tbqst
