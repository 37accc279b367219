#pragma once

// Reference states: maximally entangled time-bin pairs, depolarized
// mixtures, local phase rotations and reduced states.

#include <cmath>

#include "tbqst/linalg.hpp"

namespace tbqst {

enum class Side { signal, idler };

inline std::string to_string(Side s) { return s == Side::signal ? "signal" : "idler"; }

struct PureState {
  Vector amplitudes;

  Eigen::Index dim() const noexcept { return amplitudes.size(); }
  DensityOperator density() const { return DensityOperator::from_pure(amplitudes); }
};

/// (1/sqrt(d)) sum_k exp(i phi k) |k>_s |k>_i over the d^2 joint space.
inline PureState mes_state(int d, double phi) {
  if (d < 2) throw DomainError("maximally entangled state needs d >= 2");
  Vector psi = Vector::Zero(static_cast<Eigen::Index>(d) * d);
  const double amp = 1.0 / std::sqrt(static_cast<double>(d));
  for (int k = 0; k < d; ++k) psi(k * d + k) = amp * std::polar(1.0, phi * k);
  return {psi};
}

/// p sigma + (1 - p) I / dim.
inline DensityOperator depolarized(const DensityOperator& sigma, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("mixing probability outside [0, 1]");
  const Eigen::Index n = sigma.dim();
  return DensityOperator(p * sigma.matrix() + (1.0 - p) * identity(n) / static_cast<double>(n));
}

/// sum_k exp(-i phi' k) |k><k|.
inline Matrix local_phase_unitary(int d, double phi_prime) {
  Matrix u = Matrix::Zero(d, d);
  for (int k = 0; k < d; ++k) u(k, k) = std::polar(1.0, -phi_prime * k);
  return u;
}

/// (U (x) I) rho (U (x) I)^dagger.
inline DensityOperator apply_signal_unitary(const DensityOperator& rho, const Matrix& u) {
  const Eigen::Index d = u.rows();
  if (d * d != rho.dim()) throw ShapeError("signal unitary does not match joint dimension");
  const Matrix full = tensor(u, identity(d));
  return DensityOperator(hermitian_part(full * rho.matrix() * full.adjoint()));
}

/// Traces out `traced`; the result lives on the other side.
inline Matrix partial_trace_matrix(const Matrix& rho, Eigen::Index d, Side traced) {
  if (rho.rows() != d * d || rho.cols() != d * d)
    throw ShapeError("partial trace: " + shape_string(rho) + " is not a " + std::to_string(d) +
                     "x" + std::to_string(d) + " joint operator");
  Matrix out = Matrix::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      for (Eigen::Index k = 0; k < d; ++k)
        out(a, b) += traced == Side::idler ? rho(a * d + k, b * d + k) : rho(k * d + a, k * d + b);
  return out;
}

inline DensityOperator partial_trace(const DensityOperator& rho, Side traced) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(rho.dim()))));
  if (d * d != rho.dim())
    throw ShapeError("partial trace: dimension " + std::to_string(rho.dim()) + " is not a square");
  return DensityOperator(hermitian_part(partial_trace_matrix(rho.matrix(), d, traced)));
}

/// Reduced state of `side`.
inline DensityOperator reduced_state(const DensityOperator& rho, Side side) {
  return partial_trace(rho, side == Side::signal ? Side::idler : Side::signal);
}

}  // namespace tbqst
