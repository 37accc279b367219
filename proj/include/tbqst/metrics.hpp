#pragma once

// Figures of merit for reconstructed states and the depolarized-state
// critical values used to judge entangled qudits.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "tbqst/states.hpp"

namespace tbqst {

/// Eigenvalues at or below this count as zero in entropies and fidelity.
inline constexpr double kEigenZero = 1e-14;

inline void require_same_dim(const DensityOperator& a, const DensityOperator& b) {
  if (a.dim() != b.dim())
    throw ShapeError("states have dimensions " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
}

namespace detail {

inline Matrix sqrt_dropping_zeros(const Matrix& a) {
  const EigenSystem es = eig_hermitian(a);
  RealVector roots(es.values.size());
  for (Eigen::Index i = 0; i < roots.size(); ++i) roots(i) = es.values(i) > kEigenZero ? std::sqrt(es.values(i)) : 0.0;
  return from_spectrum(es, roots);
}

}  // namespace detail

/// [Tr sqrt(sqrt(sigma) rho sqrt(sigma))]^2, evaluated as the squared sum of
/// singular values of sqrt(rho) sqrt(sigma).
inline double fidelity(const DensityOperator& rho, const DensityOperator& sigma) {
  require_same_dim(rho, sigma);
  const Matrix m = detail::sqrt_dropping_zeros(rho.matrix()) * detail::sqrt_dropping_zeros(sigma.matrix());
  const double tr = Eigen::JacobiSVD<Matrix>(m).singularValues().sum();
  return std::clamp(tr * tr, 0.0, 1.0);
}

/// <psi|rho|psi> for a pure reference state.
inline double fidelity_pure(const DensityOperator& rho, const Vector& psi) {
  if (psi.size() != rho.dim()) throw ShapeError("pure state dimension does not match");
  return std::clamp((psi.adjoint() * rho.matrix() * psi)(0, 0).real(), 0.0, 1.0);
}

/// Half the sum of |eigenvalues| of rho - sigma.
inline double trace_distance(const DensityOperator& rho, const DensityOperator& sigma) {
  require_same_dim(rho, sigma);
  const RealVector vals = eig_hermitian(hermitian_part(rho.matrix() - sigma.matrix())).values;
  return std::clamp(0.5 * vals.cwiseAbs().sum(), 0.0, 1.0);
}

inline double linear_entropy(const DensityOperator& rho) {
  return 1.0 - trace_product(rho.matrix(), rho.matrix()).real();
}

/// -Tr(rho log2 rho).
inline double von_neumann_entropy(const DensityOperator& rho) {
  const RealVector vals = eig_hermitian(rho.matrix()).values;
  double h = 0;
  for (Eigen::Index i = 0; i < vals.size(); ++i)
    if (vals(i) > kEigenZero) h -= vals(i) * std::log2(vals(i));
  return h;
}

/// H(rho) - H(rho_X); negative values certify entanglement.
inline double conditional_entropy(const DensityOperator& rho_joint, Side side) {
  return von_neumann_entropy(rho_joint) - von_neumann_entropy(reduced_state(rho_joint, side));
}

struct PhaseTarget {
  double phi = 0.0;
  double fidelity = 0.0;
};

/// phi in [0, 2 pi) maximizing F(rho, MES(d, phi)): 256-point grid, then
/// golden-section refinement to 1e-8. A flat grid returns phi = 0.
inline PhaseTarget best_phase_target(const DensityOperator& rho_joint, int d) {
  if (rho_joint.dim() != static_cast<Eigen::Index>(d) * d)
    throw ShapeError("best_phase_target: state is not a " + std::to_string(d) + "x" + std::to_string(d) + " joint state");
  constexpr int kGrid = 256;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  auto f = [&](double phi) { return fidelity_pure(rho_joint, mes_state(d, phi).amplitudes); };

  const double spacing = two_pi / kGrid;
  int best = 0;
  double best_val = f(0.0), worst_val = best_val;
  for (int k = 1; k < kGrid; ++k) {
    const double v = f(k * spacing);
    worst_val = std::min(worst_val, v);
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }
  if (best_val - worst_val <= 1e-12) return {0.0, best_val};

  const double inv_golden = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = (best - 1) * spacing, b = (best + 1) * spacing;
  double c = b - inv_golden * (b - a), e = a + inv_golden * (b - a);
  double fc = f(c), fe = f(e);
  while (b - a > 1e-8) {
    if (fc >= fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - inv_golden * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + inv_golden * (b - a);
      fe = f(e);
    }
  }
  double phi = 0.5 * (a + b);
  double val = f(phi);
  if (val < best_val) {
    phi = best * spacing;
    val = best_val;
  }
  phi = std::fmod(phi, two_pi);
  if (phi < 0) phi += two_pi;
  return {phi, val};
}

struct MeritReport {
  double fidelity = 0;
  double trace_distance = 0;
  double linear_entropy = 0;
  double von_neumann_entropy = 0;
  double conditional_entropy_signal = 0;
  double conditional_entropy_idler = 0;
  double best_phi = 0;
};

/// All figures of merit of a two-qudit state against MES(d, phi).
inline MeritReport merit_report(const DensityOperator& rho_joint, int d, double phi) {
  const DensityOperator target = mes_state(d, phi).density();
  MeritReport r;
  r.fidelity = fidelity(rho_joint, target);
  r.trace_distance = trace_distance(rho_joint, target);
  r.linear_entropy = linear_entropy(rho_joint);
  r.von_neumann_entropy = von_neumann_entropy(rho_joint);
  r.conditional_entropy_signal = conditional_entropy(rho_joint, Side::signal);
  r.conditional_entropy_idler = conditional_entropy(rho_joint, Side::idler);
  r.best_phi = phi;
  return r;
}

/// Report against the fidelity-maximizing MES phase.
inline MeritReport merit_report(const DensityOperator& rho_joint, int d) {
  return merit_report(rho_joint, d, best_phase_target(rho_joint, d).phi);
}

/// Merits of depolarized(MES(d, 0), p) against MES(d, 0).
inline MeritReport cglmp_critical_table(double p, int d) {
  const DensityOperator mes = mes_state(d, 0.0).density();
  return merit_report(depolarized(mes, p), d, 0.0);
}

/// Aligned text table of a report, one quantity per line.
inline std::string format_report(const MeritReport& r, const std::string& heading = "Value") {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-24s %12s\n"
                "%-24s %12.6f\n%-24s %12.6f\n%-24s %12.6f\n%-24s %12.6f\n"
                "%-24s %12.6f\n%-24s %12.6f\n%-24s %12.6f\n",
                "Quantity", heading.c_str(), "Fidelity", r.fidelity, "Trace distance", r.trace_distance,
                "Linear entropy", r.linear_entropy, "Von Neumann entropy", r.von_neumann_entropy,
                "Conditional entropy |s", r.conditional_entropy_signal, "Conditional entropy |i",
                r.conditional_entropy_idler, "Target phase", r.best_phi);
  return buf;
}

}  // namespace tbqst
