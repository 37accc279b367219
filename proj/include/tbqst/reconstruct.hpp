#pragma once

// State reconstruction from classwise counts: linear inversion of the
// design-matrix equation and maximum-likelihood estimation over a
// lower-triangular factor R with rho = R^dagger R / Tr(R^dagger R) and
// N = Tr(R^dagger R).

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "tbqst/gellmann.hpp"
#include "tbqst/optim.hpp"
#include "tbqst/povm_dedup.hpp"

namespace tbqst {

/// Real parameters of a lower-triangular R: the d diagonal entries, then
/// (re, im) of each strictly-lower entry in row-major order.
struct TriangularFactor {
  Eigen::Index dim = 0;
  RealVector params;

  static Eigen::Index param_count(Eigen::Index d) { return d * d; }

  Matrix to_matrix() const {
    Matrix r = Matrix::Zero(dim, dim);
    for (Eigen::Index k = 0; k < dim; ++k) r(k, k) = params(k);
    Eigen::Index p = dim;
    for (Eigen::Index row = 1; row < dim; ++row)
      for (Eigen::Index col = 0; col < row; ++col, p += 2) r(row, col) = Complex(params(p), params(p + 1));
    return r;
  }

  /// Upper entries must be zero; the imaginary part of the diagonal is dropped.
  static TriangularFactor from_matrix(const Matrix& r) {
    if (r.rows() != r.cols()) throw ShapeError("triangular factor must be square");
    const Eigen::Index d = r.rows();
    for (Eigen::Index row = 0; row < d; ++row)
      for (Eigen::Index col = row + 1; col < d; ++col)
        if (r(row, col) != Complex(0.0)) throw DomainError("triangular factor has upper entries");
    TriangularFactor f{d, RealVector(param_count(d))};
    for (Eigen::Index k = 0; k < d; ++k) f.params(k) = r(k, k).real();
    Eigen::Index p = d;
    for (Eigen::Index row = 1; row < d; ++row)
      for (Eigen::Index col = 0; col < row; ++col, p += 2) {
        f.params(p) = r(row, col).real();
        f.params(p + 1) = r(row, col).imag();
      }
    return f;
  }

  /// Lower-triangular R with R^dagger R = a for Hermitian positive-definite a.
  static TriangularFactor factorize(const Matrix& a) {
    const Matrix reversed = a.reverse();
    Eigen::LLT<Matrix> llt(hermitian_part(reversed));
    if (llt.info() != Eigen::Success) throw NotPsdError("factorize: operator not positive definite");
    const Matrix lower = llt.matrixL();
    Matrix r = Matrix(lower.adjoint()).reverse();
    for (Eigen::Index row = 0; row < r.rows(); ++row)
      for (Eigen::Index col = row + 1; col < r.cols(); ++col) r(row, col) = 0.0;
    return from_matrix(r);
  }

  Matrix gram() const {
    const Matrix r = to_matrix();
    return r.adjoint() * r;
  }
};

enum class Method { linear, mle };

inline std::string to_string(Method m) { return m == Method::linear ? "linear" : "mle"; }

struct ReconstructionResult {
  Matrix rho;              // unit trace, Hermitian
  double photons = 0.0;    // estimated N
  double likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  Method method = Method::mle;
  bool physical = false;   // min eigenvalue >= -1e-10
  std::optional<TriangularFactor> factor;

  DensityOperator density() const { return DensityOperator(rho); }
};

/// Floor applied to expected counts inside the residual and the log.
inline constexpr double kExpectedCountFloor = 1e-9;

/// L(R) = sum_j [(m_j - n_j)^2 / n_j + ln n_j] with n_j = Tr(E_j R^dagger R).
class LikelihoodModel {
 public:
  LikelihoodModel(const std::vector<Matrix>& operators, RealVector counts, double floor = kExpectedCountFloor)
      : counts_(std::move(counts)), floor_(floor) {
    if (operators.empty()) throw DomainError("likelihood needs at least one measurement class");
    if (static_cast<std::size_t>(counts_.size()) != operators.size())
      throw ShapeError("likelihood: " + std::to_string(counts_.size()) + " counts for " +
                       std::to_string(operators.size()) + " classes");
    dim_ = operators.front().rows();
    flat_.resize(static_cast<Eigen::Index>(operators.size()), dim_ * dim_);
    for (std::size_t j = 0; j < operators.size(); ++j) {
      const Matrix& e = operators[j];
      if (e.rows() != dim_ || e.cols() != dim_) throw ShapeError("likelihood: class operators differ in shape");
      flat_.row(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::RowVectorXcd>(e.data(), dim_ * dim_);
    }
  }

  Eigen::Index dim() const noexcept { return dim_; }
  Eigen::Index num_params() const noexcept { return dim_ * dim_; }
  const RealVector& counts() const noexcept { return counts_; }

  /// Unfloored n_j for a Gram operator T = R^dagger R.
  RealVector expected(const Matrix& gram) const {
    const Matrix t = gram.transpose();
    return (flat_ * Eigen::Map<const Eigen::VectorXcd>(t.data(), dim_ * dim_)).real();
  }

  double value_from_expected(const RealVector& n) const {
    double l = 0;
    for (Eigen::Index j = 0; j < n.size(); ++j) {
      const double e = std::max(n(j), floor_);
      const double r = counts_(j) - e;
      l += r * r / e + std::log(e);
    }
    return l;
  }

  double value(const TriangularFactor& r) const { return value_from_expected(expected(r.gram())); }

  double value(const RealVector& params) const { return value(TriangularFactor{dim_, params}); }

  /// Value and analytic gradient with respect to the factor parameters.
  double value_and_gradient(const RealVector& params, RealVector& grad) const {
    const Matrix r = TriangularFactor{dim_, params}.to_matrix();
    const RealVector n = expected(r.adjoint() * r);
    RealVector w(n.size());
    for (Eigen::Index j = 0; j < n.size(); ++j) {
      if (n(j) < floor_) {
        w(j) = 0.0;
        continue;
      }
      const double m = counts_(j);
      w(j) = 1.0 - (m * m) / (n(j) * n(j)) + 1.0 / n(j);
    }
    // dL/d conj(R) = R W with W = sum_j w_j E_j; real gradient is twice that.
    const Eigen::VectorXcd wflat = flat_.transpose() * w.cast<Complex>();
    const Matrix wmat = Eigen::Map<const Matrix>(wflat.data(), dim_, dim_);
    const Matrix g = 2.0 * r * wmat;
    grad.resize(num_params());
    for (Eigen::Index k = 0; k < dim_; ++k) grad(k) = g(k, k).real();
    Eigen::Index p = dim_;
    for (Eigen::Index row = 1; row < dim_; ++row)
      for (Eigen::Index col = 0; col < row; ++col, p += 2) {
        grad(p) = g(row, col).real();
        grad(p + 1) = g(row, col).imag();
      }
    return value_from_expected(n);
  }

 private:
  RealVector counts_;
  double floor_;
  Eigen::Index dim_ = 0;
  Eigen::MatrixXcd flat_;  // row j = vec(E_j), column-major
};

inline double likelihood(const TriangularFactor& r, const RealVector& counts,
                         const std::vector<MeasurementClass>& classes) {
  return LikelihoodModel(class_operators(classes), counts).value(r);
}

inline double min_eigenvalue(const Matrix& m) { return eig_hermitian(hermitian_part(m)).values.minCoeff(); }

/// Least-squares solution of n_j = sum_i A_ij (N g_i) with g_0 = 1/d.
inline ReconstructionResult linear_inversion(const RealVector& counts, const std::vector<Matrix>& operators,
                                             const GellMannBasis& basis) {
  if (static_cast<std::size_t>(counts.size()) != operators.size())
    throw ShapeError("linear inversion: counts and classes differ in length");
  const DesignMatrix a = design_matrix(operators, basis);
  const auto full = static_cast<int>(basis.size());
  if (a.rank < full)
    throw UnderdeterminedError("design matrix rank " + std::to_string(a.rank) + " < " + std::to_string(full));
  const RealMatrix at = a.entries.transpose();
  const RealVector x = at.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(counts);
  const double photons = static_cast<double>(basis.dim) * x(0);
  if (!(photons > 0)) throw NumericalError("linear inversion gave non-positive photon scale");

  ReconstructionResult res;
  res.method = Method::linear;
  res.photons = photons;
  res.rho = hermitian_part(compose(x / photons, basis));
  res.physical = min_eigenvalue(res.rho) >= -tol::psd;
  res.converged = true;
  LikelihoodModel model(operators, counts);
  res.likelihood = model.value_from_expected(model.expected(photons * res.rho));
  return res;
}

inline ReconstructionResult linear_inversion(const RealVector& counts, const std::vector<MeasurementClass>& classes,
                                             const GellMannBasis& basis) {
  return linear_inversion(counts, class_operators(classes), basis);
}

struct MleOptions {
  LbfgsOptions optimizer;
  double floor = kExpectedCountFloor;
  /// Eigenvalue clamp applied to the linear estimate used as a warm start.
  double init_eigen_floor = 1e-6;
};

namespace detail {

inline TriangularFactor auto_initial_factor(const RealVector& counts, const std::vector<Matrix>& operators,
                                            double eigen_floor) {
  const Eigen::Index d = operators.front().rows();
  Matrix start = identity(d) / static_cast<double>(d);
  try {
    const ReconstructionResult lin = linear_inversion(counts, operators, build_basis(d));
    EigenSystem es = eig_hermitian(lin.rho);
    RealVector vals = es.values.cwiseMax(eigen_floor);
    vals /= vals.sum();
    start = hermitian_part(from_spectrum(es, vals));
  } catch (const Error&) {
  }
  double per_photon = 0;
  for (const auto& e : operators) per_photon += trace_product(e, start).real();
  const double photons = counts.sum() / per_photon;
  return TriangularFactor::factorize(photons * start);
}

}  // namespace detail

/// Minimizes L over the triangular factor. The result is physical by
/// construction; when the optimizer stops early, `converged` is false and
/// the best iterate is returned.
inline ReconstructionResult mle_reconstruct(const RealVector& counts, const std::vector<Matrix>& operators,
                                            std::optional<TriangularFactor> init = std::nullopt,
                                            const MleOptions& options = {}) {
  if (operators.empty()) throw UnderdeterminedError("no measurement classes");
  const Eigen::Index d = operators.front().rows();
  Eigen::Index usable = 0;
  for (const auto& e : operators)
    if (e.trace().real() > 0) ++usable;
  if (usable < d * d)
    throw UnderdeterminedError(std::to_string(usable) + " usable measurement classes, need " +
                               std::to_string(d * d));
  if (static_cast<std::size_t>(counts.size()) != operators.size())
    throw ShapeError("mle: counts and classes differ in length");
  for (Eigen::Index j = 0; j < counts.size(); ++j)
    if (!(counts(j) >= 0) || !std::isfinite(counts(j))) throw DomainError("counts must be finite and >= 0");

  ReconstructionResult res;
  res.method = Method::mle;
  if (counts.sum() <= 0) {
    res.rho = identity(d) / static_cast<double>(d);
    res.physical = true;
    res.converged = false;
    return res;
  }

  const LikelihoodModel model(operators, counts, options.floor);
  TriangularFactor start = init ? *init : detail::auto_initial_factor(counts, operators, options.init_eigen_floor);
  if (start.dim != d) throw ShapeError("initial factor dimension does not match the classes");

  const OptimResult opt = minimize_lbfgs(
      [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return model.value_and_gradient(x, g); },
      start.params, options.optimizer);

  TriangularFactor best{d, opt.x};
  const Matrix gram = best.gram();
  const double photons = gram.trace().real();
  if (!(photons > 0)) throw NumericalError("likelihood minimization collapsed the factor to zero");
  res.rho = hermitian_part(gram / photons);
  res.photons = photons;
  res.likelihood = opt.f;
  res.iterations = opt.iterations;
  res.converged = opt.converged;
  res.physical = min_eigenvalue(res.rho) >= -tol::psd;
  res.factor = best;
  return res;
}

inline ReconstructionResult mle_reconstruct(const RealVector& counts, const std::vector<MeasurementClass>& classes,
                                            std::optional<TriangularFactor> init = std::nullopt,
                                            const MleOptions& options = {}) {
  return mle_reconstruct(counts, class_operators(classes), std::move(init), options);
}

}  // namespace tbqst
