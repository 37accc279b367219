#pragma once

// Measurement model of a time-bin qudit sent through K cascaded delay
// Mach-Zehnder interferometers.
//
// Stage i (1-based) has delay 2^(i-1) slots and phase theta_i. Light
// propagates through the largest delay first. The x-port chain through all
// stages ends on detector D1; the y-port of the first (largest-delay) stage
// goes to D2. Every other y-port is terminated and only enters the
// completeness bookkeeping.

#include <cmath>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tbqst/linalg.hpp"

namespace tbqst {

enum class Detector { D1, D2 };

inline std::string to_string(Detector d) { return d == Detector::D1 ? "D1" : "D2"; }

inline Detector parse_detector(const std::string& s) {
  if (s == "D1") return Detector::D1;
  if (s == "D2") return Detector::D2;
  throw DomainError("unknown detector '" + s + "'");
}

/// Phase differences in propagation order: thetas[0] is theta_K (largest
/// delay), thetas.back() is theta_1.
struct PhaseSetting {
  std::vector<double> thetas;

  int num_stages() const noexcept { return static_cast<int>(thetas.size()); }

  /// theta_i for the stage with delay 2^(i-1).
  double theta(int stage) const {
    if (stage < 1 || stage > num_stages())
      throw DomainError("stage " + std::to_string(stage) + " out of range");
    return thetas[static_cast<std::size_t>(num_stages() - stage)];
  }

  friend bool operator==(const PhaseSetting&, const PhaseSetting&) = default;
  friend bool operator<(const PhaseSetting& a, const PhaseSetting& b) { return a.thetas < b.thetas; }
};

/// Every combination of theta_i in {0, pi/2}. For K = 2 the order is
/// (theta_1, theta_2) = (0,0), (0,pi/2), (pi/2,0), (pi/2,pi/2).
inline std::vector<PhaseSetting> canonical_settings(int num_stages) {
  std::vector<PhaseSetting> out;
  const int count = 1 << num_stages;
  for (int idx = 0; idx < count; ++idx) {
    PhaseSetting s;
    s.thetas.resize(static_cast<std::size_t>(num_stages));
    for (int stage = 1; stage <= num_stages; ++stage) {
      const bool quarter = (idx >> (num_stages - stage)) & 1;
      s.thetas[static_cast<std::size_t>(num_stages - stage)] = quarter ? std::numbers::pi / 2 : 0.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct CascadeSpec {
  int dim = 4;
  int num_stages = 2;
  double slot_interval = 1e-9;   // seconds; metadata only
  std::vector<int> stage_delays;  // propagation order, largest first

  static CascadeSpec for_dimension(int d, double slot_interval = 1e-9) {
    if (d < 2) throw DomainError("cascade needs d >= 2, got " + std::to_string(d));
    CascadeSpec spec;
    spec.dim = d;
    spec.num_stages = 0;
    while ((1 << spec.num_stages) < d) ++spec.num_stages;
    spec.slot_interval = slot_interval;
    for (int stage = spec.num_stages; stage >= 1; --stage) spec.stage_delays.push_back(1 << (stage - 1));
    return spec;
  }
};

/// Relative transmittances. x[i-1], y[i-1] belong to stage i; d1 is the
/// D1-versus-D2 detector path ratio.
struct TransmittanceSet {
  std::vector<double> x;
  std::vector<double> y;
  double d1 = 1.0;

  static TransmittanceSet ideal(int num_stages) {
    return {std::vector<double>(static_cast<std::size_t>(num_stages), 1.0),
            std::vector<double>(static_cast<std::size_t>(num_stages), 1.0), 1.0};
  }

  int num_stages() const noexcept { return static_cast<int>(x.size()); }
  double eta_x(int stage) const { return x.at(static_cast<std::size_t>(stage - 1)); }
  double eta_y(int stage) const { return y.at(static_cast<std::size_t>(stage - 1)); }

  void validate(int expected_stages) const {
    if (num_stages() != expected_stages || static_cast<int>(y.size()) != expected_stages)
      throw ShapeError("transmittance set has " + std::to_string(x.size()) + "/" +
                       std::to_string(y.size()) + " stages, cascade has " +
                       std::to_string(expected_stages));
    for (double v : x)
      if (!(v > 0)) throw DomainError("relative transmittance must be positive");
    for (double v : y)
      if (!(v > 0)) throw DomainError("relative transmittance must be positive");
    if (!(d1 > 0)) throw DomainError("detector ratio must be positive");
  }

  friend bool operator==(const TransmittanceSet&, const TransmittanceSet&) = default;
};

// Measured values for the d = 4 cascade. The 1y port was never measured and
// is left at 1.
inline TransmittanceSet measured_signal() { return {{1.063, 1.009}, {1.0, 0.8300}, 0.474}; }
inline TransmittanceSet measured_idler() { return {{0.9669, 0.8495}, {1.0, 0.8302}, 0.501}; }

struct PortOperator {
  Eigen::Index in_dim = 0;
  Eigen::Index out_dim = 0;
  Matrix matrix;  // out_dim x in_dim
  std::string port_label;
};

/// x and y output ports of one delay interferometer with imperfection
/// compensation. eta = 1 gives the ideal 50:50 operators.
inline std::pair<PortOperator, PortOperator> stage_operators(int delay, double theta, double eta_x,
                                                            double eta_y, Eigen::Index in_dim,
                                                            const std::string& stage_label = "") {
  if (delay < 1) throw DomainError("stage delay must be >= 1");
  if (in_dim < 1) throw DomainError("stage input dimension must be >= 1");
  if (!(eta_x > 0) || !(eta_y > 0)) throw DomainError("relative transmittance must be positive");
  const Eigen::Index out_dim = in_dim + delay;
  const Complex phase = std::polar(1.0, theta);
  const double nx = std::sqrt(2.0 * (1.0 + eta_x));
  const double ny = std::sqrt(2.0 * (1.0 + eta_y));
  Matrix mx = Matrix::Zero(out_dim, in_dim);
  Matrix my = Matrix::Zero(out_dim, in_dim);
  for (Eigen::Index k = 0; k < in_dim; ++k) {
    mx(k, k) = 1.0 / nx;
    mx(k + delay, k) = std::sqrt(eta_x) * phase / nx;
    my(k, k) = -1.0 / ny;
    my(k + delay, k) = std::sqrt(eta_y) * phase / ny;
  }
  std::string label = stage_label.empty() ? std::to_string(delay) : stage_label;
  return {PortOperator{in_dim, out_dim, std::move(mx), label + "x"},
          PortOperator{in_dim, out_dim, std::move(my), label + "y"}};
}

inline Matrix detection_projector(Eigen::Index slot, Eigen::Index dim) {
  if (slot < 0 || slot >= dim)
    throw DomainError("detection slot " + std::to_string(slot) + " outside [0, " +
                      std::to_string(dim) + ")");
  Matrix p = Matrix::Zero(dim, dim);
  p(slot, slot) = 1.0;
  return p;
}

/// One detector click: which detector, which slot, under which phases.
struct Outcome {
  Detector detector = Detector::D1;
  int slot = 0;
  PhaseSetting setting;

  friend bool operator==(const Outcome&, const Outcome&) = default;
  friend bool operator<(const Outcome& a, const Outcome& b) {
    return std::tie(a.detector, a.slot, a.setting) < std::tie(b.detector, b.slot, b.setting);
  }
};

/// Single-qudit keys have one part; coincidence keys have (signal, idler).
struct MeasurementKey {
  std::vector<Outcome> parts;

  bool is_coincidence() const noexcept { return parts.size() == 2; }
  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) s += " & ";
      s += tbqst::to_string(parts[i].detector) + " t" + std::to_string(parts[i].slot) + " (";
      for (std::size_t t = 0; t < parts[i].setting.thetas.size(); ++t) {
        if (t) s += ",";
        s += std::to_string(parts[i].setting.thetas[t]);
      }
      s += ")";
    }
    return s;
  }

  friend bool operator==(const MeasurementKey&, const MeasurementKey&) = default;
  friend bool operator<(const MeasurementKey& a, const MeasurementKey& b) { return a.parts < b.parts; }
};

struct PovmElement {
  MeasurementKey key;
  Matrix op;  // d x d, Hermitian PSD

  Detector detector() const { return key.parts.at(0).detector; }
  int slot() const { return key.parts.at(0).slot; }
  const PhaseSetting& setting() const { return key.parts.at(0).setting; }
};

namespace detail {

struct CascadeTransfer {
  Matrix d1;                       // x-chain through every stage
  Matrix d2;                       // y-port of the first stage
  std::vector<Matrix> terminated;  // remaining y-ports
};

inline CascadeTransfer cascade_transfer(const CascadeSpec& spec, const PhaseSetting& setting,
                                        const TransmittanceSet& eta) {
  if (setting.num_stages() != spec.num_stages)
    throw ShapeError("phase setting has " + std::to_string(setting.num_stages()) +
                     " angles, cascade has " + std::to_string(spec.num_stages) + " stages");
  eta.validate(spec.num_stages);
  CascadeTransfer out;
  Matrix chain = identity(spec.dim);
  for (int p = 0; p < spec.num_stages; ++p) {
    const int stage = spec.num_stages - p;
    auto [x, y] = stage_operators(spec.stage_delays[static_cast<std::size_t>(p)],
                                  setting.theta(stage), eta.eta_x(stage), eta.eta_y(stage),
                                  chain.rows(), std::to_string(stage));
    Matrix tapped = matmul(y.matrix, chain);
    if (p == 0)
      out.d2 = std::move(tapped);
    else
      out.terminated.push_back(std::move(tapped));
    chain = matmul(x.matrix, chain);
  }
  out.d1 = std::move(chain);
  return out;
}

inline bool row_is_zero(const Matrix& m, Eigen::Index r) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    if (m(r, c) != Complex(0.0)) return false;
  return true;
}

}  // namespace detail

/// M_D applied after the port chain of `detector`, before squaring:
/// an (output slots) x d matrix.
inline Matrix multiplication_form(const CascadeSpec& spec, const PhaseSetting& setting,
                                  const TransmittanceSet& eta, Detector detector, int slot) {
  auto transfer = detail::cascade_transfer(spec, setting, eta);
  const Matrix& chain = detector == Detector::D1 ? transfer.d1 : transfer.d2;
  return matmul(detection_projector(slot, chain.rows()), chain);
}

/// POVM elements of one phase setting: D1 slots ascending, then D2 slots.
/// D1 elements carry the detector ratio eta.d1. Slots that no input reaches
/// are omitted.
inline std::vector<PovmElement> povm_elements(const CascadeSpec& spec, const PhaseSetting& setting,
                                              const TransmittanceSet& eta) {
  auto transfer = detail::cascade_transfer(spec, setting, eta);
  std::vector<PovmElement> out;
  auto emit = [&](Detector det, const Matrix& chain, double scale) {
    for (Eigen::Index l = 0; l < chain.rows(); ++l) {
      if (detail::row_is_zero(chain, l)) continue;
      Matrix row = chain.row(l);
      Matrix e = scale * (row.adjoint() * row);
      out.push_back({MeasurementKey{{Outcome{det, static_cast<int>(l), setting}}}, std::move(e)});
    }
  };
  emit(Detector::D1, transfer.d1, eta.d1);
  emit(Detector::D2, transfer.d2, 1.0);
  return out;
}

/// Sum over slots of the elements of every terminated y-port.
inline Matrix terminated_completion(const CascadeSpec& spec, const PhaseSetting& setting,
                                    const TransmittanceSet& eta) {
  auto transfer = detail::cascade_transfer(spec, setting, eta);
  Matrix sum = Matrix::Zero(spec.dim, spec.dim);
  for (const Matrix& t : transfer.terminated) sum += t.adjoint() * t;
  return sum;
}

inline std::vector<PovmElement> measurement_set(const CascadeSpec& spec,
                                                const std::vector<PhaseSetting>& settings,
                                                const TransmittanceSet& eta) {
  std::vector<PovmElement> out;
  for (const auto& s : settings) {
    auto part = povm_elements(spec, s, eta);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

inline std::vector<PovmElement> only_detector(const std::vector<PovmElement>& elements, Detector det) {
  std::vector<PovmElement> out;
  for (const auto& e : elements)
    if (e.detector() == det) out.push_back(e);
  return out;
}

/// Coincidence elements E_s (x) E_i for every signal/idler pair.
inline std::vector<PovmElement> joint_elements(const std::vector<PovmElement>& signal,
                                               const std::vector<PovmElement>& idler) {
  std::vector<PovmElement> out;
  out.reserve(signal.size() * idler.size());
  for (const auto& s : signal)
    for (const auto& i : idler) {
      MeasurementKey key;
      key.parts = s.key.parts;
      key.parts.insert(key.parts.end(), i.key.parts.begin(), i.key.parts.end());
      out.push_back({std::move(key), tensor(s.op, i.op)});
    }
  return out;
}

/// Closed form w |l><psi| of a d = 4 measurement operator.
struct SimplifiedForm {
  Detector detector = Detector::D1;
  int slot = 0;
  Complex table_weight;  // weight as tabulated (1/4 or -1/2)
  Vector table_bra;      // tabulated coefficients of <k|, unnormalized
  Complex weight;        // table_weight * |table_bra|
  Vector bra;            // unit norm

  /// out_dim x 4 operator with row `slot` equal to weight * bra.
  Matrix operator_form(Eigen::Index out_dim) const {
    Matrix m = Matrix::Zero(out_dim, bra.size());
    m.row(slot) = weight * bra.transpose();
    return m;
  }

  Matrix element() const {
    Matrix row = bra.transpose();
    return std::norm(weight) * (row.adjoint() * row);
  }
};

inline std::vector<SimplifiedForm> simplified_forms(const CascadeSpec& spec, const PhaseSetting& setting) {
  if (spec.dim != 4 || setting.num_stages() != 2)
    throw DomainError("closed forms are tabulated for the d = 4 cascade only");
  const Complex e1 = std::polar(1.0, setting.theta(1));
  const Complex e2 = std::polar(1.0, setting.theta(2));
  const Complex e12 = std::polar(1.0, setting.theta(1) + setting.theta(2));
  const Complex o(0.0), one(1.0);
  auto vec = [](Complex a, Complex b, Complex c, Complex d) {
    Vector v(4);
    v << a, b, c, d;
    return v;
  };
  // Coefficients of <0|, <1|, <2|, <3|.
  const std::vector<Vector> d1_rows = {
      vec(one, o, o, o),    vec(e1, one, o, o),  vec(e2, e1, one, o), vec(e12, e2, e1, one),
      vec(o, e12, e2, e1),  vec(o, o, e12, e2),  vec(o, o, o, e12)};
  const std::vector<Vector> d2_rows = {
      vec(one, o, o, o), vec(o, one, o, o), vec(-e2, o, one, o),
      vec(o, -e2, o, one), vec(o, o, -e2, o), vec(o, o, o, -e2)};

  std::vector<SimplifiedForm> out;
  auto emit = [&](Detector det, const std::vector<Vector>& rows, Complex w) {
    for (std::size_t l = 0; l < rows.size(); ++l) {
      SimplifiedForm f;
      f.detector = det;
      f.slot = static_cast<int>(l);
      f.table_weight = w;
      f.table_bra = rows[l];
      const double norm = rows[l].norm();
      f.weight = w * norm;
      f.bra = rows[l] / norm;
      out.push_back(std::move(f));
    }
  };
  emit(Detector::D1, d1_rows, Complex(0.25));
  emit(Detector::D2, d2_rows, Complex(-0.5));
  return out;
}

}  // namespace tbqst
