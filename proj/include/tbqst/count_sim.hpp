#pragma once

// Expected and Poisson-sampled photon counts, plus the single-pulse
// calibration of the interferometer transmittances.

#include <bit>
#include <cstring>
#include <random>
#include <utility>
#include <vector>

#include "tbqst/count_record.hpp"
#include "tbqst/mzi_model.hpp"

namespace tbqst {

/// N Tr(E rho) per element; negative float residue is clamped to zero.
/// Records are coincidence-mode when the element keys have two parts.
inline CountRecord expected_counts(const DensityOperator& rho, const std::vector<PovmElement>& elements,
                                   double photons) {
  if (!(photons > 0)) throw DomainError("expected photon number must be positive");
  CountRecord rec;
  rec.meta.photons = photons;
  if (!elements.empty() && elements.front().key.is_coincidence()) rec.mode = CountMode::coincidence;
  for (const auto& e : elements) {
    if (e.op.rows() != rho.dim() || e.op.cols() != rho.dim())
      throw ShapeError("element " + e.key.to_string() + " is " + shape_string(e.op) +
                       ", state has dimension " + std::to_string(rho.dim()));
    const double p = trace_product(e.op, rho.matrix()).real();
    rec.entries[e.key] = std::max(0.0, photons * p);
  }
  return rec;
}

inline CountRecord expected_coincidences(const DensityOperator& rho_joint,
                                         const std::vector<PovmElement>& signal,
                                         const std::vector<PovmElement>& idler, double photons) {
  if (!signal.empty() && !idler.empty() &&
      signal.front().op.rows() * idler.front().op.rows() != rho_joint.dim())
    throw ShapeError("joint state dimension " + std::to_string(rho_joint.dim()) +
                     " does not match signal x idler elements");
  return expected_counts(rho_joint, joint_elements(signal, idler), photons);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t key_hash(const MeasurementKey& key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : key.parts) {
    mix(static_cast<std::uint64_t>(p.detector));
    mix(static_cast<std::uint64_t>(p.slot));
    for (double t : p.setting.thetas) mix(std::bit_cast<std::uint64_t>(t));
    mix(0xffULL);
  }
  return h;
}

inline double poisson_draw(double mean, std::uint64_t seed) {
  if (!(mean > 0)) return 0.0;
  std::mt19937_64 gen(seed);
  std::poisson_distribution<long long> dist(mean);
  return static_cast<double>(dist(gen));
}

}  // namespace detail

/// Independent Poisson draw per key. Each key's generator is seeded from
/// (seed, key), so the draw for a key does not depend on the other keys.
inline CountRecord sample_counts(const CountRecord& expected, std::uint64_t seed) {
  CountRecord out;
  out.mode = expected.mode;
  out.meta = expected.meta;
  out.meta.seed = seed;
  for (const auto& [key, mean] : expected.entries)
    out.entries[key] = detail::poisson_draw(std::max(0.0, mean),
                                            detail::splitmix64(seed ^ detail::key_hash(key)));
  return out;
}

struct CalibrationHistogram {
  int channel = 1;
  Detector detector = Detector::D1;
  std::vector<double> counts;  // S_l per detection slot

  friend bool operator==(const CalibrationHistogram&, const CalibrationHistogram&) = default;
};

/// Single-pulse histograms (input |0>) for the D1 channel `first_channel`
/// and the D2 channel `first_channel + 1`, each scaled to `photons` expected
/// counts. Slots 0 .. 2^K - 1 are reported. With a seed, counts are Poisson
/// sampled; without one they are the expected values.
inline std::vector<CalibrationHistogram> simulate_calibration(const CascadeSpec& spec,
                                                              const TransmittanceSet& eta_truth,
                                                              double photons,
                                                              std::optional<std::uint64_t> seed,
                                                              int first_channel = 1) {
  if (!(photons > 0)) throw DomainError("calibration photon number must be positive");
  const PhaseSetting flat{std::vector<double>(static_cast<std::size_t>(spec.num_stages), 0.0)};
  const auto elements = povm_elements(spec, flat, eta_truth);
  const int bins = 1 << spec.num_stages;

  std::vector<CalibrationHistogram> out;
  for (Detector det : {Detector::D1, Detector::D2}) {
    CalibrationHistogram h;
    h.channel = first_channel + (det == Detector::D1 ? 0 : 1);
    h.detector = det;
    h.counts.assign(static_cast<std::size_t>(bins), 0.0);
    for (const auto& e : elements)
      if (e.detector() == det && e.slot() < bins)
        h.counts[static_cast<std::size_t>(e.slot())] = e.op(0, 0).real();
    double total = 0;
    for (double c : h.counts) total += c;
    for (std::size_t l = 0; l < h.counts.size(); ++l) {
      h.counts[l] *= photons / total;
      if (seed)
        h.counts[l] = detail::poisson_draw(
            h.counts[l], detail::splitmix64(*seed ^ detail::splitmix64((h.channel << 16) + l)));
    }
    out.push_back(std::move(h));
  }
  return out;
}

struct CalibrationEstimate {
  std::vector<double> eta_x;  // stage i at index i - 1
  double eta_y_first = 1.0;   // y-port of the largest-delay stage

  /// Full set for the cascade; unmeasured y-ports stay at 1.
  TransmittanceSet to_set(double eta_d1 = 1.0) const {
    TransmittanceSet set = TransmittanceSet::ideal(static_cast<int>(eta_x.size()));
    set.x = eta_x;
    set.y.back() = eta_y_first;
    set.d1 = eta_d1;
    return set;
  }
};

/// Ratio estimators from single-pulse histograms. For stage i the estimate
/// is (sum of slots with bit i-1 set) / (sum of slots with it clear); for
/// K = 2 this is eta_2x = (S2+S3)/(S0+S1) and eta_1x = (S1+S3)/(S0+S2).
/// The D2 channel gives eta_Ky = S_{2^(K-1)} / S_0.
inline CalibrationEstimate estimate_transmittances(const std::vector<CalibrationHistogram>& histograms) {
  const CalibrationHistogram* d1 = nullptr;
  const CalibrationHistogram* d2 = nullptr;
  for (const auto& h : histograms) (h.detector == Detector::D1 ? d1 : d2) = &h;
  if (!d1 || !d2) throw CalibrationDataError("need one D1 and one D2 histogram");
  for (const auto* h : {d1, d2})
    for (double c : h->counts)
      if (c < 0) throw CalibrationDataError("negative histogram count");

  const std::size_t bins = d1->counts.size();
  if (bins < 2 || !std::has_single_bit(bins))
    throw CalibrationDataError("D1 histogram needs 2^K slots, got " + std::to_string(bins));
  const int stages = std::countr_zero(bins);

  CalibrationEstimate est;
  for (int stage = 1; stage <= stages; ++stage) {
    double with = 0, without = 0;
    for (std::size_t l = 0; l < bins; ++l) ((l >> (stage - 1)) & 1 ? with : without) += d1->counts[l];
    if (!(without > 0))
      throw CalibrationDataError("zero denominator for stage " + std::to_string(stage));
    est.eta_x.push_back(with / without);
  }
  const std::size_t peak = bins / 2;
  if (d2->counts.size() <= peak) throw CalibrationDataError("D2 histogram too short");
  if (!(d2->counts[0] > 0)) throw CalibrationDataError("zero D2 count in slot 0");
  est.eta_y_first = d2->counts[peak] / d2->counts[0];
  return est;
}

/// Total D1 and D2 probability per photon, summed over slots.
inline std::pair<double, double> detector_acceptance(const DensityOperator& rho,
                                                     const std::vector<PovmElement>& elements) {
  double d1 = 0, d2 = 0;
  for (const auto& e : elements) (e.detector() == Detector::D1 ? d1 : d2) += trace_product(e.op, rho.matrix()).real();
  return {d1, d2};
}

/// eta_d1 = (D1 rate / D2 rate) * (ideal D2 acceptance / ideal D1 acceptance),
/// acceptances taken from the traces of the ideal POVM summed over slots.
inline double estimate_detector_ratio(double d1_rate, double d2_rate, const CascadeSpec& spec) {
  if (!(d1_rate > 0) || !(d2_rate > 0)) throw CalibrationDataError("detector rates must be positive");
  const PhaseSetting flat{std::vector<double>(static_cast<std::size_t>(spec.num_stages), 0.0)};
  const auto [acc1, acc2] = detector_acceptance(DensityOperator::maximally_mixed(spec.dim),
                                                povm_elements(spec, flat, TransmittanceSet::ideal(spec.num_stages)));
  return (d1_rate / d2_rate) * (acc2 / acc1);
}

}  // namespace tbqst
