#pragma once

#include <cstdint>
#include <map>
#include <optional>

#include "tbqst/mzi_model.hpp"

namespace tbqst {

enum class CountMode { single, coincidence };

inline std::string to_string(CountMode m) { return m == CountMode::single ? "single" : "coincidence"; }

struct CountMeta {
  double photons = 0.0;  // expected total photon scale N
  std::optional<std::uint64_t> seed;
  double duration = 0.0;  // seconds, informational

  friend bool operator==(const CountMeta&, const CountMeta&) = default;
};

/// Photon counts per measurement key. Sampled records hold integers,
/// expected records hold reals.
struct CountRecord {
  CountMode mode = CountMode::single;
  std::map<MeasurementKey, double> entries;
  CountMeta meta;

  double total() const {
    double t = 0;
    for (const auto& [k, v] : entries) t += v;
    return t;
  }

  friend bool operator==(const CountRecord&, const CountRecord&) = default;
};

}  // namespace tbqst
