#pragma once

// Groups POVM elements that describe the same physical measurement (equal
// after trace normalization) into classes with summed operators.

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "tbqst/count_record.hpp"
#include "tbqst/mzi_model.hpp"

namespace tbqst {

struct MeasurementClass {
  int id = 0;
  std::vector<MeasurementKey> members;  // sorted
  Matrix aggregated_op;                 // sum of member operators

  double trace() const { return aggregated_op.trace().real(); }
};

struct DedupOptions {
  /// Max elementwise modulus distance between normalized operators.
  double tolerance = 1e-9;
  double trace_floor = 1e-14;
};

struct DedupResult {
  std::vector<MeasurementClass> classes;
  /// Elements whose trace is at or below the floor; they cannot be normalized.
  std::vector<MeasurementKey> dropped;
};

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

/// Partitions `elements` into measurement classes.
///
/// Candidate pairs are found by sorting on a fixed linear functional of the
/// normalized operator: two operators within `tolerance` elementwise cannot
/// differ in that functional by more than tolerance * sum|weights|, so the
/// sweep sees every related pair. Throws IntransitiveClassError when a
/// connected group is not fully pairwise related.
inline DedupResult build_classes(const std::vector<PovmElement>& elements, DedupOptions options = {}) {
  DedupResult result;
  if (elements.empty()) return result;
  const Eigen::Index d = elements.front().op.rows();

  std::vector<std::size_t> kept;
  std::vector<Matrix> normalized;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const Matrix& op = elements[i].op;
    if (op.rows() != d || op.cols() != d)
      throw ShapeError("build_classes: element " + elements[i].key.to_string() + " is " +
                       shape_string(op) + ", expected " + std::to_string(d) + "x" + std::to_string(d));
    const double tr = op.trace().real();
    if (!(tr > options.trace_floor)) {
      result.dropped.push_back(elements[i].key);
      continue;
    }
    kept.push_back(i);
    normalized.push_back(op / tr);
  }

  std::mt19937_64 gen(0x5eedULL);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  RealMatrix w_re(d, d), w_im(d, d);
  for (Eigen::Index c = 0; c < d; ++c)
    for (Eigen::Index r = 0; r < d; ++r) {
      w_re(r, c) = unit(gen);
      w_im(r, c) = unit(gen);
    }
  const double window = options.tolerance * (w_re.sum() + w_im.sum()) * (1.0 + 1e-12);

  const std::size_t n = kept.size();
  std::vector<double> signature(n);
  for (std::size_t k = 0; k < n; ++k)
    signature[k] = (w_re.cwiseProduct(normalized[k].real())).sum() +
                   (w_im.cwiseProduct(normalized[k].imag())).sum();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return signature[a] < signature[b] || (signature[a] == signature[b] && a < b);
  });

  detail::DisjointSets sets(n);
  std::vector<std::pair<std::size_t, std::size_t>> related;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const std::size_t i = order[a], j = order[b];
      if (signature[j] - signature[i] > window) break;
      if (max_abs(normalized[i] - normalized[j]) <= options.tolerance) {
        sets.unite(i, j);
        related.emplace_back(i, j);
      }
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < n; ++k) groups[sets.find(k)].push_back(k);
  std::map<std::size_t, std::size_t> edges_in_group;
  for (auto [i, j] : related) ++edges_in_group[sets.find(i)];
  for (const auto& [root, members] : groups) {
    const std::size_t m = members.size();
    if (edges_in_group[root] != m * (m - 1) / 2)
      throw IntransitiveClassError(
          "operator equivalence is not transitive at tolerance " + std::to_string(options.tolerance) +
          " around " + elements[kept[members.front()]].key.to_string());
  }

  for (const auto& [root, members] : groups) {
    MeasurementClass cls;
    cls.aggregated_op = Matrix::Zero(d, d);
    for (std::size_t k : members) {
      cls.members.push_back(elements[kept[k]].key);
      cls.aggregated_op += elements[kept[k]].op;
    }
    std::sort(cls.members.begin(), cls.members.end());
    result.classes.push_back(std::move(cls));
  }
  std::sort(result.classes.begin(), result.classes.end(),
            [](const MeasurementClass& a, const MeasurementClass& b) { return a.members.front() < b.members.front(); });
  for (std::size_t j = 0; j < result.classes.size(); ++j) result.classes[j].id = static_cast<int>(j);
  return result;
}

/// Classwise count totals n_j = sum of member counts.
inline RealVector aggregate_counts(const std::vector<MeasurementClass>& classes, const CountRecord& raw) {
  RealVector n = RealVector::Zero(static_cast<Eigen::Index>(classes.size()));
  for (std::size_t j = 0; j < classes.size(); ++j)
    for (const auto& key : classes[j].members) {
      auto it = raw.entries.find(key);
      if (it == raw.entries.end())
        throw IncompleteDataError("count record has no entry for " + key.to_string());
      n(static_cast<Eigen::Index>(j)) += it->second;
    }
  return n;
}

inline std::vector<Matrix> class_operators(const std::vector<MeasurementClass>& classes) {
  std::vector<Matrix> ops;
  ops.reserve(classes.size());
  for (const auto& c : classes) ops.push_back(c.aggregated_op);
  return ops;
}

}  // namespace tbqst
