#pragma once

// JSON forms of every file the CLI reads or writes. Numbers are written in
// shortest round-trip form, so matrices survive a write/read cycle bit for bit.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tbqst/count_sim.hpp"
#include "tbqst/metrics.hpp"
#include "tbqst/povm_dedup.hpp"
#include "tbqst/reconstruct.hpp"

namespace tbqst {

using Json = nlohmann::json;

inline constexpr const char* kSchemaVersion = "tbqst/1";

namespace detail {

inline const Json& field(const Json& j, const std::string& name, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path, "expected an object");
  auto it = j.find(name);
  if (it == j.end()) throw ValidationError(path + "/" + name, "missing required field '" + name + "'");
  return *it;
}

inline double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path, "expected a number");
  return j.get<double>();
}

inline int integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ValidationError(path, "expected an integer");
  return j.get<int>();
}

inline const Json& array(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path, "expected an array");
  return j;
}

inline std::string str(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path, "expected a string");
  return j.get<std::string>();
}

}  // namespace detail

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("", "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("", path + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("", "cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

// --- matrices and states ---------------------------------------------------

inline void put_matrix(Json& j, const Matrix& m) {
  Json re = Json::array(), im = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json rr = Json::array(), ir = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      rr.push_back(m(r, c).real());
      ir.push_back(m(r, c).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ir));
  }
  j["re"] = std::move(re);
  j["im"] = std::move(im);
}

inline Json matrix_to_json(const Matrix& m) {
  Json j = Json::object();
  put_matrix(j, m);
  return j;
}

inline Matrix matrix_from_json(const Json& j, const std::string& path = "") {
  const Json& re = detail::array(detail::field(j, "re", path), path + "/re");
  const Json& im = detail::array(detail::field(j, "im", path), path + "/im");
  if (re.size() != im.size()) throw ValidationError(path, "re and im have different row counts");
  const auto rows = static_cast<Eigen::Index>(re.size());
  if (rows == 0) throw ValidationError(path + "/re", "empty matrix");
  const auto cols = static_cast<Eigen::Index>(detail::array(re[0], path + "/re/0").size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string rp = "/" + std::to_string(r);
    const Json& rr = detail::array(re[static_cast<std::size_t>(r)], path + "/re" + rp);
    const Json& ir = detail::array(im[static_cast<std::size_t>(r)], path + "/im" + rp);
    if (static_cast<Eigen::Index>(rr.size()) != cols || static_cast<Eigen::Index>(ir.size()) != cols)
      throw ValidationError(path + "/re" + rp, "ragged matrix row");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::string cp = rp + "/" + std::to_string(c);
      m(r, c) = Complex(detail::number(rr[static_cast<std::size_t>(c)], path + "/re" + cp),
                        detail::number(ir[static_cast<std::size_t>(c)], path + "/im" + cp));
    }
  }
  return m;
}

inline Json density_to_json(const Matrix& rho) {
  Json j = {{"dim", rho.rows()}};
  put_matrix(j, rho);
  return j;
}

inline Json density_to_json(const DensityOperator& rho) { return density_to_json(rho.matrix()); }

/// Reads {"dim", "re", "im"}; the matrix is checked against dim but not
/// validated as a physical state.
inline Matrix density_matrix_from_json(const Json& j, const std::string& path = "") {
  const int dim = detail::integer(detail::field(j, "dim", path), path + "/dim");
  Matrix m = matrix_from_json(j, path);
  if (m.rows() != dim || m.cols() != dim)
    throw ValidationError(path, "matrix is " + shape_string(m) + ", dim says " + std::to_string(dim));
  return m;
}

inline DensityOperator density_from_json(const Json& j, const std::string& path = "") {
  return DensityOperator(density_matrix_from_json(j, path));
}

inline Json pure_state_to_json(const PureState& s) {
  Json re = Json::array(), im = Json::array();
  for (Eigen::Index k = 0; k < s.dim(); ++k) {
    re.push_back(s.amplitudes(k).real());
    im.push_back(s.amplitudes(k).imag());
  }
  return {{"dim", s.dim()}, {"re", re}, {"im", im}};
}

// --- keys and records -------------------------------------------------------

inline Json outcome_to_json(const Outcome& o) {
  return {{"detector", to_string(o.detector)}, {"slot", o.slot}, {"theta", o.setting.thetas}};
}

inline Outcome outcome_from_json(const Json& j, const std::string& path) {
  Outcome o;
  const std::string det = detail::str(detail::field(j, "detector", path), path + "/detector");
  if (det != "D1" && det != "D2") throw ValidationError(path + "/detector", "unknown detector '" + det + "'");
  o.detector = parse_detector(det);
  o.slot = detail::integer(detail::field(j, "slot", path), path + "/slot");
  if (o.slot < 0) throw ValidationError(path + "/slot", "negative slot");
  const Json& th = detail::array(detail::field(j, "theta", path), path + "/theta");
  for (std::size_t t = 0; t < th.size(); ++t)
    o.setting.thetas.push_back(detail::number(th[t], path + "/theta/" + std::to_string(t)));
  return o;
}

inline Json key_to_json(const MeasurementKey& k) {
  if (k.is_coincidence()) return {{"signal", outcome_to_json(k.parts[0])}, {"idler", outcome_to_json(k.parts[1])}};
  return outcome_to_json(k.parts.at(0));
}

inline MeasurementKey key_from_json(const Json& j, const std::string& path) {
  if (j.is_object() && j.contains("signal"))
    return {{outcome_from_json(detail::field(j, "signal", path), path + "/signal"),
             outcome_from_json(detail::field(j, "idler", path), path + "/idler")}};
  return {{outcome_from_json(j, path)}};
}

inline Json count_record_to_json(const CountRecord& rec) {
  Json meta = {{"N", rec.meta.photons}, {"duration", rec.meta.duration}};
  meta["seed"] = rec.meta.seed ? Json(*rec.meta.seed) : Json(nullptr);
  Json entries = Json::array();
  for (const auto& [k, v] : rec.entries) entries.push_back({{"key", key_to_json(k)}, {"count", v}});
  return {{"schema_version", kSchemaVersion}, {"mode", to_string(rec.mode)}, {"meta", meta}, {"entries", entries}};
}

inline CountRecord count_record_from_json(const Json& j) {
  CountRecord rec;
  const std::string mode = detail::str(detail::field(j, "mode", ""), "/mode");
  if (mode == "single")
    rec.mode = CountMode::single;
  else if (mode == "coincidence")
    rec.mode = CountMode::coincidence;
  else
    throw ValidationError("/mode", "expected 'single' or 'coincidence', got '" + mode + "'");

  if (j.contains("meta")) {
    const Json& meta = j["meta"];
    if (!meta.is_object()) throw ValidationError("/meta", "expected an object");
    if (meta.contains("N")) rec.meta.photons = detail::number(meta["N"], "/meta/N");
    if (meta.contains("duration")) rec.meta.duration = detail::number(meta["duration"], "/meta/duration");
    if (meta.contains("seed") && !meta["seed"].is_null()) {
      if (!meta["seed"].is_number_unsigned()) throw ValidationError("/meta/seed", "expected a non-negative integer");
      rec.meta.seed = meta["seed"].get<std::uint64_t>();
    }
  }

  const Json& entries = detail::array(detail::field(j, "entries", ""), "/entries");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string p = "/entries/" + std::to_string(i);
    MeasurementKey key = key_from_json(detail::field(entries[i], "key", p), p + "/key");
    if (key.is_coincidence() != (rec.mode == CountMode::coincidence))
      throw ValidationError(p + "/key", "key shape does not match mode '" + mode + "'");
    const double count = detail::number(detail::field(entries[i], "count", p), p + "/count");
    if (!(count >= 0) || !std::isfinite(count)) throw ValidationError(p + "/count", "count must be finite and >= 0");
    if (!rec.entries.emplace(std::move(key), count).second) throw ValidationError(p + "/key", "duplicate key");
  }
  return rec;
}

inline Json elements_to_json(const std::vector<PovmElement>& elements) {
  Json out = Json::array();
  for (const auto& e : elements) {
    Json j = key_to_json(e.key);
    put_matrix(j, e.op);
    out.push_back(std::move(j));
  }
  return out;
}

inline std::vector<PovmElement> elements_from_json(const Json& j) {
  const Json& arr = detail::array(j, "");
  std::vector<PovmElement> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = "/" + std::to_string(i);
    out.push_back({key_from_json(arr[i], p), matrix_from_json(arr[i], p)});
  }
  return out;
}

inline Json classes_to_json(const std::vector<MeasurementClass>& classes) {
  Json out = Json::array();
  for (const auto& c : classes) {
    Json members = Json::array();
    for (const auto& k : c.members) members.push_back(key_to_json(k));
    out.push_back({{"id", c.id}, {"members", members}, {"trace", c.trace()}, {"op", matrix_to_json(c.aggregated_op)}});
  }
  return out;
}

// --- transmittances and calibration -------------------------------------------

/// {"eta_1x", "eta_2x", ..., "eta_1y", ..., "eta_d1"}; stage i is "eta_<i>x".
inline Json transmittance_to_json(const TransmittanceSet& eta) {
  Json j = Json::object();
  for (int s = 1; s <= eta.num_stages(); ++s) {
    j["eta_" + std::to_string(s) + "x"] = eta.eta_x(s);
    j["eta_" + std::to_string(s) + "y"] = eta.eta_y(s);
  }
  j["eta_d1"] = eta.d1;
  return j;
}

/// Missing entries default to 1.
inline TransmittanceSet transmittance_from_json(const Json& j, int num_stages, const std::string& path = "") {
  if (!j.is_object()) throw ValidationError(path, "expected an object");
  TransmittanceSet eta = TransmittanceSet::ideal(num_stages);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& name = it.key();
    const std::string p = path + "/" + name;
    if (name == "eta_d1") {
      eta.d1 = detail::number(*it, p);
      continue;
    }
    if (name.size() < 6 || name.rfind("eta_", 0) != 0) throw ValidationError(p, "unknown field");
    const char port = name.back();
    int stage = 0;
    try {
      stage = std::stoi(name.substr(4, name.size() - 5));
    } catch (const std::exception&) {
      throw ValidationError(p, "unknown field");
    }
    if (stage < 1 || stage > num_stages || (port != 'x' && port != 'y'))
      throw ValidationError(p, "no such stage/port for a " + std::to_string(num_stages) + "-stage cascade");
    (port == 'x' ? eta.x : eta.y)[static_cast<std::size_t>(stage - 1)] = detail::number(*it, p);
  }
  try {
    eta.validate(num_stages);
  } catch (const Error& e) {
    throw ValidationError(path, e.what());
  }
  return eta;
}

inline Json histograms_to_json(const std::vector<CalibrationHistogram>& hs) {
  Json out = Json::array();
  for (const auto& h : hs) out.push_back({{"channel", h.channel}, {"detector", to_string(h.detector)}, {"counts", h.counts}});
  return out;
}

inline std::vector<CalibrationHistogram> histograms_from_json(const Json& j, const std::string& path = "") {
  const Json& arr = detail::array(j, path);
  std::vector<CalibrationHistogram> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = path + "/" + std::to_string(i);
    CalibrationHistogram h;
    h.channel = detail::integer(detail::field(arr[i], "channel", p), p + "/channel");
    const std::string det = detail::str(detail::field(arr[i], "detector", p), p + "/detector");
    if (det != "D1" && det != "D2") throw ValidationError(p + "/detector", "unknown detector");
    h.detector = parse_detector(det);
    const Json& counts = detail::array(detail::field(arr[i], "counts", p), p + "/counts");
    for (std::size_t l = 0; l < counts.size(); ++l) h.counts.push_back(detail::number(counts[l], p + "/counts/" + std::to_string(l)));
    out.push_back(std::move(h));
  }
  return out;
}

// --- results -------------------------------------------------------------------

inline Json factor_to_json(const TriangularFactor& f) {
  return {{"dim", f.dim}, {"params", std::vector<double>(f.params.data(), f.params.data() + f.params.size())}};
}

inline TriangularFactor factor_from_json(const Json& j, const std::string& path = "") {
  const int dim = detail::integer(detail::field(j, "dim", path), path + "/dim");
  const Json& params = detail::array(detail::field(j, "params", path), path + "/params");
  if (static_cast<Eigen::Index>(params.size()) != TriangularFactor::param_count(dim))
    throw ValidationError(path + "/params", "expected " + std::to_string(dim * dim) + " parameters");
  TriangularFactor f{dim, RealVector(dim * dim)};
  for (std::size_t i = 0; i < params.size(); ++i) f.params(static_cast<Eigen::Index>(i)) = detail::number(params[i], path + "/params/" + std::to_string(i));
  return f;
}

inline Json reconstruction_to_json(const ReconstructionResult& r) {
  Json j = {{"schema_version", kSchemaVersion},
            {"method", to_string(r.method)},
            {"rho", density_to_json(r.rho)},
            {"N_hat", r.photons},
            {"likelihood", r.likelihood},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"physical", r.physical}};
  if (r.factor) j["factor"] = factor_to_json(*r.factor);
  return j;
}

inline Json merit_to_json(const MeritReport& m) {
  return {{"fidelity", m.fidelity},
          {"trace_distance", m.trace_distance},
          {"linear_entropy", m.linear_entropy},
          {"von_neumann_entropy", m.von_neumann_entropy},
          {"conditional_entropy_signal", m.conditional_entropy_signal},
          {"conditional_entropy_idler", m.conditional_entropy_idler},
          {"best_phi", m.best_phi}};
}

}  // namespace tbqst
