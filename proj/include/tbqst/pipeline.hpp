#pragma once

// End-to-end driver: calibrate, build operators, simulate or ingest counts,
// group equivalent elements, reconstruct and score, over many seeded trials.

#include <atomic>
#include <cstdlib>
#include <numbers>
#include <thread>

#include "tbqst/json_io.hpp"

namespace tbqst {

/// Raised inside a trial; names the stage that failed.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Parses "mes:d:phi", "mix:p", "mix:p:phi" (MES(dim, phi) depolarized) and
/// "maxmixed:n". Anything else is read as a density-operator JSON file.
inline DensityOperator parse_state_spec(const std::string& spec, int dim) {
  auto parts = std::vector<std::string>{};
  std::size_t start = 0;
  while (true) {
    const auto colon = spec.find(':', start);
    parts.push_back(spec.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  auto num = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("state", "bad number '" + s + "' in state spec '" + spec + "'");
    }
  };
  if (parts[0] == "mes" && parts.size() == 3) return mes_state(static_cast<int>(num(parts[1])), num(parts[2])).density();
  if (parts[0] == "mix" && (parts.size() == 2 || parts.size() == 3))
    return depolarized(mes_state(dim, parts.size() == 3 ? num(parts[2]) : 0.0).density(), num(parts[1]));
  if (parts[0] == "maxmixed" && parts.size() == 2) return DensityOperator::maximally_mixed(static_cast<Eigen::Index>(num(parts[1])));
  if (parts[0] == "mes" || parts[0] == "mix" || parts[0] == "maxmixed")
    throw ValidationError("state", "malformed state spec '" + spec + "'");
  return density_from_json(read_json_file(spec));
}

/// Settings list "all" (the 2^K canonical settings) or ';'-separated
/// settings of ','-separated angles in propagation order. An angle may be a
/// number or "pi/2"-style multiple of pi.
inline std::vector<PhaseSetting> parse_settings(const std::string& text, int num_stages) {
  if (text.empty() || text == "all") return canonical_settings(num_stages);
  auto angle = [&](std::string s) {
    if (const auto pi = s.find("pi"); pi != std::string::npos) {
      std::string rest = s.substr(pi + 2);
      std::string head = s.substr(0, pi);
      if (!head.empty() && head.back() == '*') head.pop_back();
      double num = head.empty() ? 1.0 : std::stod(head);
      double den = 1.0;
      if (!rest.empty()) {
        if (rest[0] != '/') throw ValidationError("settings", "bad angle '" + s + "'");
        den = std::stod(rest.substr(1));
      }
      return num * std::numbers::pi / den;
    }
    return std::stod(s);
  };
  std::vector<PhaseSetting> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto semi = text.find(';', start);
    const std::string item = text.substr(start, semi - start);
    PhaseSetting s;
    std::size_t p = 0;
    while (p <= item.size()) {
      const auto comma = item.find(',', p);
      try {
        s.thetas.push_back(angle(item.substr(p, comma - p)));
      } catch (const ValidationError&) {
        throw;
      } catch (const std::exception&) {
        throw ValidationError("settings", "bad angle in '" + item + "'");
      }
      if (comma == std::string::npos) break;
      p = comma + 1;
    }
    if (static_cast<int>(s.thetas.size()) != num_stages)
      throw ValidationError("settings", "setting '" + item + "' needs " + std::to_string(num_stages) + " angles");
    out.push_back(std::move(s));
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  return out;
}

inline int default_jobs() {
  if (const char* env = std::getenv("TBQST_JOBS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct PipelineConfig {
  int dim = 4;
  std::vector<PhaseSetting> settings_signal;  // empty: canonical
  std::vector<PhaseSetting> settings_idler;
  TransmittanceSet eta_signal = measured_signal();
  TransmittanceSet eta_idler = measured_idler();
  /// N in n = N Tr(E rho).
  double photons = 1e6;
  std::uint64_t seed = 1;
  int trials = 1;
  std::string state_spec = "mix:0.96";
  /// Counts from a file instead of simulation; one trial.
  std::optional<std::string> counts_file;
  /// Estimate the x/y transmittances from simulated single-pulse histograms
  /// and build the model from the estimates; otherwise the model uses the
  /// true values.
  bool calibrate = false;
  double calibration_photons = 1e6;
  bool noiseless = false;
  Method method = Method::mle;
  int jobs = 1;
  MleOptions mle;
};

struct TrialReport {
  int index = 0;
  std::uint64_t seed = 0;
  std::optional<StageError> error;
  ReconstructionResult result;
  double fidelity_to_truth = 0;
  std::optional<MeritReport> merit;  // two-qudit states only
  std::optional<TransmittanceSet> calibrated_signal, calibrated_idler;
};

struct Statistic {
  double mean = 0;
  double stddev = 0;  // sample standard deviation; 0 for a single trial
  int count = 0;
};

inline Statistic summarize(const std::vector<double>& xs) {
  Statistic s;
  s.count = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double v = 0;
    for (double x : xs) v += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(v / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct PipelineReport {
  std::vector<TrialReport> trials;
  std::map<std::string, Statistic> summary;
  int failures = 0;
};

inline std::uint64_t trial_seed(std::uint64_t base, int index) {
  return detail::splitmix64(base + static_cast<std::uint64_t>(index));
}

inline CountRecord ingest_counts(const std::string& path) { return count_record_from_json(read_json_file(path)); }

namespace detail {

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

inline TransmittanceSet calibrate_side(const CascadeSpec& spec, const TransmittanceSet& truth, double photons,
                                       std::uint64_t seed) {
  const auto hist = simulate_calibration(spec, truth, photons, seed);
  return estimate_transmittances(hist).to_set(truth.d1);
}

}  // namespace detail

/// One trial. The state decides the mode: dim x dim is single-qudit,
/// dim^2 x dim^2 gives coincidences.
inline TrialReport run_trial(const PipelineConfig& cfg, const DensityOperator& truth, int index) {
  TrialReport rep;
  rep.index = index;
  rep.seed = trial_seed(cfg.seed, index);
  try {
    const CascadeSpec spec = detail::stage("config", [&] { return CascadeSpec::for_dimension(cfg.dim); });
    const bool joint = truth.dim() == static_cast<Eigen::Index>(cfg.dim) * cfg.dim;
    if (!joint && truth.dim() != cfg.dim)
      throw StageError("config", "state dimension " + std::to_string(truth.dim()) + " fits neither d nor d^2 for d = " +
                                     std::to_string(cfg.dim));
    const auto settings_s = cfg.settings_signal.empty() ? canonical_settings(spec.num_stages) : cfg.settings_signal;
    const auto settings_i = cfg.settings_idler.empty() ? settings_s : cfg.settings_idler;

    TransmittanceSet model_s = cfg.eta_signal, model_i = cfg.eta_idler;
    if (cfg.calibrate) {
      detail::stage("calibrate", [&] {
        model_s = detail::calibrate_side(spec, cfg.eta_signal, cfg.calibration_photons, detail::splitmix64(rep.seed ^ 0xca11));
        model_i = detail::calibrate_side(spec, cfg.eta_idler, cfg.calibration_photons, detail::splitmix64(rep.seed ^ 0xca12));
        return 0;
      });
      rep.calibrated_signal = model_s;
      if (joint) rep.calibrated_idler = model_i;
    }

    auto build = [&](const TransmittanceSet& es, const TransmittanceSet& ei) {
      auto sig = measurement_set(spec, settings_s, es);
      if (!joint) return sig;
      return joint_elements(sig, measurement_set(spec, settings_i, ei));
    };
    const auto model_elements = detail::stage("operators", [&] { return build(model_s, model_i); });

    CountRecord counts = detail::stage("simulate", [&] {
      if (cfg.counts_file) return ingest_counts(*cfg.counts_file);
      const auto true_elements = build(cfg.eta_signal, cfg.eta_idler);
      CountRecord expected = expected_counts(truth, true_elements, cfg.photons);
      if (!(expected.total() > 0)) throw DomainError("state is invisible to the measurement set");
      return cfg.noiseless ? expected : sample_counts(expected, rep.seed);
    });

    const auto dedup = detail::stage("dedup", [&] { return build_classes(model_elements); });
    const RealVector n = detail::stage("dedup", [&] { return aggregate_counts(dedup.classes, counts); });
    const auto ops = class_operators(dedup.classes);

    rep.result = detail::stage("reconstruct", [&] {
      const auto basis = build_basis(truth.dim());
      const DesignMatrix a = design_matrix(ops, basis);
      if (a.rank < static_cast<int>(basis.size()))
        throw UnderdeterminedError("measurement design has rank " + std::to_string(a.rank) + " < " +
                                   std::to_string(basis.size()));
      return cfg.method == Method::linear ? linear_inversion(n, ops, basis)
                                          : mle_reconstruct(n, ops, std::nullopt, cfg.mle);
    });

    detail::stage("metrics", [&] {
      const Matrix rho_hat = rep.result.rho;
      rep.fidelity_to_truth = fidelity(DensityOperator::normalized(rho_hat), truth);
      if (joint && rep.result.physical) rep.merit = merit_report(DensityOperator::normalized(rho_hat), cfg.dim);
      return 0;
    });
  } catch (const StageError& e) {
    rep.error = e;
  }
  return rep;
}

inline PipelineReport run_pipeline(const PipelineConfig& cfg) {
  if (cfg.trials < 1) throw ValidationError("trials", "need at least one trial");
  if (!(cfg.photons > 0)) throw ValidationError("photons", "must be positive");
  const DensityOperator truth = parse_state_spec(cfg.state_spec, cfg.dim);
  const int trials = cfg.counts_file ? 1 : cfg.trials;

  PipelineReport report;
  report.trials.resize(static_cast<std::size_t>(trials));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < trials; t = next++) report.trials[static_cast<std::size_t>(t)] = run_trial(cfg, truth, t);
  };
  const int jobs = std::clamp(cfg.jobs, 1, trials);
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::map<std::string, std::vector<double>> series;
  for (const auto& t : report.trials) {
    if (t.error) {
      ++report.failures;
      continue;
    }
    series["fidelity_to_truth"].push_back(t.fidelity_to_truth);
    series["N_hat"].push_back(t.result.photons);
    if (t.merit) {
      series["fidelity"].push_back(t.merit->fidelity);
      series["trace_distance"].push_back(t.merit->trace_distance);
      series["linear_entropy"].push_back(t.merit->linear_entropy);
      series["von_neumann_entropy"].push_back(t.merit->von_neumann_entropy);
      series["conditional_entropy_signal"].push_back(t.merit->conditional_entropy_signal);
      series["conditional_entropy_idler"].push_back(t.merit->conditional_entropy_idler);
    }
  }
  for (const auto& [name, xs] : series) report.summary[name] = summarize(xs);
  return report;
}

inline Json pipeline_to_json(const PipelineReport& report, bool include_rho = false) {
  Json trials = Json::array();
  for (const auto& t : report.trials) {
    Json j = {{"index", t.index}, {"seed", t.seed}};
    if (t.error) {
      j["status"] = "error";
      j["error"] = {{"stage", t.error->stage()}, {"message", t.error->what()}};
    } else {
      j["status"] = "ok";
      j["method"] = to_string(t.result.method);
      j["N_hat"] = t.result.photons;
      j["likelihood"] = t.result.likelihood;
      j["iterations"] = t.result.iterations;
      j["converged"] = t.result.converged;
      j["physical"] = t.result.physical;
      j["fidelity_to_truth"] = t.fidelity_to_truth;
      if (t.merit) j["merit"] = merit_to_json(*t.merit);
      if (include_rho) j["rho"] = density_to_json(t.result.rho);
    }
    if (t.calibrated_signal) j["calibrated_signal"] = transmittance_to_json(*t.calibrated_signal);
    if (t.calibrated_idler) j["calibrated_idler"] = transmittance_to_json(*t.calibrated_idler);
    trials.push_back(std::move(j));
  }
  Json summary = Json::object();
  for (const auto& [name, s] : report.summary) summary[name] = {{"mean", s.mean}, {"std", s.stddev}, {"n", s.count}};
  return {{"schema_version", kSchemaVersion}, {"trials", trials}, {"summary", summary}, {"failures", report.failures}};
}

}  // namespace tbqst
