// Command-line front end: operators, simulate, calibrate, reconstruct,
// metrics and pipeline subcommands over JSON files.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "tbqst/tbqst.hpp"

using namespace tbqst;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

void emit(const Json& j, const std::string& out) {
  if (out.empty() || out == "-")
    std::cout << j.dump(1) << '\n';
  else
    write_json_file(out, j);
}

/// Plain set, or {"signal": {...}, "idler": {...}}.
std::pair<TransmittanceSet, TransmittanceSet> load_eta(const std::string& path, int num_stages) {
  if (path.empty()) return {TransmittanceSet::ideal(num_stages), TransmittanceSet::ideal(num_stages)};
  if (path == "measured") return {measured_signal(), measured_idler()};
  const Json j = read_json_file(path);
  if (j.is_object() && j.contains("signal")) {
    const auto s = transmittance_from_json(j["signal"], num_stages, "/signal");
    const auto i = j.contains("idler") ? transmittance_from_json(j["idler"], num_stages, "/idler") : s;
    return {s, i};
  }
  const auto e = transmittance_from_json(j, num_stages);
  return {e, e};
}

std::vector<PovmElement> load_elements(const std::string& path) {
  return elements_from_json(read_json_file(path));
}

struct OperatorsArgs {
  int dim = 4;
  std::string settings = "all", eta, side = "signal", out;
  bool dedup = false;
};

int run_operators(const OperatorsArgs& a) {
  const CascadeSpec spec = CascadeSpec::for_dimension(a.dim);
  const auto [es, ei] = load_eta(a.eta, spec.num_stages);
  const auto elements = measurement_set(spec, parse_settings(a.settings, spec.num_stages), a.side == "idler" ? ei : es);
  if (!a.dedup) {
    emit(elements_to_json(elements), a.out);
    return 0;
  }
  const DedupResult res = build_classes(elements);
  Json dropped = Json::array();
  for (const auto& k : res.dropped) dropped.push_back(key_to_json(k));
  emit({{"schema_version", kSchemaVersion}, {"classes", classes_to_json(res.classes)}, {"dropped", dropped}}, a.out);
  return 0;
}

struct SimulateArgs {
  int dim = 4;
  std::string state = "mes:4:0", eta, settings = "all", out;
  double photons = 1e6;
  std::optional<std::uint64_t> seed;
  bool coincidence = false;
};

int run_simulate(const SimulateArgs& a) {
  const CascadeSpec spec = CascadeSpec::for_dimension(a.dim);
  const auto [es, ei] = load_eta(a.eta, spec.num_stages);
  const auto settings = parse_settings(a.settings, spec.num_stages);
  const DensityOperator rho = parse_state_spec(a.state, a.dim);
  const auto signal = measurement_set(spec, settings, es);
  CountRecord rec;
  if (a.coincidence) {
    if (rho.dim() != static_cast<Eigen::Index>(a.dim) * a.dim)
      throw ValidationError("/state", "coincidence mode needs a " + std::to_string(a.dim * a.dim) + "-dimensional state");
    rec = expected_coincidences(rho, signal, measurement_set(spec, settings, ei), a.photons);
  } else {
    if (rho.dim() != a.dim) throw ValidationError("/state", "single mode needs a " + std::to_string(a.dim) + "-dimensional state");
    rec = expected_counts(rho, signal, a.photons);
  }
  if (a.seed) rec = sample_counts(rec, *a.seed);
  emit(count_record_to_json(rec), a.out);
  return 0;
}

struct CalibrateArgs {
  int dim = 4;
  std::string histograms, eta, out;
  double photons = 1e6;
  std::optional<std::uint64_t> seed;
  std::optional<double> d1_rate, d2_rate, eta_d1;
};

int run_calibrate(const CalibrateArgs& a) {
  const CascadeSpec spec = CascadeSpec::for_dimension(a.dim);
  Json out = {{"schema_version", kSchemaVersion}};
  std::vector<CalibrationHistogram> hist;
  if (!a.histograms.empty()) {
    const Json j = read_json_file(a.histograms);
    hist = histograms_from_json(j.is_object() ? detail::field(j, "histograms", "") : j,
                                j.is_object() ? "/histograms" : "");
  } else {
    if (a.eta.empty()) throw ValidationError("--eta", "give --histograms, or --eta with the true transmittances to simulate");
    const auto [es, ei] = load_eta(a.eta, spec.num_stages);
    hist = simulate_calibration(spec, es, a.photons, a.seed);
    out["truth"] = transmittance_to_json(es);
  }
  double d1 = a.eta_d1.value_or(1.0);
  if (a.d1_rate || a.d2_rate) {
    if (!a.d1_rate || !a.d2_rate) throw ValidationError("--d1-rate", "give both --d1-rate and --d2-rate");
    d1 = estimate_detector_ratio(*a.d1_rate, *a.d2_rate, spec);
  }
  out["histograms"] = histograms_to_json(hist);
  out["estimate"] = transmittance_to_json(estimate_transmittances(hist).to_set(d1));
  emit(out, a.out);
  return 0;
}

struct ReconstructArgs {
  std::string counts, operators, operators_idler, method = "mle", init, out;
};

int run_reconstruct(const ReconstructArgs& a) {
  const CountRecord rec = ingest_counts(a.counts);
  std::vector<PovmElement> elements = load_elements(a.operators);
  if (rec.mode == CountMode::coincidence)
    elements = joint_elements(elements, a.operators_idler.empty() ? elements : load_elements(a.operators_idler));
  const DedupResult dedup = build_classes(elements);
  const RealVector n = aggregate_counts(dedup.classes, rec);
  const auto ops = class_operators(dedup.classes);
  const Eigen::Index d = ops.empty() ? 0 : ops.front().rows();

  ReconstructionResult res;
  if (a.method == "linear") {
    res = linear_inversion(n, ops, build_basis(d));
  } else {
    std::optional<TriangularFactor> init;
    if (!a.init.empty()) {
      const Json j = read_json_file(a.init);
      if (j.contains("factor"))
        init = factor_from_json(j["factor"], "/factor");
      else if (j.contains("params"))
        init = factor_from_json(j);
      else {
        const Json& rj = j.contains("rho") ? j["rho"] : j;
        const Matrix rho = DensityOperator(density_matrix_from_json(rj, j.contains("rho") ? "/rho" : "")).matrix();
        double per_photon = 0;
        for (const auto& e : ops) per_photon += trace_product(e, rho).real();
        init = TriangularFactor::factorize((n.sum() / per_photon) * rho);
      }
    }
    res = mle_reconstruct(n, ops, init);
  }
  Json j = reconstruction_to_json(res);
  j["classes"] = static_cast<int>(dedup.classes.size());
  emit(j, a.out);
  return 0;
}

struct MetricsArgs {
  int dim = 4;
  std::string rho, target = "auto", out, format = "both";
  std::optional<double> critical;
};

MeritReport report_against(const DensityOperator& rho, const DensityOperator& target) {
  MeritReport r;
  r.fidelity = fidelity(rho, target);
  r.trace_distance = trace_distance(rho, target);
  r.linear_entropy = linear_entropy(rho);
  r.von_neumann_entropy = von_neumann_entropy(rho);
  r.conditional_entropy_signal = conditional_entropy(rho, Side::signal);
  r.conditional_entropy_idler = conditional_entropy(rho, Side::idler);
  return r;
}

int run_metrics(const MetricsArgs& a) {
  MeritReport r;
  std::string heading = "Value";
  if (a.critical) {
    r = cglmp_critical_table(*a.critical, a.dim);
    heading = "p = " + std::to_string(*a.critical);
  } else {
    if (a.rho.empty()) throw ValidationError("--rho", "give --rho FILE or --critical p");
    const Json j = read_json_file(a.rho);
    const DensityOperator rho = j.contains("rho") ? density_from_json(j["rho"], "/rho") : density_from_json(j);
    const auto d = static_cast<int>(std::llround(std::sqrt(static_cast<double>(rho.dim()))));
    if (static_cast<Eigen::Index>(d) * d != rho.dim()) throw ValidationError("/dim", "not a two-qudit state");
    if (a.target == "auto" || a.target.ends_with(":auto")) {
      r = merit_report(rho, d);
    } else if (a.target.starts_with("mes:")) {
      const DensityOperator t = parse_state_spec(a.target, d);
      r = report_against(rho, t);
      r.best_phi = std::stod(a.target.substr(a.target.rfind(':') + 1));
    } else {
      r = report_against(rho, density_from_json(read_json_file(a.target)));
    }
  }
  const Json j = {{"schema_version", kSchemaVersion}, {"report", merit_to_json(r)}};
  if (!a.out.empty()) write_json_file(a.out, j);
  if (a.format == "json" || (a.format == "both" && a.out.empty())) std::cout << j.dump(1) << '\n';
  if (a.format == "table" || a.format == "both") std::cout << format_report(r, heading);
  return 0;
}

struct PipelineArgs {
  int dim = 4;
  std::string state = "mix:0.96", eta = "measured", settings = "all", method = "mle", counts, out;
  double photons = 1e6, calibration_photons = 1e6;
  std::uint64_t seed = 1;
  int trials = 1;
  int jobs = 0;
  bool calibrate = false, noiseless = false, emit_rho = false;
};

int run_pipeline_cmd(const PipelineArgs& a) {
  PipelineConfig cfg;
  cfg.dim = a.dim;
  const CascadeSpec spec = CascadeSpec::for_dimension(a.dim);
  std::tie(cfg.eta_signal, cfg.eta_idler) = load_eta(a.eta, spec.num_stages);
  cfg.settings_signal = parse_settings(a.settings, spec.num_stages);
  cfg.photons = a.photons;
  cfg.seed = a.seed;
  cfg.trials = a.trials;
  cfg.state_spec = a.state;
  if (!a.counts.empty()) cfg.counts_file = a.counts;
  cfg.calibrate = a.calibrate;
  cfg.calibration_photons = a.calibration_photons;
  cfg.noiseless = a.noiseless;
  cfg.method = a.method == "linear" ? Method::linear : Method::mle;
  cfg.jobs = a.jobs > 0 ? a.jobs : default_jobs();
  const PipelineReport report = run_pipeline(cfg);
  emit(pipeline_to_json(report, a.emit_rho), a.out);
  return report.failures > 0 ? kExitNumerical : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-bin qudit tomography with cascaded delay interferometers"};
  app.set_version_flag("--version", std::string("tbqst ") + kVersion + " (schema " + kSchemaVersion + ")");
  app.require_subcommand(1);

  const std::vector<std::string> methods{"mle", "linear"};

  OperatorsArgs op;
  auto* c_op = app.add_subcommand("operators", "Emit the POVM elements (or equivalence classes) as JSON");
  c_op->add_option("--dim", op.dim, "Qudit dimension")->check(CLI::Range(2, 64));
  c_op->add_option("--settings", op.settings, "'all' or ';'-separated settings of ','-separated angles");
  c_op->add_option("--eta", op.eta, "Transmittance JSON file, or 'measured'");
  c_op->add_option("--side", op.side, "Which side of a signal/idler file to use")->check(CLI::IsMember({"signal", "idler"}));
  c_op->add_flag("--dedup", op.dedup, "Group equivalent elements into classes");
  c_op->add_option("--out", op.out, "Output file (default stdout)");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Expected or Poisson-sampled counts");
  c_sim->add_option("--dim", sim.dim, "Qudit dimension")->check(CLI::Range(2, 64));
  c_sim->add_option("--state", sim.state, "mes:d:phi | mix:p[:phi] | maxmixed:n | FILE");
  c_sim->add_option("--eta", sim.eta, "Transmittance JSON file, or 'measured'");
  c_sim->add_option("--settings", sim.settings, "'all' or ';'-separated settings");
  c_sim->add_option("--photons", sim.photons, "Photon scale N in n = N Tr(E rho)")->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed, "Poisson seed; omit for expected counts");
  c_sim->add_flag("--coincidence", sim.coincidence, "Two-qudit coincidence counts");
  c_sim->add_option("--out", sim.out, "Output file (default stdout)");

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Estimate transmittances from single-pulse histograms");
  c_cal->add_option("--dim", cal.dim, "Qudit dimension")->check(CLI::Range(2, 64));
  c_cal->add_option("--histograms", cal.histograms, "Histogram JSON to estimate from");
  c_cal->add_option("--eta", cal.eta, "True transmittances to simulate histograms from");
  c_cal->add_option("--photons", cal.photons, "Expected counts per channel")->check(CLI::PositiveNumber);
  c_cal->add_option("--seed", cal.seed, "Poisson seed; omit for expected histograms");
  c_cal->add_option("--d1-rate", cal.d1_rate, "D1 count rate for the detector ratio");
  c_cal->add_option("--d2-rate", cal.d2_rate, "D2 count rate for the detector ratio");
  c_cal->add_option("--eta-d1", cal.eta_d1, "Detector ratio to carry over when rates are not given");
  c_cal->add_option("--out", cal.out, "Output file (default stdout)");

  ReconstructArgs rec;
  auto* c_rec = app.add_subcommand("reconstruct", "Reconstruct a density operator from counts");
  c_rec->add_option("--counts", rec.counts, "Count record JSON")->required();
  c_rec->add_option("--operators", rec.operators, "POVM element JSON (signal side for coincidences)")->required();
  c_rec->add_option("--operators-idler", rec.operators_idler, "Idler POVM element JSON (default: same as --operators)");
  c_rec->add_option("--method", rec.method, "mle or linear")->check(CLI::IsMember(methods));
  c_rec->add_option("--init", rec.init, "Initial factor, reconstruction result or density JSON");
  c_rec->add_option("--out", rec.out, "Output file (default stdout)");

  MetricsArgs met;
  auto* c_met = app.add_subcommand("metrics", "Figures of merit of a two-qudit state");
  c_met->add_option("--rho", met.rho, "Density or reconstruction JSON");
  c_met->add_option("--target", met.target, "mes:d:auto | mes:d:phi | FILE");
  c_met->add_option("--critical", met.critical, "Report the depolarized-MES values at this p")->check(CLI::Range(0.0, 1.0));
  c_met->add_option("--dim", met.dim, "Local dimension for --critical")->check(CLI::Range(2, 64));
  c_met->add_option("--format", met.format, "json, table or both")->check(CLI::IsMember({"json", "table", "both"}));
  c_met->add_option("--out", met.out, "JSON output file");

  PipelineArgs pl;
  auto* c_pl = app.add_subcommand("pipeline", "Calibrate, simulate, reconstruct and score over seeded trials");
  c_pl->add_option("--dim", pl.dim, "Qudit dimension")->check(CLI::Range(2, 64));
  c_pl->add_option("--state", pl.state, "mes:d:phi | mix:p[:phi] | maxmixed:n | FILE");
  c_pl->add_option("--eta", pl.eta, "Transmittance JSON file, or 'measured' (default)");
  c_pl->add_option("--settings", pl.settings, "'all' or ';'-separated settings");
  c_pl->add_option("--photons", pl.photons, "Photon scale N")->check(CLI::PositiveNumber);
  c_pl->add_option("--seed", pl.seed, "Base seed");
  c_pl->add_option("--trials", pl.trials, "Number of trials")->check(CLI::PositiveNumber);
  c_pl->add_option("--jobs", pl.jobs, "Parallel trials (default: TBQST_JOBS or hardware threads)");
  c_pl->add_option("--method", pl.method, "mle or linear")->check(CLI::IsMember(methods));
  c_pl->add_option("--counts", pl.counts, "Reconstruct these counts instead of simulating");
  c_pl->add_flag("--calibrate", pl.calibrate, "Build the model from simulated calibration");
  c_pl->add_option("--calibration-photons", pl.calibration_photons, "Counts per calibration channel")->check(CLI::PositiveNumber);
  c_pl->add_flag("--noiseless", pl.noiseless, "Use expected counts");
  c_pl->add_flag("--emit-rho", pl.emit_rho, "Include each reconstructed state");
  c_pl->add_option("--out", pl.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*c_op) return run_operators(op);
    if (*c_sim) return run_simulate(sim);
    if (*c_cal) return run_calibrate(cal);
    if (*c_rec) return run_reconstruct(rec);
    if (*c_met) return run_metrics(met);
    if (*c_pl) return run_pipeline_cmd(pl);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NotPsdError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
