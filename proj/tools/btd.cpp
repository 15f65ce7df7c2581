// Command-line front end: fit, synth, scenario, denoise, eval.

#include "btd/datagen.hpp"
#include "btd/evaluation.hpp"
#include "btd/experiment.hpp"
#include "btd/io.hpp"
#include "btd/log.hpp"
#include "btd/report_json.hpp"
#include "btd/variants.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace btd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitNotConverged = 2;

// Flags shared by every command that fits a model.
struct FitFlags {
  std::optional<std::string> model;
  std::optional<Index> rini, lini;
  std::optional<int> restarts, max_iters;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol, prune, model1_t;
  std::string config;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--model", model, "bbtd, model1, model2 or bcpd")
        ->check(CLI::IsMember({"bbtd", "model1", "model2", "bcpd"}));
    cmd.add_option("--config", config, "JSON fit configuration");
    cmd.add_option("--rini", rini, "initial number of blocks (BCPD: rank)");
    cmd.add_option("--lini", lini, "initial rank per block");
    cmd.add_option("--restarts", restarts, "seeded initializations");
    cmd.add_option("--seed", seed, "base seed");
    cmd.add_option("--tol", tol, "relative error tolerance");
    cmd.add_option("--max-iters", max_iters, "sweep limit");
    cmd.add_option("--prune-threshold", prune, "relative pruning threshold");
    cmd.add_option("--model1-t", model1_t, "fixed precision of model1");
  }

  FitConfig apply(FitConfig cfg) const {
    if (!config.empty()) {
      json j = parse_json_file(config);
      if (j.contains("fit")) j = j["fit"];
      cfg = fit_config_from_json(j, cfg);
    }
    if (rini) cfg.R_ini = *rini;
    if (lini) cfg.L_ini = *lini;
    if (restarts) cfg.restarts = *restarts;
    if (max_iters) cfg.max_iters = *max_iters;
    if (seed) cfg.seed = *seed;
    if (tol) cfg.rel_tol = *tol;
    if (prune) cfg.prune_rel_threshold = *prune;
    if (model_tag() == ModelTag::bcpd) cfg.L_ini = 1;
    cfg.validate();
    return cfg;
  }

  ModelTag model_tag() const {
    return model ? parse_model_tag(*model) : ModelTag::bbtd;
  }
};

FitReport run_fit(const Tensor3& y, const FitFlags& flags) {
  const FitConfig cfg = flags.apply({});
  return best_by_error(
      fit_restarts(y, flags.model_tag(), cfg, flags.model1_t.value_or(1.0)));
}

void print_fit_summary(const FitReport& r) {
  std::ostringstream ls;
  for (std::size_t i = 0; i < r.L_hat.size(); ++i) ls << (i ? "," : "") << r.L_hat[i];
  std::printf("model=%s R_hat=%lld L_hat=[%s] iters=%d converged=%s error=%.9g\n",
              to_string(r.model).c_str(), static_cast<long long>(r.R_hat),
              ls.str().c_str(), r.iters_run, r.converged ? "yes" : "no",
              r.final_error());
}

int cmd_fit(const std::string& input, const std::string& output,
            const FitFlags& flags) {
  const Tensor3 y = io::read_bt3d(input);
  const FitReport report = run_fit(y, flags);
  write_report(output, report);
  print_fit_summary(report);
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return report.converged ? kExitOk : kExitNotConverged;
}

struct SynthFlags {
  std::vector<Index> dims{30, 30, 30};
  std::vector<Index> L{8, 6, 4, 5, 3};
  std::string snr = "15";
  std::uint64_t seed = 0;
  std::string output, truth, clean;
};

double parse_snr(const std::string& s) {
  if (s == "inf" || s == "+inf") return kNoiseless;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad SNR '" + s + "'");
  return v;
}

int cmd_synth(const SynthFlags& f) {
  if (f.dims.size() != 3) throw std::invalid_argument("--dims needs I J K");
  ScenarioSpec spec{"synth", {f.dims[0], f.dims[1], f.dims[2]},
                    BlockPartition(f.L), parse_snr(f.snr), f.seed, 1};
  spec.validate();
  Rng rng(f.seed);
  const BtdFactors truth = gen_factors(spec.dims, spec.truth, rng);
  const Tensor3 x = compose(truth);
  const NoisyTensor noisy = add_noise(x, spec.snr_db, rng);
  io::write_bt3d(f.output, noisy.y);
  if (!f.clean.empty()) io::write_bt3d(f.clean, x);
  if (!f.truth.empty()) {
    FitReport meta;
    meta.R_hat = truth.part.blocks();
    meta.L_hat = truth.part.sizes();
    meta.factors = truth;
    meta.converged = true;
    meta.seed = f.seed;
    write_report(f.truth, meta);
  }
  std::printf("wrote %s (%lldx%lldx%lld, sigma=%.9g)\n", f.output.c_str(),
              static_cast<long long>(spec.dims.I),
              static_cast<long long>(spec.dims.J),
              static_cast<long long>(spec.dims.K), noisy.sigma);
  return kExitOk;
}

struct ScenarioFlags {
  std::string config, output;
  std::optional<int> jobs, runs;
  std::optional<std::string> snr, selection;
  FitFlags fit;
};

int cmd_scenario(const ScenarioFlags& f) {
  json j = parse_json_file(f.config);
  if (f.runs) j["runs"] = *f.runs;
  if (f.snr) j["snr_db"] = snr_to_json(parse_snr(*f.snr));
  if (f.fit.model) j["model"] = *f.fit.model;
  if (f.fit.seed) j["seed"] = *f.fit.seed;
  if (f.selection) j["selection"] = *f.selection;
  if (f.jobs) j["jobs"] = *f.jobs;
  ScenarioConfig cfg = scenario_config_from_json(j);
  FitFlags fit = f.fit;
  fit.config.clear();
  fit.model = to_string(cfg.options.model);
  if (fit.model1_t) cfg.options.model1_t = *fit.model1_t;
  cfg.options.fit = fit.apply(cfg.options.fit);

  std::string csv = metrics_csv_header();
  std::vector<ScenarioResult> results;
  for (const auto& spec : cfg.specs) {
    results.push_back(run_scenario(spec, cfg.options));
    for (const auto& run : results.back().runs) csv += to_csv(run.row);
    const auto& t = results.back().tally;
    std::printf("%s snr=%g runs=%d r_rate=%.4f l_rate=%.4f\n",
                spec.id.c_str(), spec.snr_db, t.runs, t.r_rate(), t.l_rate());
  }
  io::write_text_atomic(f.output + ".csv", csv);
  io::write_text_atomic(f.output + "_summary.json",
                        summary_json(results, cfg.options).dump(2) + "\n");
  return kExitOk;
}

struct DenoiseFlags {
  std::string input, output, truth, ssim_csv;
  FitFlags fit;
};

int cmd_denoise(const DenoiseFlags& f) {
  const Tensor3 y = io::read_bt3d(f.input);
  std::optional<Tensor3> truth;
  if (!f.truth.empty()) {
    truth = io::read_bt3d(f.truth);
    if (!(truth->dims() == y.dims())) {
      throw std::invalid_argument("--truth shape differs from the input");
    }
  }
  const FitReport report = run_fit(y, f.fit);
  const Tensor3 denoised = compose(report.factors);
  io::write_bt3d(f.output, denoised);
  print_fit_summary(report);
  if (truth) {
    const std::vector<double> bands = tensor_band_ssim(*truth, denoised);
    std::ostringstream csv;
    csv.precision(17);
    csv << "band,ssim\n";
    double mean = 0.0;
    for (std::size_t k = 0; k < bands.size(); ++k) {
      csv << k << ',' << bands[k] << '\n';
      mean += bands[k];
    }
    mean /= static_cast<double>(bands.size());
    const std::string path = f.ssim_csv.empty() ? f.output + ".ssim.csv" : f.ssim_csv;
    io::write_text_atomic(path, csv.str());
    std::printf("band_mean_ssim=%.9g\n", mean);
  }
  return report.converged ? kExitOk : kExitNotConverged;
}

int cmd_eval(const std::string& truth_path, const std::string& est_path,
             const std::string& output) {
  const BtdFactors truth = read_report_factors(truth_path);
  const BtdFactors est = read_report_factors(est_path);
  const json meta = parse_json_file(est_path);
  const MatchResult m = nmse(truth, est);

  MetricsRow row;
  row.experiment = fs::path(est_path).stem().string();
  row.seed = meta.value("seed", std::uint64_t{0});
  row.model = meta.value("model", std::string("unknown"));
  row.snr_db = std::numeric_limits<double>::quiet_NaN();
  row.R_hat = est.part.blocks();
  row.L_hat = est.part.sizes();
  row.nmse = m.total_nmse;
  row.iterations = meta.value("iters_run", 0);
  row.status = est.part.blocks() == truth.part.blocks() ? "r_success" : "r_failure";
  const std::string csv = metrics_csv_header() + to_csv(row);
  if (output.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    io::write_text_atomic(output, csv);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  log::configure_from_env();
  CLI::App app{"Bayesian block-term decomposition with automatic rank detection"};
  app.require_subcommand(1);

  std::string fit_in, fit_out;
  FitFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "fit a BT3D tensor and write a report");
  fit->add_option("input", fit_in, "BT3D tensor")->required();
  fit->add_option("-o,--output", fit_out, "report JSON path")->required();
  fit_flags.add_to(*fit);

  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "draw a synthetic noisy BTD tensor");
  synth->add_option("-o,--output", synth_flags.output, "noisy BT3D output")->required();
  synth->add_option("--dims", synth_flags.dims, "I J K")->expected(3);
  synth->add_option("--L", synth_flags.L, "block ranks")->expected(1, -1);
  synth->add_option("--snr", synth_flags.snr, "SNR in dB, or inf");
  synth->add_option("--seed", synth_flags.seed, "seed");
  synth->add_option("--truth", synth_flags.truth, "write true factors as a report");
  synth->add_option("--clean", synth_flags.clean, "write the noiseless tensor");

  ScenarioFlags sc_flags;
  auto* scenario = app.add_subcommand("scenario", "run a Monte-Carlo study");
  scenario->add_option("scenario_config", sc_flags.config, "scenario JSON")
      ->required();
  scenario->add_option("-o,--output", sc_flags.output,
                       "output prefix for .csv and _summary.json")->required();
  scenario->add_option("--jobs", sc_flags.jobs, "worker threads")
      ->check(CLI::PositiveNumber);
  scenario->add_option("--runs", sc_flags.runs, "Monte-Carlo runs");
  scenario->add_option("--snr", sc_flags.snr, "SNR in dB, or inf");
  scenario->add_option("--selection", sc_flags.selection, "nmse or error");
  sc_flags.fit.add_to(*scenario);

  DenoiseFlags dn_flags;
  auto* denoise = app.add_subcommand("denoise", "fit and write the reconstruction");
  denoise->add_option("input", dn_flags.input, "noisy BT3D")->required();
  denoise->add_option("-o,--output", dn_flags.output, "denoised BT3D")->required();
  denoise->add_option("--truth", dn_flags.truth, "clean BT3D for per-band SSIM");
  denoise->add_option("--ssim-csv", dn_flags.ssim_csv, "SSIM CSV path");
  dn_flags.fit.add_to(*denoise);

  std::string ev_truth, ev_est, ev_out;
  auto* eval = app.add_subcommand("eval", "score a fitted report against truth");
  eval->add_option("estimate", ev_est, "report JSON")->required();
  eval->add_option("--truth", ev_truth, "true factors report JSON")->required();
  eval->add_option("-o,--output", ev_out, "CSV output (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit(fit_in, fit_out, fit_flags);
    if (synth->parsed()) return cmd_synth(synth_flags);
    if (scenario->parsed()) return cmd_scenario(sc_flags);
    if (denoise->parsed()) return cmd_denoise(dn_flags);
    if (eval->parsed()) return cmd_eval(ev_truth, ev_est, ev_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
