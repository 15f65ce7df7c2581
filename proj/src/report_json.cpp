#include "btd/report_json.hpp"

#include "btd/io.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace btd {
namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void maybe(const json& j, const std::string& key, T& out,
           const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

}  // namespace

FactorFiles factor_files_for(const std::filesystem::path& report_path) {
  const auto dir = report_path.parent_path();
  const std::string stem = report_path.stem().string();
  return {dir / (stem + "_A.bmat"), dir / (stem + "_B.bmat"),
          dir / (stem + "_C.bmat")};
}

json to_json(const FitReport& report, const FactorFiles* files) {
  json j;
  j["model"] = to_string(report.model);
  j["R_hat"] = report.R_hat;
  j["L_hat"] = report.L_hat;
  j["iters_run"] = report.iters_run;
  j["converged"] = report.converged;
  j["seed"] = report.seed;
  j["recon_error_trace"] = report.recon_error_trace;
  j["beta_trace"] = report.beta_trace;
  j["warnings"] = report.warnings;
  if (files) {
    j["factors"] = {{"A", files->A.filename().string()},
                    {"B", files->B.filename().string()},
                    {"C", files->C.filename().string()}};
  }
  return j;
}

void write_report(const std::filesystem::path& report_path,
                  const FitReport& report) {
  const FactorFiles files = factor_files_for(report_path);
  io::write_bmat(files.A, report.factors.A);
  io::write_bmat(files.B, report.factors.B);
  io::write_bmat(files.C, report.factors.C);
  io::write_text_atomic(report_path, to_json(report, &files).dump(2) + "\n");
}

BtdFactors read_report_factors(const std::filesystem::path& report_path) {
  const json j = parse_json_file(report_path);
  const std::string where = report_path.string();
  const auto dir = report_path.parent_path();
  if (!j.contains("factors")) throw ConfigError(where + ": no factor files");
  const json& files = j["factors"];
  BtdFactors f;
  f.A = io::read_bmat(dir / get<std::string>(files, "A", where));
  f.B = io::read_bmat(dir / get<std::string>(files, "B", where));
  f.C = io::read_bmat(dir / get<std::string>(files, "C", where));
  try {
    f.part = BlockPartition(get<std::vector<Index>>(j, "L_hat", where));
    f.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return f;
}

FitConfig fit_config_from_json(const json& j, FitConfig cfg) {
  const std::string where = "fit";
  reject_unknown(j,
                 {"R_ini", "L_ini", "max_iters", "rel_tol", "spectrum_tol",
                  "prune_threshold", "seed", "restarts", "priors"},
                 where);
  maybe(j, "R_ini", cfg.R_ini, where);
  maybe(j, "L_ini", cfg.L_ini, where);
  maybe(j, "max_iters", cfg.max_iters, where);
  maybe(j, "rel_tol", cfg.rel_tol, where);
  maybe(j, "spectrum_tol", cfg.spectrum_tol, where);
  maybe(j, "prune_threshold", cfg.prune_rel_threshold, where);
  maybe(j, "seed", cfg.seed, where);
  maybe(j, "restarts", cfg.restarts, where);
  if (j.contains("priors")) {
    const json& p = j["priors"];
    const std::string pw = "fit.priors";
    reject_unknown(p, {"psi", "tau", "mu", "nu", "kappa", "theta"}, pw);
    maybe(p, "psi", cfg.priors.psi, pw);
    maybe(p, "tau", cfg.priors.tau, pw);
    maybe(p, "mu", cfg.priors.mu, pw);
    maybe(p, "nu", cfg.priors.nu, pw);
    maybe(p, "kappa", cfg.priors.kappa, pw);
    maybe(p, "theta", cfg.priors.theta, pw);
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return cfg;
}

json to_json(const FitConfig& cfg) {
  return {{"R_ini", cfg.R_ini},
          {"L_ini", cfg.L_ini},
          {"max_iters", cfg.max_iters},
          {"rel_tol", cfg.rel_tol},
          {"spectrum_tol", cfg.spectrum_tol},
          {"prune_threshold", cfg.prune_rel_threshold},
          {"seed", cfg.seed},
          {"restarts", cfg.restarts},
          {"priors",
           {{"psi", cfg.priors.psi},
            {"tau", cfg.priors.tau},
            {"mu", cfg.priors.mu},
            {"nu", cfg.priors.nu},
            {"kappa", cfg.priors.kappa},
            {"theta", cfg.priors.theta}}}};
}

double snr_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kNoiseless;
  }
  throw ConfigError("snr_db: expected a number or \"inf\"");
}

json snr_to_json(double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0) return "inf";
  return snr_db;
}

ScenarioConfig scenario_config_from_json(const json& j) {
  const std::string where = "scenario";
  reject_unknown(j,
                 {"scenario", "dims", "L", "snr_db", "runs", "seed", "model",
                  "model1_t", "selection", "jobs", "wall_time", "fit"},
                 where);
  const std::string kind = j.contains("scenario")
                               ? get<std::string>(j, "scenario", where)
                               : std::string("custom");
  int runs = 1;
  std::uint64_t seed = 0;
  maybe(j, "runs", runs, where);
  maybe(j, "seed", seed, where);
  if (runs < 1) throw ConfigError("scenario.runs must be >= 1");

  std::vector<double> snrs{15.0};
  if (j.contains("snr_db")) {
    snrs.clear();
    const json& s = j["snr_db"];
    if (s.is_array()) {
      for (const auto& v : s) snrs.push_back(snr_from_json(v));
    } else {
      snrs.push_back(snr_from_json(s));
    }
    if (snrs.empty()) throw ConfigError("scenario.snr_db: empty list");
  }

  ScenarioConfig cfg;
  for (double snr : snrs) {
    ScenarioSpec spec;
    if (kind == "A") {
      spec = scenario_a(snr, runs, seed);
    } else if (kind == "B") {
      spec = scenario_b(snr, runs, seed);
    } else if (kind == "comparison") {
      spec = model_comparison_setting(snr, runs, seed);
    } else if (kind == "denoise") {
      spec = denoise_setting(snr, runs, seed);
    } else if (kind == "custom") {
      if (!j.contains("dims") || !j.contains("L")) {
        throw ConfigError("scenario: custom scenarios need dims and L");
      }
      spec = {"custom", {}, {}, snr, seed, runs};
    } else {
      throw ConfigError("scenario: unknown scenario '" + kind + "'");
    }
    if (j.contains("dims")) {
      const auto d = get<std::vector<Index>>(j, "dims", where);
      if (d.size() != 3) throw ConfigError("scenario.dims: need [I, J, K]");
      spec.dims = {d[0], d[1], d[2]};
    }
    try {
      if (j.contains("L")) {
        spec.truth = BlockPartition(get<std::vector<Index>>(j, "L", where));
      }
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + ": " + e.what());
    }
    cfg.specs.push_back(std::move(spec));
  }

  ScenarioOptions& opt = cfg.options;
  try {
    if (j.contains("model")) {
      opt.model = parse_model_tag(get<std::string>(j, "model", where));
    }
    if (j.contains("selection")) {
      opt.selection = parse_selection(get<std::string>(j, "selection", where));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  maybe(j, "model1_t", opt.model1_t, where);
  maybe(j, "jobs", opt.jobs, where);
  maybe(j, "wall_time", opt.record_wall_time, where);
  if (opt.jobs < 1) throw ConfigError("scenario.jobs must be >= 1");
  if (!(opt.model1_t > 0.0)) throw ConfigError("scenario.model1_t must be > 0");
  if (j.contains("fit")) opt.fit = fit_config_from_json(j["fit"], opt.fit);
  return cfg;
}

json summary_json(const std::vector<ScenarioResult>& results,
                  const ScenarioOptions& options) {
  json out;
  out["model"] = to_string(options.model);
  out["selection"] = to_string(options.selection);
  out["fit"] = to_json(options.fit);
  out["results"] = json::array();
  for (const auto& r : results) {
    json e;
    e["experiment"] = r.spec.id;
    e["snr_db"] = snr_to_json(r.spec.snr_db);
    e["runs"] = r.tally.runs;
    e["failures"] = r.failures();
    e["r_rate"] = r.tally.r_rate();
    e["l_rate"] = r.tally.l_rate();
    e["l_successes_given_r"] = r.tally.l_successes_given_r;
    const auto values = r.nmse_values();
    if (!values.empty()) {
      e["nmse_quantiles"] = {{"q10", quantile(values, 0.1)},
                             {"q50", quantile(values, 0.5)},
                             {"q90", quantile(values, 0.9)}};
    } else {
      e["nmse_quantiles"] = nullptr;
    }
    out["results"].push_back(std::move(e));
  }
  return out;
}

json parse_json_file(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = io::read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw io::FormatError(path.string() + ": invalid JSON", e.byte);
  }
}

}  // namespace btd
