#pragma once

#include "btd/experiment.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace btd {

using json = nlohmann::json;

// Thrown for config documents with unknown keys or ill-typed values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Paths of the BMAT files holding a report's A, B and C.
struct FactorFiles {
  std::filesystem::path A, B, C;
};

// <stem>_A.bmat, <stem>_B.bmat and <stem>_C.bmat next to `report_path`.
FactorFiles factor_files_for(const std::filesystem::path& report_path);

json to_json(const FitReport& report, const FactorFiles* files = nullptr);

// Writes the factor files, then the report JSON (each atomically).
void write_report(const std::filesystem::path& report_path,
                  const FitReport& report);

// Reads the factors referenced by a report written with write_report; the block
// partition comes from L_hat.
BtdFactors read_report_factors(const std::filesystem::path& report_path);

// Keys: R_ini, L_ini, max_iters, rel_tol, spectrum_tol, prune_threshold,
// seed, restarts and a "priors" object (psi, tau, mu, nu, kappa, theta).
// Missing keys keep the values of `base`.
FitConfig fit_config_from_json(const json& j, FitConfig base = {});
json to_json(const FitConfig& cfg);

// A Monte-Carlo study: one ScenarioSpec per SNR plus shared options.
//   {"scenario": "A" | "B" | "comparison" | "denoise" | "custom",
//    "dims": [I, J, K], "L": [...],          (required for custom)
//    "snr_db": 15 | [5, 10, 15] | "inf",
//    "runs": 50, "seed": 1, "model": "bbtd", "model1_t": 1.0,
//    "selection": "nmse" | "error", "jobs": 1, "wall_time": false,
//    "fit": {...}}
struct ScenarioConfig {
  std::vector<ScenarioSpec> specs;
  ScenarioOptions options;
};

ScenarioConfig scenario_config_from_json(const json& j);

json summary_json(const std::vector<ScenarioResult>& results,
                  const ScenarioOptions& options);

// Numbers, or the strings "inf" / "+inf" for the noiseless sentinel.
double snr_from_json(const json& j);
json snr_to_json(double snr_db);

json parse_json_file(const std::filesystem::path& path);

}  // namespace btd
