#include "btd/experiment.hpp"

#include "btd/log.hpp"
#include "btd/random.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace btd {

std::string to_string(Selection s) {
  return s == Selection::nmse ? "nmse" : "error";
}

Selection parse_selection(const std::string& s) {
  if (s == "nmse") return Selection::nmse;
  if (s == "error") return Selection::error;
  throw std::invalid_argument("unknown selection '" + s + "'");
}

std::vector<double> ScenarioResult::nmse_values() const {
  std::vector<double> out;
  for (const auto& r : runs) {
    if (!r.failed) out.push_back(r.row.nmse);
  }
  return out;
}

int ScenarioResult::failures() const {
  return static_cast<int>(
      std::count_if(runs.begin(), runs.end(), [](const auto& r) { return r.failed; }));
}

std::uint64_t run_seed(const ScenarioSpec& spec, int run) {
  return derive_seed(spec.seed, static_cast<std::uint64_t>(run));
}

RunOutcome run_one(const ScenarioSpec& spec, const ScenarioOptions& opt,
                   int run) {
  const std::uint64_t seed = run_seed(spec, run);
  Rng rng(derive_seed(seed, 0));
  const BtdFactors truth = gen_factors(spec.dims, spec.truth, rng);
  const Tensor3 y = add_noise(compose(truth), spec.snr_db, rng).y;

  FitConfig cfg = opt.fit;
  cfg.seed = derive_seed(seed, 1);

  RunOutcome out;
  out.row.experiment = spec.id;
  out.row.seed = seed;
  out.row.model = to_string(opt.model);
  out.row.snr_db = spec.snr_db;

  const auto t0 = std::chrono::steady_clock::now();
  RestartSet set = fit_restarts(y, opt.model, cfg, opt.model1_t);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (opt.record_wall_time) out.row.wall_time_s = elapsed;

  if (set.runs.empty()) {
    out.failed = true;
    out.tally.runs = 1;
    out.tally.l_successes_given_r.assign(
        static_cast<std::size_t>(spec.truth.blocks()), 0);
    out.row.status = "failed";
    out.row.nmse = static_cast<double>(spec.truth.blocks());
    log::warn("{} run {}: every restart aborted", spec.id, run);
    return out;
  }

  std::size_t best = 0;
  for (std::size_t i = 0; i < set.runs.size(); ++i) {
    out.restart_nmse.push_back(nmse(truth, set.runs[i].factors).total_nmse);
  }
  for (std::size_t i = 1; i < set.runs.size(); ++i) {
    const bool better =
        opt.selection == Selection::nmse
            ? out.restart_nmse[i] < out.restart_nmse[best]
            : set.runs[i].final_error() < set.runs[best].final_error();
    if (better) best = i;
  }
  out.report = std::move(set.runs[best]);
  for (auto& f : set.failures) out.report.warnings.push_back(std::move(f));

  out.row.R_hat = out.report.R_hat;
  out.row.L_hat = out.report.L_hat;
  out.row.nmse = out.restart_nmse[best];
  out.row.iterations = out.report.iters_run;
  out.row.status = out.report.converged ? "ok" : "not_converged";
  tally_success(out.tally, out.report, truth);
  return out;
}

ScenarioResult run_scenario(const ScenarioSpec& spec,
                            const ScenarioOptions& opt) {
  spec.validate();
  opt.fit.validate();
  if (opt.jobs < 1) throw std::invalid_argument("jobs must be >= 1");

  ScenarioResult result;
  result.spec = spec;
  result.runs.resize(static_cast<std::size_t>(spec.runs));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int run = next++; run < spec.runs; run = next++) {
      result.runs[static_cast<std::size_t>(run)] = run_one(spec, opt, run);
      log::info("{} run {} done", spec.id, run);
    }
  };
  const int threads = std::min(opt.jobs, spec.runs);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (const auto& out : result.runs) result.tally += out.tally;
  return result;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("quantile: q must lie in [0, 1]");
  }
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace btd
