#pragma once

#include "btd/bbtd.hpp"
#include "btd/log.hpp"
#include "btd/random.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace btd::detail {

template <class State>
struct Run {
  State state;
  std::vector<double> errors;
  std::vector<double> betas;
  bool converged = false;
  std::string failure;
};

// Drives one seeded initialization to convergence or max_iters.
template <class State, class InitFn, class SweepFn>
Run<State> run_once(const FitData& data, const FitConfig& cfg,
                    std::uint64_t seed, InitFn& init, SweepFn& sweep) {
  Run<State> run;
  run.state = init(seed);
  Vector spectrum;
  int iter = 0;
  try {
    for (iter = 1; iter <= cfg.max_iters; ++iter) {
      sweep(run.state, data);
      const double err = reconstruction_error(run.state, data);
      if (!std::isfinite(err) || !std::isfinite(run.state.beta_mean)) {
        throw NumericError("non-finite reconstruction error or beta");
      }
      run.errors.push_back(err);
      run.betas.push_back(run.state.beta_mean);
      Vector next = term_spectrum(run.state);
      const double drift =
          spectrum_drift(spectrum, next, cfg.prune_rel_threshold);
      spectrum = std::move(next);
      log::trace("iter {} err {:.6e} beta {:.6e} drift {:.3e}", iter, err,
                 run.state.beta_mean, drift);
      if (drift < cfg.spectrum_tol &&
          check_convergence(run.errors, cfg.rel_tol)) {
        run.converged = true;
        break;
      }
    }
  } catch (const NumericError& e) {
    run.failure = "iteration " + std::to_string(iter) + ": " + e.what();
  }
  return run;
}

template <class State, class InitFn, class SweepFn>
RestartSet run_restarts(const Tensor3& y, const FitConfig& cfg, ModelTag tag,
                        InitFn init, SweepFn sweep) {
  cfg.validate();
  const FitData data(y);
  RestartSet set;
  set.model = tag;
  for (int r = 0; r < cfg.restarts; ++r) {
    const std::uint64_t seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    Run<State> run = run_once<State>(data, cfg, seed, init, sweep);
    if (!run.failure.empty()) {
      log::info("restart {} (seed {}) aborted: {}", r, seed, run.failure);
      set.failures.push_back("restart " + std::to_string(r) + ", " +
                             run.failure);
      continue;
    }
    log::info("restart {} finished after {} iterations, error {:.6e}", r,
              run.errors.size(), run.errors.back());
    FitReport report = extract_model(run.state, cfg);
    report.model = tag;
    report.iters_run = static_cast<int>(run.errors.size());
    report.recon_error_trace = std::move(run.errors);
    report.beta_trace = std::move(run.betas);
    report.converged = run.converged;
    report.seed = seed;
    if (run.state.degenerate_data) {
      report.warnings.push_back("input tensor is all zeros; beta clamped");
    }
    set.runs.push_back(std::move(report));
  }
  return set;
}

}  // namespace btd::detail
