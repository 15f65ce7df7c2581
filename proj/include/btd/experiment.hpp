#pragma once

#include "btd/datagen.hpp"
#include "btd/evaluation.hpp"
#include "btd/variants.hpp"

#include <string>
#include <vector>

namespace btd {

// How the reported restart is chosen within one run. `nmse` uses the known
// truth and is what the Monte-Carlo studies report; `error` is what a fit
// without truth does.
enum class Selection { nmse, error };

std::string to_string(Selection s);
Selection parse_selection(const std::string& s);

struct ScenarioOptions {
  ModelTag model = ModelTag::bbtd;
  FitConfig fit;
  double model1_t = 1.0;
  Selection selection = Selection::nmse;
  int jobs = 1;
  bool record_wall_time = false;
};

// One Monte-Carlo run.
struct RunOutcome {
  MetricsRow row;
  FitReport report;                 // selected restart; empty when failed
  std::vector<double> restart_nmse; // every finished restart, in order
  SuccessTally tally;               // this run alone
  bool failed = false;
};

struct ScenarioResult {
  ScenarioSpec spec;
  SuccessTally tally;
  std::vector<RunOutcome> runs;

  std::vector<double> nmse_values() const;  // selected runs that finished
  int failures() const;
};

// Seeds of run `run`: the data are drawn from derive_seed(run_seed, 0) and the
// fit uses derive_seed(run_seed, 1), where run_seed = derive_seed(spec.seed, run).
std::uint64_t run_seed(const ScenarioSpec& spec, int run);

// One run of the protocol: draw factors, compose, add noise, fit every
// restart, select one and score it.
RunOutcome run_one(const ScenarioSpec& spec, const ScenarioOptions& opt,
                   int run);

// All runs, on up to opt.jobs threads. The result does not depend on jobs.
ScenarioResult run_scenario(const ScenarioSpec& spec,
                            const ScenarioOptions& opt);

// Linear-interpolation quantile (q in [0, 1]) of a nonempty sample.
double quantile(std::vector<double> values, double q);

}  // namespace btd
