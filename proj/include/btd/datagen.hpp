#pragma once

#include "btd/random.hpp"
#include "btd/tensor.hpp"

#include <cstdint>
#include <limits>
#include <string>

namespace btd {

struct ScenarioSpec {
  std::string id = "custom";
  Dims dims{30, 30, 30};
  BlockPartition truth;
  double snr_db = 15.0;  // +inf means noiseless
  std::uint64_t seed = 0;
  int runs = 1;

  void validate() const;
};

// Scenario A: uniqueness condition min(I,J) > sum L holds.
ScenarioSpec scenario_a(double snr_db, int runs, std::uint64_t seed);
// Scenario B: min(I,J) < sum L.
ScenarioSpec scenario_b(double snr_db, int runs, std::uint64_t seed);
// 18x18x10, R=3, L={8,6,4}: the model-comparison setting.
ScenarioSpec model_comparison_setting(double snr_db, int runs,
                                      std::uint64_t seed);
// 40x40x20 cube with L = {5, 4, 3, 3}, used for the denoising comparison.
ScenarioSpec denoise_setting(double snr_db, int runs, std::uint64_t seed);

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

// i.i.d. standard-normal factors; A_r or B_r that are numerically
// column-rank-deficient (tolerance 1e-10) are redrawn.
BtdFactors gen_factors(Dims dims, const BlockPartition& truth, Rng& rng);

// x(i,j,k) = sum_r sum_l a_rl(i) b_rl(j) c_r(k), by direct summation.
Tensor3 compose(const BtdFactors& f);

// The r-th block term A_r B_r^T o c_r.
Tensor3 compose_term(const BtdFactors& f, Index r);

struct NoisyTensor {
  Tensor3 y;
  double sigma;
};

// Adds sigma*N with sigma chosen so the realized SNR equals snr_db exactly.
NoisyTensor add_noise(const Tensor3& x, double snr_db, Rng& rng);

double realized_snr_db(const Tensor3& x, const Tensor3& y);

}  // namespace btd
