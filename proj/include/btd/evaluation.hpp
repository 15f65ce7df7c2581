#pragma once

#include "btd/bbtd.hpp"
#include "btd/tensor.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace btd {

struct Assignment {
  // row_to_col[i] is the column matched to row i, or -1 when rows > cols.
  std::vector<Index> row_to_col;
  double cost = 0.0;
};

// Minimum-cost assignment over min(rows, cols) pairs. Rectangular inputs are
// padded to square with 1 + max entry.
Assignment hungarian(const Matrix& cost);

struct MatchResult {
  // assignment[s] = true block matched to estimated block s, or -1.
  std::vector<Index> assignment;
  std::vector<double> per_term_nmse;  // one per true block
  double total_nmse = 0.0;
};

// Sum over true block terms of ||X_r - Xhat_match(r)||^2 / ||X_r||^2 after
// Hungarian matching. Unmatched true terms score 1; surplus estimated terms
// are ignored.
MatchResult nmse(const BtdFactors& truth, const BtdFactors& est);

struct SuccessTally {
  int runs = 0;
  int r_successes = 0;
  std::vector<int> l_successes_given_r;  // per true block
  int l_eligible = 0;

  double r_rate() const;
  // Fraction of (eligible run, true block) pairs with the correct L.
  double l_rate() const;
  SuccessTally& operator+=(const SuccessTally& other);
};

// Adds one run: R success iff R_hat == R; on success, block ranks are compared
// after matching the estimated blocks to the true ones.
void tally_success(SuccessTally& tally, const FitReport& report,
                   const BtdFactors& truth);

// Empirical CDF: (value, fraction of samples <= value) at each distinct value.
std::vector<std::pair<double, double>> ecdf(std::vector<double> values);
double ecdf_at(const std::vector<std::pair<double, double>>& curve, double x);

// SSIM of two equally shaped windows.
double ssim(const Matrix& x_window, const Matrix& y_window, double c1,
            double c2);

struct SsimOptions {
  Index window = 8;
  Index stride = 4;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Mean windowed SSIM of one band; c1 = (k1*D)^2, c2 = (k2*D)^2 with D the
// dynamic range of the reference band.
double band_ssim(const Matrix& reference, const Matrix& test,
                 const SsimOptions& opt = {});

// Per-band (frontal slice k) SSIM of two tensors.
std::vector<double> tensor_band_ssim(const Tensor3& reference,
                                     const Tensor3& test,
                                     const SsimOptions& opt = {});

Matrix frontal_slice(const Tensor3& t, Index k);

// One line of the metrics table.
struct MetricsRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string model;
  double snr_db = 0.0;
  Index R_hat = 0;
  std::vector<Index> L_hat;
  double nmse = 0.0;
  int iterations = 0;
  std::optional<double> wall_time_s;
  std::string status = "ok";
};

std::string metrics_csv_header();
std::string to_csv(const MetricsRow& row);

}  // namespace btd
