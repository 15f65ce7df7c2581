#pragma once

#include "btd/tensor.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace btd {

// Shape/rate constants of the Gamma hyperpriors: (psi, tau) on the column
// scales, (mu, nu) on the block scales, (kappa, theta) on the noise precision.
struct PriorConstants {
  double psi = 1e-6;
  double tau = 1e-6;
  double mu = 1e-6;
  double nu = 1e-6;
  double kappa = 1e-6;
  double theta = 1e-6;

  void validate() const;
};

struct FitConfig {
  Index R_ini = 10;
  Index L_ini = 10;
  PriorConstants priors;
  int max_iters = 500;
  double rel_tol = 1e-6;
  double prune_rel_threshold = 1e-4;
  std::uint64_t seed = 0;
  int restarts = 1;
  // Besides the error test, no block-term singular value may move by more than
  // this relative amount in the last sweep.
  double spectrum_tol = 1e-3;

  void validate() const;
};

enum class ModelTag { bbtd, model1, model2, bcpd };

std::string to_string(ModelTag tag);
ModelTag parse_model_tag(const std::string& s);

// Gaussian factor posteriors shared by every model: row means plus one
// covariance per factor (all rows of a factor share it) and E[beta].
struct FactorPosterior {
  Matrix meanA;  // I x L_ini*R_ini
  Matrix meanB;  // J x L_ini*R_ini
  Matrix meanC;  // K x R_ini
  Matrix covA;
  Matrix covB;
  Matrix covC;
  double beta_mean = 1.0;
  Index L_ini = 1;
  Index R_ini = 1;
  bool degenerate_data = false;

  BlockPartition partition() const {
    return BlockPartition::uniform(R_ini, L_ini);
  }
  Dims dims() const { return {meanA.rows(), meanB.rows(), meanC.rows()}; }
};

struct PosteriorState : FactorPosterior {
  Vector t_mean;      // L_ini*R_ini, column-scale hyperparameters
  Vector t_recip;
  Vector delta_mean;
  Vector zeta_mean;   // R_ini, block-scale hyperparameters
  Vector zeta_recip;
  Vector rho_mean;
  int clamp_events = 0;
};

struct ExpectedStats {
  Matrix P, Q, S;
  Matrix PtP, QtQ, StS;
  Matrix AtA, BtB, CtC;
};

struct FitReport {
  ModelTag model = ModelTag::bbtd;
  Index R_hat = 0;
  std::vector<Index> L_hat;
  BtdFactors factors;
  int iters_run = 0;
  std::vector<double> recon_error_trace;
  std::vector<double> beta_trace;
  bool converged = false;
  std::uint64_t seed = 0;  // seed of the winning restart
  std::vector<std::string> warnings;

  double final_error() const {
    return recon_error_trace.empty() ? 0.0 : recon_error_trace.back();
  }
};

// Every restart aborted on a numeric failure.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Pre-unfolded data shared by all sweeps of a fit.
struct FitData {
  explicit FitData(const Tensor3& y);

  Dims dims;
  Matrix Y1;  // I x JK
  Matrix Y2;  // J x IK
  Matrix Y3;  // K x IJ
  double y_sq;
};

// Scalar GIG(-1/2) scale update followed by the Gamma update of its scale:
//   mean  = sqrt(scale / rate)
//   recip = 1/scale + 1/mean
//   scale' = (2*prior_shape + count) / (2*prior_rate + recip)
struct ScaleUpdate {
  double mean;
  double recip;
  double scale;
  bool clamped;
};
ScaleUpdate gig_scale_update(double scale, double rate, double count,
                             double prior_shape, double prior_rate);

PosteriorState init_state(const FitConfig& cfg, const Tensor3& y,
                          std::uint64_t seed);

Matrix second_moment(const Matrix& mean, const Matrix& cov);

ExpectedStats compute_expected_stats(const FactorPosterior& s);

// Refreshes the (mean, cov) pair of one factor given per-column prior
// precisions (excluding beta). y_unfold is the mode's unfolding.
void update_factor(FactorPosterior& s, const Eigen::Ref<const Matrix>& y_unfold,
                   int mode, const Vector& penalty);

// Main-model prior precisions: t * (zeta (x) 1_L) for modes 1 and 2, zeta for
// mode 3.
Vector bbtd_penalty(const PosteriorState& s, int mode);

void update_factor(PosteriorState& s, const Eigen::Ref<const Matrix>& y_unfold,
                   int mode);

void update_t(PosteriorState& s, const Matrix& AtA, const Matrix& BtB,
              const PriorConstants& p, Index r, Index l);
void update_zeta(PosteriorState& s, const Matrix& AtA, const Matrix& BtB,
                 const Matrix& CtC, const PriorConstants& p, Index r);

// <||Y_(1)^T - P A^T||_F^2>, clamped at 0.
double expected_residual(const FactorPosterior& s, const FitData& data,
                         const Matrix& AtA, const Matrix& BtB,
                         const Matrix& CtC);

double beta_numerator(const FactorPosterior& s, const PriorConstants& p);

double update_beta(PosteriorState& s, const FitData& data,
                   const PriorConstants& p);

double reconstruction_error(const FactorPosterior& s, const FitData& data);

void vi_iterate(PosteriorState& s, const FitData& data,
                const PriorConstants& p);
void vi_iterate(PosteriorState& s, const Tensor3& y, const PriorConstants& p);

bool check_convergence(const std::vector<double>& trace, double rel_tol);

// ||A_r B_r^T o c_r||_F^2 of every block, from the posterior means.
Vector block_term_energy(const FactorPosterior& s);

// Singular values of every block term A_r B_r^T o c_r, L_ini per block in
// descending order. Invariant to the scaling and in-block rotation ambiguities.
Vector term_spectrum(const FactorPosterior& s);

// Largest relative change between two term_spectrum snapshots over the values
// above thr times the largest one; +inf when the sizes differ.
double spectrum_drift(const Vector& prev, const Vector& next, double thr);

// Keeps blocks whose term energy exceeds prune_rel_threshold times the largest
// one, then within each kept block the columns whose |a|^2 + |b|^2 exceeds the
// threshold relative to that block's largest column. L_hat[r] is the numerical
// rank of the kept A_r B_r^T (squared singular values above the threshold
// relative to the largest); a block with more columns than that rank is
// returned as its truncated SVD.
FitReport extract_model(const FactorPosterior& s, const FitConfig& cfg);

// Every restart of one fit. Restart r is seeded with derive_seed(cfg.seed, r).
struct RestartSet {
  ModelTag model = ModelTag::bbtd;
  std::vector<FitReport> runs;        // finished restarts, in restart order
  std::vector<std::string> failures;  // diagnostics of aborted restarts
};

// Lowest final reconstruction error; the earlier restart wins ties. Failure
// diagnostics are appended to the winner's warnings.
FitReport best_by_error(RestartSet set);

RestartSet fit_restarts(const Tensor3& y, const FitConfig& cfg);

// best_by_error(fit_restarts(y, cfg)).
FitReport fit(const Tensor3& y, const FitConfig& cfg);

}  // namespace btd
