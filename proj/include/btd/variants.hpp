#pragma once

#include "btd/bbtd.hpp"

namespace btd {

// Model I: one-level Gaussian priors with a fixed precision t on every row of
// A, B and C. Only kappa/theta of fit.priors are used.
struct ModelIConfig {
  FitConfig fit;
  double t = 1.0;

  void validate() const;
};

// Model II: separate column scales for A and B, block scales on C only.
struct ModelIIState : FactorPosterior {
  Vector tA_mean, tA_recip, deltaA_mean;  // L_ini*R_ini each
  Vector tB_mean, tB_recip, deltaB_mean;
  Vector zeta_mean, zeta_recip, rho_mean;  // R_ini each
  int clamp_events = 0;
};

ModelIIState init_model2_state(const FitConfig& cfg, const Tensor3& y,
                               std::uint64_t seed);

void model1_iterate(FactorPosterior& s, const FitData& data,
                    const PriorConstants& p, double t);
void model2_iterate(ModelIIState& s, const FitData& data,
                    const PriorConstants& p);

RestartSet fit_model1_restarts(const Tensor3& y, const ModelIConfig& cfg);
FitReport fit_model1(const Tensor3& y, const ModelIConfig& cfg);

RestartSet fit_model2_restarts(const Tensor3& y, const FitConfig& cfg);
FitReport fit_model2(const Tensor3& y, const FitConfig& cfg);

// Model II with L_ini = 1 and R_ini = r_cpd_ini.
RestartSet fit_bcpd_restarts(const Tensor3& y, Index r_cpd_ini,
                             const FitConfig& cfg);
FitReport fit_bcpd(const Tensor3& y, Index r_cpd_ini, const FitConfig& cfg);

// Runs the model named by `tag`. bcpd takes its rank from cfg.R_ini and
// ignores cfg.L_ini; model1_t is used by model1 only.
RestartSet fit_restarts(const Tensor3& y, ModelTag tag, const FitConfig& cfg,
                        double model1_t = 1.0);

// ||Y - X||_F^2 + t (||A||_F^2 + ||B||_F^2 + ||C||_F^2)
double map_objective_model1(const BtdFactors& f, const Tensor3& y, double t);

// (beta/2) ||Y - X||_F^2
//   + sqrt(beta) (sum_q sqrt(dA_q) |a_q| + sum_q sqrt(dB_q) |b_q|
//                 + sum_r sqrt(rho_r) |c_r|)
double map_objective_model2(const BtdFactors& f, const Tensor3& y, double beta,
                            const Vector& deltaA, const Vector& deltaB,
                            const Vector& rho);

}  // namespace btd
