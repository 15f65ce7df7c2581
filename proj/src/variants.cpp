#include "btd/variants.hpp"

#include "btd/detail/restarts.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace btd {
namespace {

constexpr double kMinDenominator = 1e-300;

double squared_residual(const BtdFactors& f, const Tensor3& y) {
  f.validate();
  if (!(f.dims() == y.dims())) {
    throw std::invalid_argument("objective: factor and tensor shapes differ");
  }
  const Matrix y3 = unfold(y, 3);
  if (f.part.blocks() == 0) return y3.squaredNorm();
  return (y3 - f.C * build_S(f.A, f.B, f.part).transpose()).squaredNorm();
}

double finish_beta(FactorPosterior& s, const PriorConstants& p, double denom) {
  const double beta = beta_numerator(s, p) / std::max(denom, kMinDenominator);
  if (!std::isfinite(beta)) throw NumericError("non-finite beta update");
  s.beta_mean = beta;
  return beta;
}

}  // namespace

void ModelIConfig::validate() const {
  fit.validate();
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("model I t must be finite and > 0");
  }
}

ModelIIState init_model2_state(const FitConfig& cfg, const Tensor3& y,
                               std::uint64_t seed) {
  const PosteriorState base = init_state(cfg, y, seed);
  ModelIIState s;
  static_cast<FactorPosterior&>(s) = base;
  s.tA_mean = base.t_mean;
  s.tA_recip = base.t_recip;
  s.deltaA_mean = base.delta_mean;
  s.tB_mean = base.t_mean;
  s.tB_recip = base.t_recip;
  s.deltaB_mean = base.delta_mean;
  s.zeta_mean = base.zeta_mean;
  s.zeta_recip = base.zeta_recip;
  s.rho_mean = base.rho_mean;
  return s;
}

void model1_iterate(FactorPosterior& s, const FitData& data,
                    const PriorConstants& p, double t) {
  const Index LR = s.L_ini * s.R_ini;
  update_factor(s, data.Y1, 1, Vector::Constant(LR, t));
  update_factor(s, data.Y2, 2, Vector::Constant(LR, t));
  update_factor(s, data.Y3, 3, Vector::Constant(s.R_ini, t));

  const Matrix AtA = second_moment(s.meanA, s.covA);
  const Matrix BtB = second_moment(s.meanB, s.covB);
  const Matrix CtC = second_moment(s.meanC, s.covC);
  const double resid = expected_residual(s, data, AtA, BtB, CtC);
  const double penalty = t * (AtA.trace() + BtB.trace() + CtC.trace());
  finish_beta(s, p, 2.0 * p.theta + resid + penalty);
}

void model2_iterate(ModelIIState& s, const FitData& data,
                    const PriorConstants& p) {
  update_factor(s, data.Y1, 1, s.tA_mean);
  update_factor(s, data.Y2, 2, s.tB_mean);
  update_factor(s, data.Y3, 3, s.zeta_mean);

  const auto [I, J, K] = s.dims();
  const Matrix AtA = second_moment(s.meanA, s.covA);
  const Matrix BtB = second_moment(s.meanB, s.covB);
  const Matrix CtC = second_moment(s.meanC, s.covC);
  auto scales = [&](Vector& mean, Vector& recip, Vector& scale,
                    const Matrix& gram, double count, double shape,
                    double rate) {
    for (Index q = 0; q < mean.size(); ++q) {
      const ScaleUpdate u = gig_scale_update(
          scale(q), s.beta_mean * gram(q, q), count, shape, rate);
      mean(q) = u.mean;
      recip(q) = u.recip;
      scale(q) = u.scale;
      if (u.clamped) ++s.clamp_events;
    }
  };
  scales(s.tA_mean, s.tA_recip, s.deltaA_mean, AtA,
         static_cast<double>(I + 1), p.psi, p.tau);
  scales(s.tB_mean, s.tB_recip, s.deltaB_mean, BtB,
         static_cast<double>(J + 1), p.psi, p.tau);
  scales(s.zeta_mean, s.zeta_recip, s.rho_mean, CtC,
         static_cast<double>(K + 1), p.mu, p.nu);

  const double resid = expected_residual(s, data, AtA, BtB, CtC);
  const double penalty = s.tA_mean.dot(AtA.diagonal()) +
                         s.tB_mean.dot(BtB.diagonal()) +
                         s.zeta_mean.dot(CtC.diagonal());
  finish_beta(s, p, 2.0 * p.theta + resid + penalty);
}

RestartSet fit_model1_restarts(const Tensor3& y, const ModelIConfig& cfg) {
  cfg.validate();
  auto init = [&](std::uint64_t seed) {
    return FactorPosterior(init_state(cfg.fit, y, seed));
  };
  auto sweep = [&](FactorPosterior& s, const FitData& data) {
    model1_iterate(s, data, cfg.fit.priors, cfg.t);
  };
  return detail::run_restarts<FactorPosterior>(y, cfg.fit, ModelTag::model1,
                                               init, sweep);
}

FitReport fit_model1(const Tensor3& y, const ModelIConfig& cfg) {
  return best_by_error(fit_model1_restarts(y, cfg));
}

namespace {

RestartSet run_model2(const Tensor3& y, const FitConfig& cfg, ModelTag tag) {
  auto init = [&](std::uint64_t seed) {
    return init_model2_state(cfg, y, seed);
  };
  auto sweep = [&](ModelIIState& s, const FitData& data) {
    model2_iterate(s, data, cfg.priors);
  };
  return detail::run_restarts<ModelIIState>(y, cfg, tag, init, sweep);
}

}  // namespace

RestartSet fit_model2_restarts(const Tensor3& y, const FitConfig& cfg) {
  return run_model2(y, cfg, ModelTag::model2);
}

FitReport fit_model2(const Tensor3& y, const FitConfig& cfg) {
  return best_by_error(fit_model2_restarts(y, cfg));
}

RestartSet fit_bcpd_restarts(const Tensor3& y, Index r_cpd_ini,
                             const FitConfig& cfg) {
  if (r_cpd_ini < 1) throw std::invalid_argument("BCPD rank must be >= 1");
  FitConfig c = cfg;
  c.R_ini = r_cpd_ini;
  c.L_ini = 1;
  return run_model2(y, c, ModelTag::bcpd);
}

FitReport fit_bcpd(const Tensor3& y, Index r_cpd_ini, const FitConfig& cfg) {
  return best_by_error(fit_bcpd_restarts(y, r_cpd_ini, cfg));
}

RestartSet fit_restarts(const Tensor3& y, ModelTag tag, const FitConfig& cfg,
                        double model1_t) {
  switch (tag) {
    case ModelTag::bbtd: return fit_restarts(y, cfg);
    case ModelTag::model1: return fit_model1_restarts(y, {cfg, model1_t});
    case ModelTag::model2: return fit_model2_restarts(y, cfg);
    case ModelTag::bcpd: return fit_bcpd_restarts(y, cfg.R_ini, cfg);
  }
  throw std::invalid_argument("unknown model tag");
}

double map_objective_model1(const BtdFactors& f, const Tensor3& y, double t) {
  return squared_residual(f, y) +
         t * (f.A.squaredNorm() + f.B.squaredNorm() + f.C.squaredNorm());
}

double map_objective_model2(const BtdFactors& f, const Tensor3& y, double beta,
                            const Vector& deltaA, const Vector& deltaB,
                            const Vector& rho) {
  if (deltaA.size() != f.A.cols() || deltaB.size() != f.B.cols() ||
      rho.size() != f.C.cols()) {
    throw std::invalid_argument("objective: scale vector sizes differ");
  }
  const double groups =
      deltaA.cwiseSqrt().dot(f.A.colwise().norm().transpose()) +
      deltaB.cwiseSqrt().dot(f.B.colwise().norm().transpose()) +
      rho.cwiseSqrt().dot(f.C.colwise().norm().transpose());
  return 0.5 * beta * squared_residual(f, y) + std::sqrt(beta) * groups;
}

}  // namespace btd
