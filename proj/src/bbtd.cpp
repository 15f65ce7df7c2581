#include "btd/bbtd.hpp"

#include "btd/detail/restarts.hpp"
#include "btd/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace btd {
namespace {

constexpr double kMinDenominator = 1e-300;
constexpr double kBetaMin = 1e-8;
constexpr double kBetaMax = 1e8;

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite ") + what);
}

const char* mode_name(int mode) {
  switch (mode) {
    case 1: return "mode 1 (A)";
    case 2: return "mode 2 (B)";
    default: return "mode 3 (C)";
  }
}

}  // namespace

void PriorConstants::validate() const {
  for (double v : {psi, tau, mu, nu, kappa, theta}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("prior constants must be finite and >= 0");
    }
  }
}

void FitConfig::validate() const {
  if (R_ini < 1 || L_ini < 1) {
    throw std::invalid_argument("R_ini and L_ini must be >= 1");
  }
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("rel_tol must be > 0");
  if (!(prune_rel_threshold > 0.0 && prune_rel_threshold < 1.0)) {
    throw std::invalid_argument("prune threshold must lie in (0, 1)");
  }
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (!(spectrum_tol > 0.0)) throw std::invalid_argument("spectrum_tol must be > 0");
  priors.validate();
}

std::string to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::bbtd: return "bbtd";
    case ModelTag::model1: return "model1";
    case ModelTag::model2: return "model2";
    case ModelTag::bcpd: return "bcpd";
  }
  return "bbtd";
}

ModelTag parse_model_tag(const std::string& s) {
  if (s == "bbtd") return ModelTag::bbtd;
  if (s == "model1") return ModelTag::model1;
  if (s == "model2") return ModelTag::model2;
  if (s == "bcpd") return ModelTag::bcpd;
  throw std::invalid_argument("unknown model tag '" + s + "'");
}

FitData::FitData(const Tensor3& y)
    : dims(y.dims()),
      Y1(unfold(y, 1)),
      Y2(unfold(y, 2)),
      Y3(unfold(y, 3)),
      y_sq(y.squared_norm()) {}

ScaleUpdate gig_scale_update(double scale, double rate, double count,
                             double prior_shape, double prior_rate) {
  ScaleUpdate u{};
  u.clamped = rate < kMinDenominator;
  u.mean = std::sqrt(scale / std::max(rate, kMinDenominator));
  u.recip = 1.0 / scale + 1.0 / u.mean;
  u.scale = (2.0 * prior_shape + count) / (2.0 * prior_rate + u.recip);
  return u;
}

PosteriorState init_state(const FitConfig& cfg, const Tensor3& y,
                          std::uint64_t seed) {
  cfg.validate();
  const auto [I, J, K] = y.dims();
  const Index L = cfg.L_ini;
  const Index R = cfg.R_ini;
  const Index LR = L * R;
  Rng rng(seed);
  PosteriorState s;
  s.L_ini = L;
  s.R_ini = R;
  s.meanB = standard_normal(J, LR, rng);
  s.meanC = standard_normal(K, R, rng);
  s.meanA = Matrix::Zero(I, LR);
  s.covA = Matrix::Identity(LR, LR);
  s.covB = Matrix::Identity(LR, LR);
  s.covC = Matrix::Identity(R, R);
  s.t_mean = Vector::Ones(LR);
  s.delta_mean = Vector::Ones(LR);
  s.t_recip = s.delta_mean.cwiseInverse() + s.t_mean.cwiseInverse();
  s.zeta_mean = Vector::Ones(R);
  s.rho_mean = Vector::Ones(R);
  s.zeta_recip = s.rho_mean.cwiseInverse() + s.zeta_mean.cwiseInverse();

  const double energy = y.squared_norm();
  const double beta = energy > 0.0
                          ? static_cast<double>(y.dims().numel()) / energy
                          : kBetaMax;
  s.beta_mean = std::clamp(beta, kBetaMin, kBetaMax);
  s.degenerate_data = energy == 0.0;
  return s;
}

Matrix second_moment(const Matrix& mean, const Matrix& cov) {
  Matrix g = mean.transpose() * mean + static_cast<double>(mean.rows()) * cov;
  return 0.5 * (g + g.transpose());
}

ExpectedStats compute_expected_stats(const FactorPosterior& s) {
  const BlockPartition part = s.partition();
  ExpectedStats st;
  st.AtA = second_moment(s.meanA, s.covA);
  st.BtB = second_moment(s.meanB, s.covB);
  st.CtC = second_moment(s.meanC, s.covC);
  st.P = khatri_rao_partition(s.meanB, s.meanC, part);
  st.Q = khatri_rao_partition(s.meanA, s.meanC, part);
  st.S = build_S(s.meanA, s.meanB, part);
  st.PtP = gram_kr_identities(st.BtB, st.CtC, s.L_ini, s.R_ini, GramKind::P);
  st.QtQ = gram_kr_identities(st.AtA, st.CtC, s.L_ini, s.R_ini, GramKind::Q);
  st.StS = gram_kr_identities(st.AtA, st.BtB, s.L_ini, s.R_ini, GramKind::S);
  return st;
}

void update_factor(FactorPosterior& s, const Eigen::Ref<const Matrix>& y_unfold,
                   int mode, const Vector& penalty) {
  const BlockPartition part = s.partition();
  const Index L = s.L_ini;
  const Index R = s.R_ini;
  Matrix kr;
  Matrix gram;
  Matrix* mean = nullptr;
  Matrix* cov = nullptr;
  switch (mode) {
    case 1:
      kr = khatri_rao_partition(s.meanB, s.meanC, part);
      gram = gram_kr_identities(second_moment(s.meanB, s.covB),
                                second_moment(s.meanC, s.covC), L, R,
                                GramKind::P);
      mean = &s.meanA;
      cov = &s.covA;
      break;
    case 2:
      kr = khatri_rao_partition(s.meanA, s.meanC, part);
      gram = gram_kr_identities(second_moment(s.meanA, s.covA),
                                second_moment(s.meanC, s.covC), L, R,
                                GramKind::Q);
      mean = &s.meanB;
      cov = &s.covB;
      break;
    case 3:
      kr = build_S(s.meanA, s.meanB, part);
      gram = gram_kr_identities(second_moment(s.meanA, s.covA),
                                second_moment(s.meanB, s.covB), L, R,
                                GramKind::S);
      mean = &s.meanC;
      cov = &s.covC;
      break;
    default:
      throw std::invalid_argument("update_factor: mode must be 1, 2 or 3");
  }
  if (y_unfold.cols() != kr.rows() || penalty.size() != gram.rows()) {
    throw std::invalid_argument("update_factor: shape mismatch");
  }
  gram.diagonal() += penalty;
  try {
    Matrix inv = spd_inverse(gram);
    Matrix new_mean = (y_unfold * kr) * inv;
    require_finite(new_mean, "factor mean");
    *cov = inv / s.beta_mean;
    *mean = std::move(new_mean);
  } catch (const NumericError& e) {
    throw NumericError(std::string(mode_name(mode)) + ": " + e.what());
  }
}

Vector bbtd_penalty(const PosteriorState& s, int mode) {
  if (mode == 3) return s.zeta_mean;
  Vector p(s.L_ini * s.R_ini);
  for (Index r = 0; r < s.R_ini; ++r) {
    p.segment(r * s.L_ini, s.L_ini) =
        s.zeta_mean(r) * s.t_mean.segment(r * s.L_ini, s.L_ini);
  }
  return p;
}

void update_factor(PosteriorState& s, const Eigen::Ref<const Matrix>& y_unfold,
                   int mode) {
  update_factor(static_cast<FactorPosterior&>(s), y_unfold, mode,
                bbtd_penalty(s, mode));
}

void update_t(PosteriorState& s, const Matrix& AtA, const Matrix& BtB,
              const PriorConstants& p, Index r, Index l) {
  const auto [I, J, K] = s.dims();
  const Index q = r * s.L_ini + l;
  const double rate = s.beta_mean * s.zeta_mean(r) * (AtA(q, q) + BtB(q, q));
  const ScaleUpdate u = gig_scale_update(
      s.delta_mean(q), rate, static_cast<double>(I + J + 1), p.psi, p.tau);
  s.t_mean(q) = u.mean;
  s.t_recip(q) = u.recip;
  s.delta_mean(q) = u.scale;
  if (u.clamped) ++s.clamp_events;
}

void update_zeta(PosteriorState& s, const Matrix& AtA, const Matrix& BtB,
                 const Matrix& CtC, const PriorConstants& p, Index r) {
  const auto [I, J, K] = s.dims();
  const Index L = s.L_ini;
  double weighted = 0.0;
  for (Index l = 0; l < L; ++l) {
    const Index q = r * L + l;
    weighted += s.t_mean(q) * (AtA(q, q) + BtB(q, q));
  }
  const double rate = s.beta_mean * (weighted + CtC(r, r));
  const double count = static_cast<double>((I + J) * L + K * s.R_ini + 1);
  const ScaleUpdate u = gig_scale_update(s.rho_mean(r), rate, count, p.mu, p.nu);
  s.zeta_mean(r) = u.mean;
  s.zeta_recip(r) = u.recip;
  s.rho_mean(r) = u.scale;
  if (u.clamped) ++s.clamp_events;
}

double expected_residual(const FactorPosterior& s, const FitData& data,
                         const Matrix& AtA, const Matrix& BtB,
                         const Matrix& CtC) {
  const BlockPartition part = s.partition();
  // tr{<A>^T Y_(1) <P>} equals <Y, X(means)>, evaluated on the cheaper
  // mode-3 side as tr{<C>^T Y_(3) <S>}.
  const Matrix S = build_S(s.meanA, s.meanB, part);
  const double cross = (s.meanC.transpose() * (data.Y3 * S)).trace();
  const Matrix PtP =
      gram_kr_identities(BtB, CtC, s.L_ini, s.R_ini, GramKind::P);
  const double quad = AtA.cwiseProduct(PtP).sum();
  return std::max(0.0, data.y_sq - 2.0 * cross + quad);
}

double beta_numerator(const FactorPosterior& s, const PriorConstants& p) {
  const auto [I, J, K] = s.dims();
  const double LR = static_cast<double>(s.L_ini * s.R_ini);
  return 2.0 * p.kappa + static_cast<double>(I + J) * LR +
         static_cast<double>(K * s.R_ini) + static_cast<double>(I * J * K);
}

double update_beta(PosteriorState& s, const FitData& data,
                   const PriorConstants& p) {
  const Matrix AtA = second_moment(s.meanA, s.covA);
  const Matrix BtB = second_moment(s.meanB, s.covB);
  const Matrix CtC = second_moment(s.meanC, s.covC);
  const double resid = expected_residual(s, data, AtA, BtB, CtC);
  const Vector pa = bbtd_penalty(s, 1);
  const double penalty = pa.dot(AtA.diagonal() + BtB.diagonal()) +
                         s.zeta_mean.dot(CtC.diagonal());
  const double denom = 2.0 * p.theta + resid + penalty;
  const double beta = beta_numerator(s, p) / std::max(denom, kMinDenominator);
  if (!std::isfinite(beta)) {
    throw NumericError("non-finite beta update");
  }
  s.beta_mean = beta;
  return beta;
}

double reconstruction_error(const FactorPosterior& s, const FitData& data) {
  const Matrix S = build_S(s.meanA, s.meanB, s.partition());
  return (data.Y3 - s.meanC * S.transpose()).norm();
}

void vi_iterate(PosteriorState& s, const FitData& data,
                const PriorConstants& p) {
  update_factor(s, data.Y1, 1);
  update_factor(s, data.Y2, 2);
  update_factor(s, data.Y3, 3);

  const Matrix AtA = second_moment(s.meanA, s.covA);
  const Matrix BtB = second_moment(s.meanB, s.covB);
  const Matrix CtC = second_moment(s.meanC, s.covC);
  for (Index r = 0; r < s.R_ini; ++r)
    for (Index l = 0; l < s.L_ini; ++l) update_t(s, AtA, BtB, p, r, l);
  for (Index r = 0; r < s.R_ini; ++r) update_zeta(s, AtA, BtB, CtC, p, r);
  update_beta(s, data, p);
}

void vi_iterate(PosteriorState& s, const Tensor3& y, const PriorConstants& p) {
  vi_iterate(s, FitData(y), p);
}

Vector block_term_energy(const FactorPosterior& s) {
  const Index L = s.L_ini;
  Vector out(s.R_ini);
  for (Index r = 0; r < s.R_ini; ++r) {
    const auto a = s.meanA.middleCols(r * L, L);
    const auto b = s.meanB.middleCols(r * L, L);
    // ||A_r B_r^T||_F^2 = sum((A_r^T A_r) .* (B_r^T B_r))
    const double ab = (a.transpose() * a).cwiseProduct(b.transpose() * b).sum();
    out(r) = std::max(0.0, ab) * s.meanC.col(r).squaredNorm();
  }
  return out;
}

bool check_convergence(const std::vector<double>& trace, double rel_tol) {
  if (trace.size() < 2) return false;
  const double prev = trace[trace.size() - 2];
  const double cur = trace.back();
  return std::abs(cur - prev) / std::max(prev, 1e-300) < rel_tol;
}

Vector term_spectrum(const FactorPosterior& s) {
  const Index L = s.L_ini;
  Vector out(s.R_ini * L);
  for (Index r = 0; r < s.R_ini; ++r) {
    // sigma(A_r B_r^T) = sigma(R_a R_b^T) for thin QR factors A_r = Q_a R_a.
    Eigen::HouseholderQR<Matrix> qa(s.meanA.middleCols(r * L, L));
    Eigen::HouseholderQR<Matrix> qb(s.meanB.middleCols(r * L, L));
    const Index ka = std::min(L, s.meanA.rows());
    const Index kb = std::min(L, s.meanB.rows());
    const Matrix ra = qa.matrixQR().topRows(ka).triangularView<Eigen::Upper>();
    const Matrix rb = qb.matrixQR().topRows(kb).triangularView<Eigen::Upper>();
    const Vector sv = Eigen::JacobiSVD<Matrix>(ra * rb.transpose()).singularValues();
    out.segment(r * L, L).setZero();
    out.segment(r * L, sv.size()) = sv * s.meanC.col(r).norm();
  }
  return out;
}

double spectrum_drift(const Vector& prev, const Vector& next, double thr) {
  if (prev.size() != next.size() || next.size() == 0) {
    return std::numeric_limits<double>::infinity();
  }
  const double floor = thr * next.maxCoeff();
  double drift = 0.0;
  for (Index q = 0; q < next.size(); ++q) {
    if (!(next(q) > floor)) continue;
    drift = std::max(drift, std::abs(next(q) - prev(q)) / std::max(prev(q), 1e-300));
  }
  return drift;
}

FitReport extract_model(const FactorPosterior& s, const FitConfig& cfg) {
  const Index L = s.L_ini;
  const double thr = cfg.prune_rel_threshold;
  const auto [I, J, K] = s.dims();
  const Vector energy = block_term_energy(s);
  const double max_energy = energy.size() ? energy.maxCoeff() : 0.0;

  std::vector<Matrix> a_blocks, b_blocks;
  std::vector<Index> kept_blocks;
  for (Index r = 0; r < s.R_ini; ++r) {
    if (!(max_energy > 0.0) || !(energy(r) > thr * max_energy)) continue;
    const auto a = s.meanA.middleCols(r * L, L);
    const auto b = s.meanB.middleCols(r * L, L);
    const Vector col_energy =
        (a.colwise().squaredNorm() + b.colwise().squaredNorm()).transpose();
    const double col_max = col_energy.maxCoeff();
    std::vector<Index> cols;
    for (Index l = 0; l < L; ++l) {
      if (col_energy(l) > thr * col_max) cols.push_back(l);
    }
    Matrix ak(I, static_cast<Index>(cols.size()));
    Matrix bk(J, static_cast<Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) {
      ak.col(static_cast<Index>(i)) = a.col(cols[i]);
      bk.col(static_cast<Index>(i)) = b.col(cols[i]);
    }
    // Surviving columns can still be linearly redundant; L_r is the rank of
    // A_r B_r^T, so such blocks are replaced by their truncated SVD.
    Eigen::BDCSVD<Matrix> svd(ak * bk.transpose(),
                              Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector sv = svd.singularValues();
    Index rank = 0;
    while (rank < sv.size() && sv(rank) * sv(rank) > thr * sv(0) * sv(0)) ++rank;
    if (rank < ak.cols()) {
      const Vector root = sv.head(rank).cwiseSqrt();
      ak = svd.matrixU().leftCols(rank) * root.asDiagonal();
      bk = svd.matrixV().leftCols(rank) * root.asDiagonal();
    }
    a_blocks.push_back(std::move(ak));
    b_blocks.push_back(std::move(bk));
    kept_blocks.push_back(r);
  }

  FitReport report;
  report.R_hat = static_cast<Index>(kept_blocks.size());
  Index total = 0;
  for (const auto& ak : a_blocks) {
    report.L_hat.push_back(ak.cols());
    total += ak.cols();
  }
  BtdFactors f;
  f.A.resize(I, total);
  f.B.resize(J, total);
  f.C.resize(K, report.R_hat);
  Index q = 0;
  for (std::size_t i = 0; i < kept_blocks.size(); ++i) {
    f.C.col(static_cast<Index>(i)) = s.meanC.col(kept_blocks[i]);
    f.A.middleCols(q, a_blocks[i].cols()) = a_blocks[i];
    f.B.middleCols(q, b_blocks[i].cols()) = b_blocks[i];
    q += a_blocks[i].cols();
  }
  f.part = BlockPartition(report.L_hat);
  report.factors = std::move(f);
  return report;
}

FitReport best_by_error(RestartSet set) {
  if (set.runs.empty()) {
    std::string msg = "all restarts aborted:";
    for (const auto& f : set.failures) msg += " [" + f + "]";
    throw FitError(msg);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < set.runs.size(); ++i) {
    if (set.runs[i].final_error() < set.runs[best].final_error()) best = i;
  }
  FitReport report = std::move(set.runs[best]);
  for (auto& f : set.failures) report.warnings.push_back(std::move(f));
  return report;
}

RestartSet fit_restarts(const Tensor3& y, const FitConfig& cfg) {
  auto init = [&](std::uint64_t seed) { return init_state(cfg, y, seed); };
  auto sweep = [&](PosteriorState& s, const FitData& data) {
    vi_iterate(s, data, cfg.priors);
  };
  return detail::run_restarts<PosteriorState>(y, cfg, ModelTag::bbtd, init,
                                              sweep);
}

FitReport fit(const Tensor3& y, const FitConfig& cfg) {
  return best_by_error(fit_restarts(y, cfg));
}

}  // namespace btd
