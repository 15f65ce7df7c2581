#include "btd/datagen.hpp"

#include <cmath>
#include <stdexcept>

namespace btd {
namespace {

bool full_column_rank(const Matrix& m) {
  if (m.cols() > m.rows()) return false;
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(1e-10);
  return qr.rank() == m.cols();
}

}  // namespace

void ScenarioSpec::validate() const {
  if (dims.I <= 0 || dims.J <= 0 || dims.K <= 0) {
    throw std::invalid_argument("scenario dims must be positive");
  }
  if (truth.blocks() < 1) {
    throw std::invalid_argument("scenario needs at least one block");
  }
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("scenario SNR must be finite or +inf");
  }
  if (runs < 1) throw std::invalid_argument("scenario runs must be >= 1");
}

ScenarioSpec scenario_a(double snr_db, int runs, std::uint64_t seed) {
  return {"A", {30, 30, 30}, BlockPartition({8, 6, 4, 5, 3}), snr_db, seed,
          runs};
}

ScenarioSpec scenario_b(double snr_db, int runs, std::uint64_t seed) {
  return {"B", {30, 30, 30}, BlockPartition({8, 6, 8, 6, 7}), snr_db, seed,
          runs};
}

ScenarioSpec model_comparison_setting(double snr_db, int runs,
                                      std::uint64_t seed) {
  return {"comparison", {18, 18, 10}, BlockPartition({8, 6, 4}), snr_db, seed, runs};
}

ScenarioSpec denoise_setting(double snr_db, int runs, std::uint64_t seed) {
  return {"denoise", {40, 40, 20}, BlockPartition({5, 4, 3, 3}), snr_db, seed,
          runs};
}

BtdFactors gen_factors(Dims dims, const BlockPartition& truth, Rng& rng) {
  BtdFactors f;
  f.part = truth;
  f.A.resize(dims.I, truth.total());
  f.B.resize(dims.J, truth.total());
  for (Index r = 0; r < truth.blocks(); ++r) {
    const Index L = truth.size(r);
    // Bounded redraws: a deficient draw has probability zero unless L > I.
    for (int attempt = 0; attempt < 16; ++attempt) {
      Matrix a = standard_normal(dims.I, L, rng);
      Matrix b = standard_normal(dims.J, L, rng);
      f.A.middleCols(truth.offset(r), L) = a;
      f.B.middleCols(truth.offset(r), L) = b;
      if (full_column_rank(a) && full_column_rank(b)) break;
    }
  }
  f.C = standard_normal(dims.K, truth.blocks(), rng);
  return f;
}

Tensor3 compose(const BtdFactors& f) {
  f.validate();
  const Dims d = f.dims();
  Tensor3 x(d);
  for (Index r = 0; r < f.part.blocks(); ++r) {
    for (Index q = f.part.offset(r); q < f.part.offset(r) + f.part.size(r);
         ++q) {
      for (Index k = 0; k < d.K; ++k) {
        const double c = f.C(k, r);
        for (Index j = 0; j < d.J; ++j) {
          const double bc = f.B(j, q) * c;
          for (Index i = 0; i < d.I; ++i) x(i, j, k) += f.A(i, q) * bc;
        }
      }
    }
  }
  return x;
}

Tensor3 compose_term(const BtdFactors& f, Index r) {
  BtdFactors term;
  term.part = BlockPartition({f.part.size(r)});
  term.A = f.A.middleCols(f.part.offset(r), f.part.size(r));
  term.B = f.B.middleCols(f.part.offset(r), f.part.size(r));
  term.C = f.C.col(r);
  return compose(term);
}

NoisyTensor add_noise(const Tensor3& x, double snr_db, Rng& rng) {
  const double signal = x.norm();
  if (!(signal > 0.0)) {
    throw std::invalid_argument("add_noise: signal has zero norm");
  }
  if (snr_db == std::numeric_limits<double>::infinity()) return {x, 0.0};
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(static_cast<std::size_t>(x.size()));
  double noise_sq = 0.0;
  for (auto& v : noise) {
    v = normal(rng);
    noise_sq += v * v;
  }
  const double sigma =
      signal / (std::pow(10.0, snr_db / 20.0) * std::sqrt(noise_sq));
  std::vector<double> y(x.data().begin(), x.data().end());
  for (std::size_t n = 0; n < y.size(); ++n) y[n] += sigma * noise[n];
  return {Tensor3(x.dims(), std::move(y)), sigma};
}

double realized_snr_db(const Tensor3& x, const Tensor3& y) {
  double noise_sq = 0.0;
  for (Index n = 0; n < x.size(); ++n) {
    const double d = y.data()[static_cast<std::size_t>(n)] -
                     x.data()[static_cast<std::size_t>(n)];
    noise_sq += d * d;
  }
  return 10.0 * std::log10(x.squared_norm() / noise_sq);
}

}  // namespace btd
