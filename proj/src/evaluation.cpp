#include "btd/evaluation.hpp"

#include "btd/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace btd {
namespace {

// Square Hungarian with row/column potentials; returns col index per row.
std::vector<Index> solve_square(const Matrix& a) {
  const Index n = a.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; p[j] = row matched to column j, 0 = free.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> p(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> row_to_col(n, -1);
  for (Index j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

// Frobenius inner product of two block terms, from their factors.
double term_inner(const Matrix& a1, const Matrix& b1, const Vector& c1,
                  const Matrix& a2, const Matrix& b2, const Vector& c2) {
  // <A1 B1^T, A2 B2^T> = sum((A1^T A2) .* (B1^T B2))
  const double e = (a1.transpose() * a2).cwiseProduct(b1.transpose() * b2).sum();
  return e * c1.dot(c2);
}

}  // namespace

Assignment hungarian(const Matrix& cost) {
  if (!cost.allFinite()) {
    throw std::invalid_argument("hungarian: cost matrix has non-finite entries");
  }
  Assignment out;
  const Index rows = cost.rows();
  const Index cols = cost.cols();
  if (rows == 0 || cols == 0) {
    out.row_to_col.assign(static_cast<std::size_t>(rows), -1);
    return out;
  }
  const Index n = std::max(rows, cols);
  Matrix square = Matrix::Constant(n, n, 1.0 + cost.maxCoeff());
  square.topLeftCorner(rows, cols) = cost;
  const std::vector<Index> full = solve_square(square);
  out.row_to_col.assign(static_cast<std::size_t>(rows), -1);
  for (Index i = 0; i < rows; ++i) {
    const Index j = full[static_cast<std::size_t>(i)];
    if (j < cols) {
      out.row_to_col[static_cast<std::size_t>(i)] = j;
      out.cost += cost(i, j);
    }
  }
  return out;
}

MatchResult nmse(const BtdFactors& truth, const BtdFactors& est) {
  truth.validate();
  const Index R = truth.part.blocks();
  const Index Rh = est.part.blocks();
  if (R < 1) throw std::invalid_argument("nmse: truth needs >= 1 block");
  if (Rh > 0) est.validate();

  auto block_a = [](const BtdFactors& f, Index r) {
    return Matrix(f.A.middleCols(f.part.offset(r), f.part.size(r)));
  };
  auto block_b = [](const BtdFactors& f, Index r) {
    return Matrix(f.B.middleCols(f.part.offset(r), f.part.size(r)));
  };

  std::vector<double> true_sq(static_cast<std::size_t>(R));
  for (Index r = 0; r < R; ++r) {
    const Matrix a = block_a(truth, r), b = block_b(truth, r);
    const Vector c = truth.C.col(r);
    true_sq[r] = term_inner(a, b, c, a, b, c);
    if (!(true_sq[r] > 0.0)) {
      throw std::invalid_argument("nmse: true block term has zero norm");
    }
  }

  MatchResult res;
  res.per_term_nmse.assign(static_cast<std::size_t>(R), 1.0);
  res.assignment.assign(static_cast<std::size_t>(Rh), -1);
  if (Rh > 0) {
    Matrix cost(R, Rh);
    for (Index r = 0; r < R; ++r) {
      const Matrix a = block_a(truth, r), b = block_b(truth, r);
      const Vector c = truth.C.col(r);
      for (Index s = 0; s < Rh; ++s) {
        const Matrix ah = block_a(est, s), bh = block_b(est, s);
        const Vector ch = est.C.col(s);
        const double d = true_sq[r] - 2.0 * term_inner(a, b, c, ah, bh, ch) +
                         term_inner(ah, bh, ch, ah, bh, ch);
        cost(r, s) = std::max(0.0, d) / true_sq[r];
      }
    }
    const Assignment match = hungarian(cost);
    for (Index r = 0; r < R; ++r) {
      const Index s = match.row_to_col[static_cast<std::size_t>(r)];
      if (s >= 0) {
        res.per_term_nmse[r] = cost(r, s);
        res.assignment[static_cast<std::size_t>(s)] = r;
      }
    }
  }
  for (double v : res.per_term_nmse) res.total_nmse += v;
  return res;
}

double SuccessTally::r_rate() const {
  return runs > 0 ? static_cast<double>(r_successes) / runs : 0.0;
}

double SuccessTally::l_rate() const {
  if (l_eligible == 0 || l_successes_given_r.empty()) return 0.0;
  double hits = 0.0;
  for (int v : l_successes_given_r) hits += v;
  return hits / (static_cast<double>(l_eligible) *
                 static_cast<double>(l_successes_given_r.size()));
}

SuccessTally& SuccessTally::operator+=(const SuccessTally& other) {
  runs += other.runs;
  r_successes += other.r_successes;
  l_eligible += other.l_eligible;
  if (l_successes_given_r.size() < other.l_successes_given_r.size()) {
    l_successes_given_r.resize(other.l_successes_given_r.size(), 0);
  }
  for (std::size_t r = 0; r < other.l_successes_given_r.size(); ++r) {
    l_successes_given_r[r] += other.l_successes_given_r[r];
  }
  return *this;
}

void tally_success(SuccessTally& tally, const FitReport& report,
                   const BtdFactors& truth) {
  const Index R = truth.part.blocks();
  if (tally.l_successes_given_r.size() < static_cast<std::size_t>(R)) {
    tally.l_successes_given_r.resize(static_cast<std::size_t>(R), 0);
  }
  ++tally.runs;
  if (report.R_hat != R) return;
  ++tally.r_successes;
  ++tally.l_eligible;
  const MatchResult match = nmse(truth, report.factors);
  for (std::size_t s = 0; s < match.assignment.size(); ++s) {
    const Index r = match.assignment[s];
    if (r >= 0 && report.L_hat[s] == truth.part.size(r)) {
      ++tally.l_successes_given_r[static_cast<std::size_t>(r)];
    }
  }
}

std::vector<std::pair<double, double>> ecdf(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("ecdf: empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::vector<std::pair<double, double>> curve;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    curve.emplace_back(values[i], static_cast<double>(i + 1) / n);
  }
  return curve;
}

double ecdf_at(const std::vector<std::pair<double, double>>& curve, double x) {
  double f = 0.0;
  for (const auto& [v, frac] : curve) {
    if (v > x) break;
    f = frac;
  }
  return f;
}

double ssim(const Matrix& x, const Matrix& y, double c1, double c2) {
  if (x.rows() != y.rows() || x.cols() != y.cols() || x.size() == 0) {
    throw std::invalid_argument("ssim: window shapes differ");
  }
  const double n = static_cast<double>(x.size());
  const double mx = x.mean();
  const double my = y.mean();
  const double vx = (x.array() - mx).square().sum() / n;
  const double vy = (y.array() - my).square().sum() / n;
  const double cxy = ((x.array() - mx) * (y.array() - my)).sum() / n;
  return ((2 * mx * my + c1) * (2 * cxy + c2)) /
         ((mx * mx + my * my + c1) * (vx + vy + c2));
}

double band_ssim(const Matrix& ref, const Matrix& test, const SsimOptions& opt) {
  if (ref.rows() != test.rows() || ref.cols() != test.cols()) {
    throw std::invalid_argument("band_ssim: band shapes differ");
  }
  double range = ref.maxCoeff() - ref.minCoeff();
  if (!(range > 0.0)) range = 1.0;
  const double c1 = std::pow(opt.k1 * range, 2);
  const double c2 = std::pow(opt.k2 * range, 2);
  const Index wr = std::min(opt.window, ref.rows());
  const Index wc = std::min(opt.window, ref.cols());
  double total = 0.0;
  int count = 0;
  for (Index i = 0; i + wr <= ref.rows(); i += opt.stride) {
    for (Index j = 0; j + wc <= ref.cols(); j += opt.stride) {
      total += ssim(ref.block(i, j, wr, wc), test.block(i, j, wr, wc), c1, c2);
      ++count;
    }
  }
  return total / count;
}

Matrix frontal_slice(const Tensor3& t, Index k) {
  const auto [I, J, K] = t.dims();
  return t.mode1().middleCols(k * J, J);
}

std::vector<double> tensor_band_ssim(const Tensor3& ref, const Tensor3& test,
                                     const SsimOptions& opt) {
  if (!(ref.dims() == test.dims())) {
    throw std::invalid_argument("tensor_band_ssim: tensor shapes differ");
  }
  std::vector<double> out;
  for (Index k = 0; k < ref.dims().K; ++k) {
    out.push_back(band_ssim(frontal_slice(ref, k), frontal_slice(test, k), opt));
  }
  return out;
}

std::string metrics_csv_header() {
  return "experiment,seed,model,snr_db,R_hat,L_hat,nmse,iterations,wall_time_s,"
         "status\n";
}

std::string to_csv(const MetricsRow& row) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << row.experiment << ',' << row.seed << ',' << row.model << ','
      << row.snr_db << ',' << row.R_hat << ',';
  for (std::size_t i = 0; i < row.L_hat.size(); ++i) {
    out << (i ? ";" : "") << row.L_hat[i];
  }
  out << ',' << row.nmse << ',' << row.iterations << ',';
  if (row.wall_time_s) out << *row.wall_time_s;
  out << ',' << row.status << '\n';
  return out.str();
}

}  // namespace btd
