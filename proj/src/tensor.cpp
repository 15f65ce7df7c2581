#include "btd/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace btd {

Tensor3::Tensor3(Dims dims) : dims_(dims) {
  if (dims.I <= 0 || dims.J <= 0 || dims.K <= 0) {
    throw std::invalid_argument("Tensor3: dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(dims.numel()), 0.0);
}

Tensor3::Tensor3(Dims dims, std::vector<double> data)
    : dims_(dims), data_(std::move(data)) {
  if (dims.I <= 0 || dims.J <= 0 || dims.K <= 0) {
    throw std::invalid_argument("Tensor3: dimensions must be positive");
  }
  if (static_cast<Index>(data_.size()) != dims.numel()) {
    throw std::invalid_argument("Tensor3: data length does not match I*J*K");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("Tensor3: non-finite entry");
    }
  }
}

double Tensor3::squared_norm() const {
  return std::inner_product(data_.begin(), data_.end(), data_.begin(), 0.0);
}

double Tensor3::norm() const { return std::sqrt(squared_norm()); }

BlockPartition::BlockPartition(std::vector<Index> sizes)
    : sizes_(std::move(sizes)) {
  offsets_.reserve(sizes_.size() + 1);
  offsets_.push_back(0);
  for (Index s : sizes_) {
    if (s < 1) {
      throw std::invalid_argument("BlockPartition: block sizes must be >= 1");
    }
    offsets_.push_back(offsets_.back() + s);
  }
}

BlockPartition BlockPartition::uniform(Index blocks, Index cols_per_block) {
  return BlockPartition(std::vector<Index>(static_cast<std::size_t>(blocks),
                                           cols_per_block));
}

void BtdFactors::validate() const {
  if (A.cols() != part.total() || B.cols() != part.total()) {
    throw std::invalid_argument(
        "BtdFactors: A and B must have sum(L) columns");
  }
  if (C.cols() != part.blocks()) {
    throw std::invalid_argument("BtdFactors: C must have R columns");
  }
}

Matrix unfold(const Tensor3& t, int mode) {
  const auto [I, J, K] = t.dims();
  switch (mode) {
    case 1:
      return t.mode1();
    case 2: {
      Matrix out(J, I * K);
      for (Index k = 0; k < K; ++k)
        for (Index j = 0; j < J; ++j)
          for (Index i = 0; i < I; ++i) out(j, k * I + i) = t(i, j, k);
      return out;
    }
    case 3: {
      Matrix out(K, I * J);
      for (Index k = 0; k < K; ++k)
        for (Index j = 0; j < J; ++j)
          for (Index i = 0; i < I; ++i) out(k, i * J + j) = t(i, j, k);
      return out;
    }
    default:
      throw std::invalid_argument("unfold: mode must be 1, 2 or 3");
  }
}

Tensor3 fold(const Matrix& m, int mode, Dims dims) {
  const auto [I, J, K] = dims;
  Index rows = 0, cols = 0;
  switch (mode) {
    case 1: rows = I; cols = J * K; break;
    case 2: rows = J; cols = I * K; break;
    case 3: rows = K; cols = I * J; break;
    default:
      throw std::invalid_argument("fold: mode must be 1, 2 or 3");
  }
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream msg;
    msg << "fold: expected " << rows << "x" << cols << " matrix for mode "
        << mode << ", got " << m.rows() << "x" << m.cols();
    throw std::invalid_argument(msg.str());
  }
  Tensor3 t(dims);
  for (Index k = 0; k < K; ++k)
    for (Index j = 0; j < J; ++j)
      for (Index i = 0; i < I; ++i) {
        switch (mode) {
          case 1: t(i, j, k) = m(i, k * J + j); break;
          case 2: t(i, j, k) = m(j, k * I + i); break;
          default: t(i, j, k) = m(k, i * J + j); break;
        }
      }
  return t;
}

Vector kron(const Vector& u, const Vector& v) {
  Vector out(u.size() * v.size());
  for (Index i = 0; i < u.size(); ++i) {
    out.segment(i * v.size(), v.size()) = u(i) * v;
  }
  return out;
}

Matrix khatri_rao_partition(const Matrix& x, const Matrix& y,
                            const BlockPartition& part) {
  if (x.cols() != part.total() || y.cols() != part.blocks()) {
    throw std::invalid_argument(
        "khatri_rao_partition: shapes do not match the partition");
  }
  const Index nx = x.rows();
  const Index ny = y.rows();
  Matrix out(nx * ny, x.cols());
  for (Index r = 0; r < part.blocks(); ++r) {
    for (Index q = part.offset(r); q < part.offset(r) + part.size(r); ++q) {
      for (Index a = 0; a < ny; ++a) {
        out.col(q).segment(a * nx, nx) = y(a, r) * x.col(q);
      }
    }
  }
  return out;
}

Matrix khatri_rao_colwise(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) {
    throw std::invalid_argument("khatri_rao_colwise: column counts differ");
  }
  const Index ny = y.rows();
  Matrix out(x.rows() * ny, x.cols());
  for (Index l = 0; l < x.cols(); ++l) {
    for (Index i = 0; i < x.rows(); ++i) {
      out.col(l).segment(i * ny, ny) = x(i, l) * y.col(l);
    }
  }
  return out;
}

Matrix build_S(const Matrix& a, const Matrix& b, const BlockPartition& part) {
  if (a.cols() != part.total() || b.cols() != part.total()) {
    throw std::invalid_argument("build_S: shapes do not match the partition");
  }
  const Index I = a.rows();
  const Index J = b.rows();
  Matrix out(I * J, part.blocks());
  for (Index r = 0; r < part.blocks(); ++r) {
    const auto ar = a.middleCols(part.offset(r), part.size(r));
    const auto br = b.middleCols(part.offset(r), part.size(r));
    // E_r^T is J x I; its column-major buffer is the row-major vec of E_r.
    Matrix er_t = br * ar.transpose();
    out.col(r) = Eigen::Map<const Vector>(er_t.data(), I * J);
  }
  return out;
}

Matrix gram_kr_identities(const Matrix& gram_x, const Matrix& gram_y,
                          Index cols_per_block, Index blocks, GramKind which) {
  const Index L = cols_per_block;
  const Index R = blocks;
  const Index LR = L * R;
  if (gram_x.rows() != gram_x.cols() || gram_y.rows() != gram_y.cols()) {
    throw std::invalid_argument("gram_kr_identities: grams must be square");
  }
  if (which == GramKind::S) {
    if (gram_x.rows() != LR || gram_y.rows() != LR) {
      throw std::invalid_argument("gram_kr_identities: S needs two LR x LR grams");
    }
    const Matrix h = gram_x.cwiseProduct(gram_y);
    Matrix out(R, R);
    for (Index r = 0; r < R; ++r)
      for (Index s = 0; s < R; ++s) out(r, s) = h.block(r * L, s * L, L, L).sum();
    return 0.5 * (out + out.transpose());
  }
  if (gram_x.rows() != LR || gram_y.rows() != R) {
    throw std::invalid_argument(
        "gram_kr_identities: P/Q need an LR x LR and an R x R gram");
  }
  Matrix out(LR, LR);
  for (Index r = 0; r < R; ++r)
    for (Index s = 0; s < R; ++s)
      out.block(r * L, s * L, L, L) =
          gram_y(r, s) * gram_x.block(r * L, s * L, L, L);
  return 0.5 * (out + out.transpose());
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

Matrix spd_solve(const Matrix& m, const Matrix& rhs,
                 const JitterPolicy& policy) {
  if (m.rows() != m.cols() || m.rows() != rhs.rows()) {
    throw std::invalid_argument("spd_solve: shape mismatch");
  }
  if (!m.allFinite() || !rhs.allFinite()) {
    throw NumericError("spd_solve: non-finite input");
  }
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);

  double scale = m.diagonal().mean();
  if (!(scale > 0.0)) scale = m.diagonal().cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) scale = 1.0;
  const Index n = m.rows();
  for (double jitter = policy.initial; jitter <= policy.maximum * (1 + 1e-9);
       jitter *= policy.growth) {
    llt.compute(m + jitter * scale * Matrix::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
  }
  throw NumericError("spd_solve: factorization failed after maximum jitter");
}

Matrix spd_inverse(const Matrix& m, const JitterPolicy& policy) {
  Matrix inv = spd_solve(m, Matrix::Identity(m.rows(), m.cols()), policy);
  return 0.5 * (inv + inv.transpose());
}

}  // namespace btd
