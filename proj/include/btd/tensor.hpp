#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace btd {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Dims {
  Index I = 0;
  Index J = 0;
  Index K = 0;

  Index numel() const { return I * J * K; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Raised when an intermediate quantity is NaN/Inf or a factorization cannot be
// rescued by jitter.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense real 3rd-order tensor. Element (i,j,k) is stored at offset
// (k*J + j)*I + i, so the buffer viewed as a column-major I x JK matrix is the
// mode-1 unfolding.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Dims dims);
  Tensor3(Dims dims, std::vector<double> data);

  const Dims& dims() const { return dims_; }
  Index size() const { return static_cast<Index>(data_.size()); }

  double& operator()(Index i, Index j, Index k) {
    return data_[static_cast<std::size_t>((k * dims_.J + j) * dims_.I + i)];
  }
  double operator()(Index i, Index j, Index k) const {
    return data_[static_cast<std::size_t>((k * dims_.J + j) * dims_.I + i)];
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Eigen::Map<const Matrix> mode1() const {
    return {data_.data(), dims_.I, dims_.J * dims_.K};
  }

  double squared_norm() const;
  double norm() const;

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  Dims dims_;
  std::vector<double> data_;
};

// Column partition of a block matrix: block r owns sizes[r] consecutive
// columns.
class BlockPartition {
 public:
  BlockPartition() = default;
  explicit BlockPartition(std::vector<Index> sizes);
  static BlockPartition uniform(Index blocks, Index cols_per_block);

  Index blocks() const { return static_cast<Index>(sizes_.size()); }
  Index size(Index r) const { return sizes_[static_cast<std::size_t>(r)]; }
  Index offset(Index r) const { return offsets_[static_cast<std::size_t>(r)]; }
  Index total() const { return offsets_.empty() ? 0 : offsets_.back(); }
  const std::vector<Index>& sizes() const { return sizes_; }

  friend bool operator==(const BlockPartition& a, const BlockPartition& b) {
    return a.sizes_ == b.sizes_;
  }

 private:
  std::vector<Index> sizes_;
  std::vector<Index> offsets_;  // length blocks()+1
};

// A, B carry part.total() columns split by `part`; C has part.blocks()
// columns.
struct BtdFactors {
  Matrix A;
  Matrix B;
  Matrix C;
  BlockPartition part;

  Dims dims() const { return {A.rows(), B.rows(), C.rows()}; }
  void validate() const;
};

// Mode-n unfolding, n in {1,2,3}.
//   mode 1: I x JK, column k*J + j
//   mode 2: J x IK, column k*I + i
//   mode 3: K x IJ, column i*J + j
Matrix unfold(const Tensor3& t, int mode);
Tensor3 fold(const Matrix& m, int mode, Dims dims);

// Kronecker product of two column vectors: out[i*len(v) + j] = u[i]*v[j].
Vector kron(const Vector& u, const Vector& v);

// Partition-wise Khatri-Rao product: column (r,l) = kron(y.col(r), x.col(r,l)).
// With this ordering B (.) C gives P with X_(1)^T = P A^T.
Matrix khatri_rao_partition(const Matrix& x, const Matrix& y,
                            const BlockPartition& part);

// Column-wise Khatri-Rao: column l = kron(x.col(l), y.col(l)).
Matrix khatri_rao_colwise(const Matrix& x, const Matrix& y);

// Column r = sum over the block's columns of kron(a_rl, b_rl), i.e. the
// row-major vectorization of A_r B_r^T.
Matrix build_S(const Matrix& a, const Matrix& b, const BlockPartition& part);

enum class GramKind { P, Q, S };

// Expected Grams of Khatri-Rao products from the factor Grams, for a uniform
// partition of `blocks` blocks of `cols_per_block` columns.
//   P: gram_x = <B^T B>, gram_y = <C^T C>
//   Q: gram_x = <A^T A>, gram_y = <C^T C>
//   S: gram_x = <A^T A>, gram_y = <B^T B>
Matrix gram_kr_identities(const Matrix& gram_x, const Matrix& gram_y,
                          Index cols_per_block, Index blocks, GramKind which);

struct JitterPolicy {
  double initial = 1e-12;
  double maximum = 1e-4;
  double growth = 10.0;
};

// Solves m * out = rhs for symmetric m via Cholesky, adding
// jitter * mean(diag(m)) * I when the factorization fails.
Matrix spd_solve(const Matrix& m, const Matrix& rhs,
                 const JitterPolicy& policy = {});

// Inverse of a symmetric positive definite matrix, symmetrized.
Matrix spd_inverse(const Matrix& m, const JitterPolicy& policy = {});

bool all_finite(const Matrix& m);

}  // namespace btd
