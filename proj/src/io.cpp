#include "btd/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace btd::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class Writer {
 public:
  void magic(const char (&tag)[5]) {
    bytes_.insert(bytes_.end(), tag, tag + 4);
  }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void expect_magic(const char (&tag)[5]) {
    need(4, "magic");
    if (std::memcmp(bytes_.data() + pos_, tag, 4) != 0) {
      throw FormatError(std::string("bad magic, expected ") + tag, pos_);
    }
    pos_ += 4;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    read(&v, sizeof v, what);
    return v;
  }
  double f64(const char* what) {
    double v;
    read(&v, sizeof v, what);
    return v;
  }
  std::uint64_t pos() const { return pos_; }
  void expect_end() const {
    if (pos_ != bytes_.size()) {
      throw FormatError("trailing bytes after payload", pos_);
    }
  }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated input reading ") + what, pos_);
    }
  }

 private:
  void read(void* dst, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

FormatError::FormatError(const std::string& what, std::uint64_t offset)
    : std::runtime_error(what + " at byte offset " + std::to_string(offset)),
      offset_(offset) {}

std::vector<std::uint8_t> encode_bt3d(const Tensor3& t) {
  Writer w;
  w.magic("BT3D");
  w.u32(kBt3dVersion);
  w.u32(static_cast<std::uint32_t>(t.dims().I));
  w.u32(static_cast<std::uint32_t>(t.dims().J));
  w.u32(static_cast<std::uint32_t>(t.dims().K));
  for (double v : t.data()) w.f64(v);
  return w.take();
}

Tensor3 decode_bt3d(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.expect_magic("BT3D");
  const auto version_at = r.pos();
  if (r.u32("version") != kBt3dVersion) {
    throw FormatError("unsupported BT3D version", version_at);
  }
  const auto dims_at = r.pos();
  const Index I = r.u32("I");
  const Index J = r.u32("J");
  const Index K = r.u32("K");
  if (I == 0 || J == 0 || K == 0) {
    throw FormatError("zero dimension", dims_at);
  }
  const auto n = static_cast<std::uint64_t>(I) * J * K;
  r.need(n * 8, "tensor payload");
  std::vector<double> data(n);
  for (auto& v : data) {
    const auto at = r.pos();
    v = r.f64("tensor payload");
    if (!std::isfinite(v)) throw FormatError("non-finite entry", at);
  }
  r.expect_end();
  return Tensor3({I, J, K}, std::move(data));
}

std::vector<std::uint8_t> encode_bmat(const Matrix& m) {
  Writer w;
  w.magic("BMAT");
  w.u32(kBmatVersion);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r) w.f64(m(r, c));
  return w.take();
}

Matrix decode_bmat(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.expect_magic("BMAT");
  const auto version_at = r.pos();
  if (r.u32("version") != kBmatVersion) {
    throw FormatError("unsupported BMAT version", version_at);
  }
  const Index rows = r.u32("rows");
  const Index cols = r.u32("cols");
  r.need(static_cast<std::uint64_t>(rows) * cols * 8, "matrix payload");
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index i = 0; i < rows; ++i) {
      const auto at = r.pos();
      m(i, c) = r.f64("matrix payload");
      if (!std::isfinite(m(i, c))) throw FormatError("non-finite entry", at);
    }
  r.expect_end();
  return m;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Tensor3 read_bt3d(const std::filesystem::path& path) {
  return decode_bt3d(read_file(path));
}

void write_bt3d(const std::filesystem::path& path, const Tensor3& t) {
  write_file_atomic(path, encode_bt3d(t));
}

Matrix read_bmat(const std::filesystem::path& path) {
  return decode_bmat(read_file(path));
}

void write_bmat(const std::filesystem::path& path, const Matrix& m) {
  write_file_atomic(path, encode_bmat(m));
}

}  // namespace btd::io
