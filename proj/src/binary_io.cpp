#include "gddsg/binary_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "gddsg/errors.hpp"

namespace gddsg {
namespace binio {

namespace {

template <typename U>
void put_le(std::string& buf, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(std::string_view raw) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(raw[i])) << (8 * i);
  }
  return v;
}

}  // namespace

void Writer::u32(std::uint32_t v) { put_le(buf_, v); }
void Writer::u64(std::uint64_t v) { put_le(buf_, v); }
void Writer::f32(float v) { put_le(buf_, std::bit_cast<std::uint32_t>(v)); }
void Writer::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

std::string_view Reader::bytes(std::size_t n) {
  if (n > remaining()) {
    throw TruncatedError("unexpected end of data: wanted " + std::to_string(n) +
                         " bytes, " + std::to_string(remaining()) + " left");
  }
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t Reader::u32() { return get_le<std::uint32_t>(bytes(4)); }
std::uint64_t Reader::u64() { return get_le<std::uint64_t>(bytes(8)); }
float Reader::f32() { return std::bit_cast<float>(u32()); }
double Reader::f64() { return std::bit_cast<double>(u64()); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) {
      throw MissingFileError("missing file: " + path.string());
    }
    throw IoError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace binio

void write_matrix_file(const std::filesystem::path& path, const Matrix& m) {
  binio::Writer w;
  w.bytes(kMatrixMagic);
  w.u32(kMatrixVersion);
  w.u64(static_cast<std::uint64_t>(m.rows()));
  w.u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  }
  binio::write_file(path, w.data());
}

Matrix read_matrix_file(const std::filesystem::path& path) {
  const std::string raw = binio::read_file(path);
  binio::Reader r(raw);
  if (r.remaining() < kMatrixMagic.size() || r.bytes(kMatrixMagic.size()) != kMatrixMagic) {
    throw BadMagicError(path.string() + ": not a GDM1 matrix file");
  }
  const std::uint32_t version = r.u32();
  if (version != kMatrixVersion) {
    throw VersionError(path.string() + ": unsupported GDM1 version " + std::to_string(version));
  }
  const std::uint64_t rows = r.u64();
  const std::uint64_t cols = r.u64();
  if (cols != 0 && rows > r.remaining() / 8 / cols) {
    throw TruncatedError(path.string() + ": payload shorter than " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
  }
  if (r.remaining() != 0) {
    throw FormatError(path.string() + ": trailing bytes after matrix payload");
  }
  return m;
}

}  // namespace gddsg
