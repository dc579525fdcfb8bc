#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "gddsg/types.hpp"

namespace gddsg {

// Little-endian byte encoding used by the GDE1 and GDM1 containers.
namespace binio {

class Writer {
 public:
  void bytes(std::string_view raw) { buf_.append(raw); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);

  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

// Cursor over an in-memory file; every read past the end throws TruncatedError.
class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::string_view bytes(std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

}  // namespace binio

inline constexpr std::string_view kMatrixMagic = "GDM1";
inline constexpr std::uint32_t kMatrixVersion = 1;

/// Writes `m` as a GDM1 file: magic, u32 version, u64 rows, u64 cols, then
/// row-major f64 payload.
void write_matrix_file(const std::filesystem::path& path, const Matrix& m);

/// Reads a GDM1 file. Throws BadMagicError, VersionError, TruncatedError or
/// MissingFileError.
Matrix read_matrix_file(const std::filesystem::path& path);

}  // namespace gddsg
