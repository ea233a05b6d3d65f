#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dsidx {

enum class FormatErrorKind {
  kMissingFile,
  kIo,
  kBadMagic,
  kVersion,
  kTruncated,
  kChecksum,
  kOverflow,
  kInvalid,
};

std::string_view to_string(FormatErrorKind kind);

/// Failure to read or write one of the binary formats; `kind()` tells the
/// cases apart.
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  FormatErrorKind kind() const { return kind_; }

 private:
  FormatErrorKind kind_;
};

using Magic = std::array<char, 8>;

std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t seed = 0);

/// Little-endian byte sink. A sized image stores its total byte count as a
/// u64 right after the magic, so readers can tell truncation from corruption.
class ByteWriter {
 public:
  explicit ByteWriter(const Magic& magic, bool sized = false);

  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void f32s(std::span<const float> v);

  /// Appends the CRC32 of everything written so far.
  std::vector<std::uint8_t> finish() &&;

  std::vector<std::uint8_t>& raw() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  bool sized_;
};

/// Little-endian byte source over a whole file image. Construction verifies
/// magic, the declared size of a sized image, then (optionally) the CRC32
/// trailer.
class ByteReader {
 public:
  ByteReader(std::vector<std::uint8_t> bytes, const Magic& magic, bool has_crc, std::string name,
             bool sized = false);

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  void f32s(std::span<float> out);

  std::size_t remaining() const { return end_ - pos_; }
  void expect_end() const;

 private:
  const std::uint8_t* take(std::size_t n);

  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
  std::string name_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace dsidx
