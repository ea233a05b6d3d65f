#include "dsidx/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace dsidx {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

std::string_view to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kMissingFile: return "missing-file";
    case FormatErrorKind::kIo: return "io";
    case FormatErrorKind::kBadMagic: return "bad-magic";
    case FormatErrorKind::kVersion: return "version";
    case FormatErrorKind::kTruncated: return "truncated";
    case FormatErrorKind::kChecksum: return "checksum";
    case FormatErrorKind::kOverflow: return "overflow";
    case FormatErrorKind::kInvalid: return "invalid";
  }
  return "unknown";
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes, std::uint32_t seed) {
  uLong c = seed;
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    c = ::crc32(c, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(c);
}

ByteWriter::ByteWriter(const Magic& magic, bool sized) : sized_(sized) {
  bytes_.insert(bytes_.end(), magic.begin(), magic.end());
  if (sized_) u64(0);
}

void ByteWriter::u16(std::uint16_t v) {
  bytes_.push_back(static_cast<std::uint8_t>(v));
  bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::f32s(std::span<const float> v) {
  const auto old = bytes_.size();
  bytes_.resize(old + v.size_bytes());
  std::memcpy(bytes_.data() + old, v.data(), v.size_bytes());
}

std::vector<std::uint8_t> ByteWriter::finish() && {
  if (sized_) {
    const std::uint64_t total = bytes_.size() + 4;
    for (int i = 0; i < 8; ++i) bytes_[sizeof(Magic) + i] = static_cast<std::uint8_t>(total >> (8 * i));
  }
  const auto c = crc32(bytes_);
  u32(c);
  return std::move(bytes_);
}

ByteReader::ByteReader(std::vector<std::uint8_t> bytes, const Magic& magic, bool has_crc, std::string name,
                       bool sized)
    : bytes_(std::move(bytes)), name_(std::move(name)) {
  if (bytes_.size() < magic.size()) {
    throw FormatError(FormatErrorKind::kTruncated, name_ + ": file shorter than its magic");
  }
  if (std::memcmp(bytes_.data(), magic.data(), magic.size()) != 0) {
    throw FormatError(FormatErrorKind::kBadMagic, name_ + ": magic mismatch");
  }
  pos_ = magic.size();
  end_ = bytes_.size();
  if (sized) {
    const auto declared = u64();
    if (bytes_.size() < declared) throw FormatError(FormatErrorKind::kTruncated, name_ + ": file is truncated");
    if (bytes_.size() > declared) throw FormatError(FormatErrorKind::kInvalid, name_ + ": trailing bytes");
  }
  if (has_crc) {
    if (end_ < pos_ + 4) throw FormatError(FormatErrorKind::kTruncated, name_ + ": missing checksum");
    end_ -= 4;
    std::uint32_t stored = 0;
    std::memcpy(&stored, bytes_.data() + end_, 4);
    if (crc32({bytes_.data(), end_}) != stored) {
      throw FormatError(FormatErrorKind::kChecksum, name_ + ": checksum mismatch");
    }
  }
}

const std::uint8_t* ByteReader::take(std::size_t n) {
  if (n > end_ - pos_) throw FormatError(FormatErrorKind::kTruncated, name_ + ": unexpected end of data");
  const auto* p = bytes_.data() + pos_;
  pos_ += n;
  return p;
}

std::uint8_t ByteReader::u8() { return *take(1); }

std::uint16_t ByteReader::u16() {
  std::uint16_t v;
  std::memcpy(&v, take(2), 2);
  return v;
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  std::memcpy(&v, take(4), 4);
  return v;
}

std::uint64_t ByteReader::u64() {
  std::uint64_t v;
  std::memcpy(&v, take(8), 8);
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

void ByteReader::f32s(std::span<float> out) { std::memcpy(out.data(), take(out.size_bytes()), out.size_bytes()); }

void ByteReader::expect_end() const {
  if (pos_ != end_) throw FormatError(FormatErrorKind::kInvalid, name_ + ": trailing bytes");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw FormatError(FormatErrorKind::kMissingFile, "no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes(std::filesystem::file_size(path));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw FormatError(FormatErrorKind::kIo, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorKind::kIo, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatErrorKind::kIo, "write failed: " + path.string());
}

}  // namespace dsidx
