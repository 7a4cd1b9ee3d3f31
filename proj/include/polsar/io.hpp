#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "polsar/core.hpp"
#include "polsar/error.hpp"

namespace polsar {

namespace detail {

/// Little-endian byte sink.
class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) u8(static_cast<std::uint8_t>(v >> s));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void write_to(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw IoError("write to '" + path.string() + "' failed");
  }

  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

/// Little-endian byte source over a whole file read into memory.
class ByteReader {
 public:
  explicit ByteReader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path_ + "'");
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (std::memcmp(buf_.data() + pos_, magic.data(), magic.size()) != 0) {
      throw IoError("bad magic in '" + path_ + "'");
    }
    pos_ += magic.size();
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int s = 0; s < 32; s += 8) v |= static_cast<std::uint32_t>(u8()) << s;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int s = 0; s < 64; s += 8) v |= static_cast<std::uint64_t>(u8()) << s;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  /// Throws unless at least `n` more bytes remain.
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw IoError("truncated payload in '" + path_ + "'");
  }
  bool at_end() const { return pos_ == buf_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

inline constexpr std::string_view kCoherencyMagic{"PT3\0", 4};
inline constexpr std::string_view kLabelMagic{"PLB\0", 4};
inline constexpr std::string_view kFeatureMagic{"PFC1", 4};

}  // namespace detail

/// Reads a "PT3\0" coherency file and validates it.
inline CoherencyImage load_coherency(const std::filesystem::path& path) {
  detail::ByteReader in(path);
  in.expect_magic(detail::kCoherencyMagic);
  const std::uint32_t h = in.u32();
  const std::uint32_t w = in.u32();
  if (h == 0 || w == 0) throw IoError("zero dimension in '" + in.path() + "'");
  const std::uint64_t n = static_cast<std::uint64_t>(h) * w;
  in.need(n * kCoherencyPlanes * 4);
  CoherencyImage img(h, w);
  for (float& v : img.raw()) v = in.f32();
  validate(img);
  return img;
}

inline void save_coherency(const CoherencyImage& img, const std::filesystem::path& path) {
  detail::ByteWriter out;
  out.bytes(detail::kCoherencyMagic);
  out.u32(static_cast<std::uint32_t>(img.height()));
  out.u32(static_cast<std::uint32_t>(img.width()));
  for (float v : img.raw()) out.f32(v);
  out.write_to(path);
}

/// Reads a "PLB\0" label file: u32 H, u32 W, u8 K, then H*W class bytes.
inline LabelMap load_labels(const std::filesystem::path& path) {
  detail::ByteReader in(path);
  in.expect_magic(detail::kLabelMagic);
  const std::uint32_t h = in.u32();
  const std::uint32_t w = in.u32();
  const std::uint8_t k = in.u8();
  if (h == 0 || w == 0 || k == 0) throw IoError("invalid header in '" + in.path() + "'");
  in.need(static_cast<std::uint64_t>(h) * w);
  LabelMap labels(h, w, k);
  for (std::size_t i = 0; i < labels.pixels(); ++i) {
    const std::uint8_t v = in.u8();
    if (v > k) throw InvariantError("label exceeds class count in '" + in.path() + "'");
    labels.set(i, v);
  }
  return labels;
}

inline void save_labels(const LabelMap& labels, const std::filesystem::path& path) {
  detail::ByteWriter out;
  out.bytes(detail::kLabelMagic);
  out.u32(static_cast<std::uint32_t>(labels.height()));
  out.u32(static_cast<std::uint32_t>(labels.width()));
  out.u8(static_cast<std::uint8_t>(labels.classes()));
  for (ClassId v : labels.data()) out.u8(v);
  out.write_to(path);
}

/// Feature cubes are stored as "PFC1", u32 H, W, C, then f64 values in
/// pixel-interleaved order.
inline void save_features(const FeatureCube& cube, const std::filesystem::path& path) {
  detail::ByteWriter out;
  out.bytes(detail::kFeatureMagic);
  out.u32(static_cast<std::uint32_t>(cube.height()));
  out.u32(static_cast<std::uint32_t>(cube.width()));
  out.u32(static_cast<std::uint32_t>(cube.channels()));
  for (double v : cube.data()) out.f64(v);
  out.write_to(path);
}

inline FeatureCube load_features(const std::filesystem::path& path) {
  detail::ByteReader in(path);
  in.expect_magic(detail::kFeatureMagic);
  const std::uint32_t h = in.u32();
  const std::uint32_t w = in.u32();
  const std::uint32_t c = in.u32();
  if (h == 0 || w == 0 || c == 0) throw IoError("invalid header in '" + in.path() + "'");
  in.need(static_cast<std::uint64_t>(h) * w * c * 8);
  FeatureCube cube(h, w, c);
  for (double& v : cube.data()) v = in.f64();
  if (!cube.all_finite()) throw InvariantError("non-finite feature in '" + in.path() + "'");
  return cube;
}

}  // namespace polsar
