#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <zlib.h>

#include "polsar/core.hpp"
#include "polsar/error.hpp"
#include "polsar/io.hpp"

namespace polsar {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Colours for classes 1..K; color(k) is the colour of class k. Unlabeled
/// pixels are always black.
class Palette {
 public:
  Palette() = default;
  explicit Palette(std::vector<Rgb> class_colors) : colors_(std::move(class_colors)) {}

  /// Fifteen well-separated colours.
  static Palette standard() {
    return Palette({{0, 0, 255},     {0, 160, 0},     {255, 0, 0},     {255, 255, 0},
                    {0, 255, 255},   {255, 0, 255},   {255, 128, 0},   {128, 0, 255},
                    {128, 255, 128}, {160, 82, 45},   {255, 182, 193}, {0, 128, 128},
                    {128, 128, 0},   {192, 192, 192}, {255, 255, 255}});
  }

  std::size_t size() const { return colors_.size(); }
  const Rgb& color(std::size_t class_id) const { return colors_.at(class_id - 1); }

 private:
  std::vector<Rgb> colors_;
};

namespace detail {

inline void png_chunk(ByteWriter& out, std::string_view type, const std::vector<unsigned char>& data) {
  const auto be32 = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.u8(static_cast<std::uint8_t>(v >> s));
  };
  be32(static_cast<std::uint32_t>(data.size()));
  out.bytes(type);
  for (unsigned char c : data) out.u8(c);
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type.data()), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  be32(static_cast<std::uint32_t>(crc));
}

}  // namespace detail

/// Encodes the label map as an 8-bit indexed-colour PNG. Palette index k is
/// class k; index 0 (unlabeled) is black. Output bytes depend only on the
/// inputs.
inline std::vector<char> encode_label_png(const LabelMap& labels, const Palette& palette) {
  if (palette.size() < labels.classes()) {
    throw ArgumentError("palette has " + std::to_string(palette.size()) + " colours, need " +
                        std::to_string(labels.classes()));
  }
  detail::ByteWriter out;
  out.bytes(std::string_view("\x89PNG\r\n\x1a\n", 8));

  std::vector<unsigned char> ihdr;
  const auto push_be32 = [](std::vector<unsigned char>& v, std::uint32_t x) {
    for (int s = 24; s >= 0; s -= 8) v.push_back(static_cast<unsigned char>(x >> s));
  };
  push_be32(ihdr, static_cast<std::uint32_t>(labels.width()));
  push_be32(ihdr, static_cast<std::uint32_t>(labels.height()));
  ihdr.insert(ihdr.end(), {8, 3, 0, 0, 0});  // depth 8, indexed colour
  detail::png_chunk(out, "IHDR", ihdr);

  std::vector<unsigned char> plte = {0, 0, 0};
  for (std::size_t k = 1; k <= labels.classes(); ++k) {
    const Rgb& c = palette.color(k);
    plte.insert(plte.end(), {c.r, c.g, c.b});
  }
  detail::png_chunk(out, "PLTE", plte);

  std::vector<unsigned char> raw;
  raw.reserve(labels.height() * (labels.width() + 1));
  for (std::size_t r = 0; r < labels.height(); ++r) {
    raw.push_back(0);  // filter: none
    for (std::size_t c = 0; c < labels.width(); ++c) raw.push_back(labels.at(r, c));
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw Error("zlib compression failed");
  }
  packed.resize(packed_size);
  detail::png_chunk(out, "IDAT", packed);
  detail::png_chunk(out, "IEND", {});
  return out.buffer();
}

inline void export_label_png(const LabelMap& labels, const Palette& palette,
                             const std::filesystem::path& path) {
  const auto bytes = encode_label_png(labels, palette);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace polsar
