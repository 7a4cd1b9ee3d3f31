#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polsar/core.hpp"
#include "polsar/error.hpp"

namespace polsar {

/// Two-tap filter applied as out[i] = taps[0] * x[i] + taps[1] * x[i + 1].
struct FilterPair {
  double taps[2];
};

struct HaarFilters {
  static constexpr double kInvSqrt2 = 0.70710678118654752440;
  static constexpr FilterPair low{{kInvSqrt2, kInvSqrt2}};
  static constexpr FilterPair high{{-kInvSqrt2, kInvSqrt2}};
};

enum class Band : unsigned { L = 0, H = 1 };

inline constexpr const FilterPair& filter_for(Band b) {
  return b == Band::L ? HaarFilters::low : HaarFilters::high;
}

/// How x[len] is resolved at the trailing edge.
enum class Boundary { Replicate };

/// Undecimated (same-length) one-level 1-D transform.
inline std::vector<double> udwt_1d(std::span<const double> signal, const FilterPair& filter,
                                   Boundary boundary = Boundary::Replicate) {
  if (signal.empty()) throw ArgumentError("udwt_1d: empty signal");
  (void)boundary;  // Replicate is the only policy.
  const std::size_t n = signal.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double next = i + 1 < n ? signal[i + 1] : signal[n - 1];
    out[i] = filter.taps[0] * signal[i] + filter.taps[1] * next;
  }
  return out;
}

enum class Axis { Height, Width, Channel };

/// Applies a two-tap filter along one axis of the cube (replicate boundary).
inline FeatureCube filter_axis(const FeatureCube& in, Axis axis, const FilterPair& f) {
  const std::size_t h = in.height(), w = in.width(), c = in.channels();
  FeatureCube out(h, w, c);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t col = 0; col < w; ++col) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t r1 = r, c1 = col, ch1 = ch;
        switch (axis) {
          case Axis::Height: r1 = r + 1 < h ? r + 1 : h - 1; break;
          case Axis::Width: c1 = col + 1 < w ? col + 1 : w - 1; break;
          case Axis::Channel: ch1 = ch + 1 < c ? ch + 1 : c - 1; break;
        }
        out(r, col, ch) = f.taps[0] * in(r, col, ch) + f.taps[1] * in(r1, c1, ch1);
      }
    }
  }
  return out;
}

/// Index of a 3-D band combination; bit 2 = height, bit 1 = width,
/// bit 0 = channel (0 = L, 1 = H). Index order is lexicographic: LLL, LLH,
/// LHL, ..., HHH.
inline constexpr std::size_t band_index(Band h, Band w, Band c) {
  return (static_cast<std::size_t>(h) << 2) | (static_cast<std::size_t>(w) << 1) |
         static_cast<std::size_t>(c);
}

inline std::string band_name(std::size_t index, std::size_t dims = 3) {
  std::string name;
  for (std::size_t d = dims; d-- > 0;) name += ((index >> d) & 1U) ? 'H' : 'L';
  return name;
}

/// One undecimated 3-D level: all eight {L,H} combinations applied along
/// height, then width, then channel. Output cubes are indexed by band_index.
inline std::array<FeatureCube, 8> udwt_3d_level(const FeatureCube& cube) {
  std::array<FeatureCube, 8> out;
  for (unsigned bh = 0; bh < 2; ++bh) {
    const FeatureCube along_h = filter_axis(cube, Axis::Height, filter_for(Band{bh}));
    for (unsigned bw = 0; bw < 2; ++bw) {
      const FeatureCube along_w = filter_axis(along_h, Axis::Width, filter_for(Band{bw}));
      for (unsigned bc = 0; bc < 2; ++bc) {
        out[band_index(Band{bh}, Band{bw}, Band{bc})] =
            filter_axis(along_w, Axis::Channel, filter_for(Band{bc}));
      }
    }
  }
  return out;
}

/// One undecimated 2-D level over height and width only; indexed by
/// (h << 1) | w, i.e. LL, LH, HL, HH.
inline std::array<FeatureCube, 4> udwt_2d_level(const FeatureCube& cube) {
  std::array<FeatureCube, 4> out;
  for (unsigned bh = 0; bh < 2; ++bh) {
    const FeatureCube along_h = filter_axis(cube, Axis::Height, filter_for(Band{bh}));
    for (unsigned bw = 0; bw < 2; ++bw) {
      out[(bh << 1) | bw] = filter_axis(along_h, Axis::Width, filter_for(Band{bw}));
    }
  }
  return out;
}

/// One retained sub-cube of a multi-level decomposition.
struct SubcubeId {
  std::size_t level;  // 1-based
  std::size_t band;   // band_index within that level
  std::string name() const { return "L" + std::to_string(level) + ":" + band_name(band); }
};

/**
 * Enumeration of retained sub-cubes. Every level except the last keeps its
 * seven detail bands (all but LLL); the last level keeps all eight. Two
 * levels give 7 + 8 = 15 sub-cubes, ordered lexicographically inside each
 * level.
 */
struct DwtPlan {
  std::size_t levels = 2;
  Boundary boundary = Boundary::Replicate;

  std::vector<SubcubeId> subcubes() const {
    if (levels < 1) throw ArgumentError("DWT needs at least one level");
    std::vector<SubcubeId> ids;
    for (std::size_t lv = 1; lv <= levels; ++lv) {
      for (std::size_t b = (lv == levels ? 0 : 1); b < 8; ++b) ids.push_back({lv, b});
    }
    return ids;
  }
};

/// |x| averaged over the 3x3 spatial window, per channel. Windows at the
/// border average only their in-bounds pixels.
inline FeatureCube mean_abs_3x3(const FeatureCube& in) {
  const std::size_t h = in.height(), w = in.width(), c = in.channels();
  FeatureCube out(h, w, c);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t r0 = r > 0 ? r - 1 : 0, r1 = r + 1 < h ? r + 1 : r;
    for (std::size_t col = 0; col < w; ++col) {
      const std::size_t c0 = col > 0 ? col - 1 : 0, c1 = col + 1 < w ? col + 1 : col;
      const double count = static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum = 0.0;
        for (std::size_t m = r0; m <= r1; ++m) {
          for (std::size_t n = c0; n <= c1; ++n) sum += std::abs(in(m, n, ch));
        }
        out(r, col, ch) = sum / count;
      }
    }
  }
  return out;
}

namespace detail {

/// Stacks sub-cubes along the channel axis: output channel k * D + d holds
/// channel d of sub-cube k.
inline FeatureCube concat_channels(const std::vector<FeatureCube>& parts) {
  const std::size_t h = parts.front().height(), w = parts.front().width();
  const std::size_t d = parts.front().channels();
  FeatureCube out(h, w, d * parts.size());
  for (std::size_t p = 0; p < h * w; ++p) {
    auto dst = out.pixel(p);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto src = parts[k].pixel(p);
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(k * d));
    }
  }
  return out;
}

}  // namespace detail

/**
 * Contextual wavelet features: multi-level undecimated 3-D Haar transform of
 * the raw cube, the LLL band re-decomposed at each level, each retained
 * sub-cube passed through mean_abs_3x3, and the results concatenated in
 * DwtPlan order. With D = 7 raw channels and two levels this yields 105
 * channels.
 */
inline FeatureCube dwt_features(const FeatureCube& raw, const DwtPlan& plan = {}) {
  if (plan.levels < 1) throw ArgumentError("DWT needs at least one level");
  std::vector<FeatureCube> parts;
  parts.reserve(7 * plan.levels + 1);
  FeatureCube current = raw;
  for (std::size_t lv = 1; lv <= plan.levels; ++lv) {
    auto bands = udwt_3d_level(current);
    const bool last = lv == plan.levels;
    for (std::size_t b = last ? 0 : 1; b < 8; ++b) parts.push_back(mean_abs_3x3(bands[b]));
    if (!last) current = std::move(bands[0]);
  }
  return detail::concat_channels(parts);
}

/// Spatial-only variant: 2-D Haar on height/width per channel, LL band
/// re-decomposed. Two levels keep 3 + 4 = 7 bands, so 49 channels for D = 7.
inline FeatureCube dwt2d_features(const FeatureCube& raw, std::size_t levels = 2) {
  if (levels < 1) throw ArgumentError("DWT needs at least one level");
  std::vector<FeatureCube> parts;
  FeatureCube current = raw;
  for (std::size_t lv = 1; lv <= levels; ++lv) {
    auto bands = udwt_2d_level(current);
    const bool last = lv == levels;
    for (std::size_t b = last ? 0 : 1; b < 4; ++b) parts.push_back(mean_abs_3x3(bands[b]));
    if (!last) current = std::move(bands[0]);
  }
  return detail::concat_channels(parts);
}

}  // namespace polsar
