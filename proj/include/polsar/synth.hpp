#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "polsar/core.hpp"
#include "polsar/error.hpp"
#include "polsar/rng.hpp"

namespace polsar {

using cdouble = std::complex<double>;

/// Hermitian 3x3 matrix given by its diagonal and upper triangle.
struct Hermitian3 {
  double t11 = 0.0, t22 = 0.0, t33 = 0.0;
  cdouble t12{}, t13{}, t23{};

  double span() const { return t11 + t22 + t33; }

  /// Entry (r, c), 0-based.
  cdouble operator()(int r, int c) const {
    const cdouble diag[3] = {t11, t22, t33};
    if (r == c) return diag[r];
    const cdouble upper[3][3] = {{0, t12, t13}, {0, 0, t23}, {0, 0, 0}};
    return r < c ? upper[r][c] : std::conj(upper[c][r]);
  }

  double determinant() const {
    return t11 * t22 * t33 + 2.0 * std::real(t12 * t23 * std::conj(t13)) - t11 * std::norm(t23) -
           t22 * std::norm(t13) - t33 * std::norm(t12);
  }

  /// Leading principal minors non-negative (Sylvester test for the
  /// semidefinite case, relaxed by `tol`).
  bool is_psd(double tol = 1e-9) const {
    return t11 >= -tol && t11 * t22 - std::norm(t12) >= -tol && determinant() >= -tol &&
           t22 >= -tol && t33 >= -tol;
  }
};

/**
 * Lower-triangular L with L * L^H = m. Zero pivots (rank-deficient but PSD
 * input) produce zero columns.
 */
inline std::array<std::array<cdouble, 3>, 3> cholesky(const Hermitian3& m) {
  std::array<std::array<cdouble, 3>, 3> l{};
  for (int j = 0; j < 3; ++j) {
    double d = std::real(m(j, j));
    for (int k = 0; k < j; ++k) d -= std::norm(l[j][k]);
    const double pivot = d > 0.0 ? std::sqrt(d) : 0.0;
    l[j][j] = pivot;
    for (int i = j + 1; i < 3; ++i) {
      cdouble s = m(i, j);
      for (int k = 0; k < j; ++k) s -= l[i][k] * std::conj(l[j][k]);
      l[i][j] = pivot > 0.0 ? s / pivot : cdouble{};
    }
  }
  return l;
}

struct ClassModel {
  std::string name;
  Hermitian3 sigma;
};

namespace detail {

inline Hermitian3 make_covariance(double a, double b, double c, cdouble rho12, cdouble rho13,
                                  cdouble rho23) {
  Hermitian3 m;
  m.t11 = a;
  m.t22 = b;
  m.t33 = c;
  m.t12 = rho12 * std::sqrt(a * b);
  m.t13 = rho13 * std::sqrt(a * c);
  m.t23 = rho23 * std::sqrt(b * c);
  return m;
}

}  // namespace detail

/// K built-in class covariances (2 <= K <= 8), loosely modelled on common
/// terrain scattering behaviour. Each has its own power level and its own
/// correlation pattern.
inline std::vector<ClassModel> default_class_bank(std::size_t classes) {
  if (classes < 2 || classes > 8) throw ArgumentError("class bank supports 2..8 classes");
  using detail::make_covariance;
  const auto polar = [](double r, double theta) { return std::polar(r, theta); };
  // clang-format off
  const std::vector<ClassModel> bank = {
      {"water",      make_covariance(0.50, 0.035, 0.012, polar(0.60, 0.0),  polar(0.10, 0.0),  polar(0.05, 0.0))},
      {"bare-soil",  make_covariance(1.00, 0.22,  0.09,  polar(0.35, 0.4),  polar(0.15, -0.3), polar(0.20, 0.0))},
      {"grass",      make_covariance(1.00, 0.40,  0.22,  polar(0.15, 0.9),  polar(0.05, 0.0),  polar(0.35, -0.6))},
      {"forest",     make_covariance(1.15, 0.72,  0.45,  polar(0.05, 0.0),  polar(0.10, 1.2),  polar(0.40, 0.8))},
      {"urban",      make_covariance(6.00, 2.00,  0.70,  polar(0.65, 1.0),  polar(0.25, 0.0),  polar(0.10, 2.0))},
      {"wheat",      make_covariance(2.40, 0.45,  0.30,  polar(0.45, -1.4), polar(0.30, 0.5),  polar(0.15, 0.0))},
      {"rapeseed",   make_covariance(1.30, 2.10,  0.40,  polar(0.25, 2.2),  polar(0.05, 0.0),  polar(0.50, 0.3))},
      {"stem-beans", make_covariance(3.20, 1.10,  1.60,  polar(0.20, 0.0),  polar(0.55, -0.9), polar(0.25, 1.6))},
  };
  // clang-format on
  return {bank.begin(), bank.begin() + static_cast<std::ptrdiff_t>(classes)};
}

struct RectanglesLayout {};
struct VoronoiLayout {
  std::size_t seeds = 24;
};
using SceneLayout = std::variant<RectanglesLayout, VoronoiLayout>;

struct SceneSpec {
  std::size_t height = 256;
  std::size_t width = 256;
  std::vector<ClassModel> classes;
  SceneLayout layout = VoronoiLayout{};
  std::size_t looks = 4;
  std::uint64_t rng_seed = 0;
};

namespace detail {

inline constexpr std::uint64_t kLayoutTag = 0x4C41594FULL;   // "LAYO"
inline constexpr std::uint64_t kSpeckleTag = 0x5350454BULL;  // "SPEK"
inline constexpr std::size_t kLayoutAttempts = 64;
inline constexpr double kMinOccupancy = 0.01;

inline bool occupancy_ok(const LabelMap& labels) {
  std::vector<std::size_t> counts(labels.classes() + 1, 0);
  for (ClassId l : labels.data()) ++counts[l];
  const double min_pixels = kMinOccupancy * static_cast<double>(labels.pixels());
  for (std::size_t k = 1; k <= labels.classes(); ++k) {
    if (static_cast<double>(counts[k]) < min_pixels) return false;
  }
  return true;
}

inline LabelMap layout_rectangles(std::size_t h, std::size_t w, std::size_t k) {
  LabelMap labels(h, w, k);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) labels.set(r, c, static_cast<ClassId>(c * k / w + 1));
  }
  return labels;
}

inline LabelMap layout_voronoi(std::size_t h, std::size_t w, std::size_t k, std::size_t seeds,
                               Stream& rng) {
  std::vector<std::pair<double, double>> points(seeds);
  for (auto& p : points) {
    p.first = rng.uniform() * static_cast<double>(h);
    p.second = rng.uniform() * static_cast<double>(w);
  }
  // Seed s belongs to class (s mod K) + 1, so every class owns at least one cell.
  LabelMap labels(h, w, k);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double y = static_cast<double>(r) + 0.5;
      const double x = static_cast<double>(c) + 0.5;
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < seeds; ++s) {
        const double dy = y - points[s].first;
        const double dx = x - points[s].second;
        const double d = dy * dy + dx * dx;
        if (d < best_d) {
          best_d = d;
          best = s;
        }
      }
      labels.set(r, c, static_cast<ClassId>(best % k + 1));
    }
  }
  return labels;
}

}  // namespace detail

/**
 * Builds a speckled multi-class scene. Each pixel's coherency matrix is the
 * mean of `looks` outer products k k^H with k = L g, where L is the Cholesky
 * factor of the pixel's class covariance and g has i.i.d. circular complex
 * Gaussian entries of unit variance. Row r draws from its own stream derived
 * from (rng_seed, r), so the result does not depend on evaluation order.
 */
inline std::pair<CoherencyImage, LabelMap> generate_scene(const SceneSpec& spec) {
  const std::size_t k = spec.classes.size();
  if (k < 2) throw ArgumentError("scene needs at least 2 classes");
  if (k > 255) throw ArgumentError("scene supports at most 255 classes");
  if (spec.looks < 1) throw ArgumentError("looks must be >= 1");
  if (spec.height == 0 || spec.width == 0) throw ArgumentError("scene must be at least 1x1");
  for (const auto& cm : spec.classes) {
    if (!cm.sigma.is_psd()) throw ArgumentError("class covariance '" + cm.name + "' is not PSD");
  }

  LabelMap labels;
  if (std::holds_alternative<RectanglesLayout>(spec.layout)) {
    if (spec.width < k) throw ArgumentError("rectangles layout needs width >= class count");
    labels = detail::layout_rectangles(spec.height, spec.width, k);
    if (!detail::occupancy_ok(labels)) {
      throw ArgumentError("rectangles layout cannot give every class 1% of the pixels");
    }
  } else {
    const std::size_t seeds = std::get<VoronoiLayout>(spec.layout).seeds;
    if (seeds < k) throw ArgumentError("voronoi layout needs at least one seed per class");
    bool ok = false;
    for (std::size_t attempt = 0; attempt < detail::kLayoutAttempts && !ok; ++attempt) {
      Stream rng = Stream::derive(spec.rng_seed, detail::kLayoutTag, attempt);
      labels = detail::layout_voronoi(spec.height, spec.width, k, seeds, rng);
      ok = detail::occupancy_ok(labels);
    }
    if (!ok) throw ArgumentError("voronoi layout cannot give every class 1% of the pixels");
  }

  std::vector<std::array<std::array<cdouble, 3>, 3>> factors;
  factors.reserve(k);
  for (const auto& cm : spec.classes) factors.push_back(cholesky(cm.sigma));

  CoherencyImage img(spec.height, spec.width);
  const double inv_looks = 1.0 / static_cast<double>(spec.looks);
  constexpr double kHalfStd = 0.70710678118654752440;  // sqrt(1/2)
  for (std::size_t r = 0; r < spec.height; ++r) {
    Stream rng = Stream::derive(spec.rng_seed, detail::kSpeckleTag, r);
    for (std::size_t c = 0; c < spec.width; ++c) {
      const auto& l = factors[labels.at(r, c) - 1];
      double d1 = 0, d2 = 0, d3 = 0;
      cdouble o12{}, o13{}, o23{};
      for (std::size_t n = 0; n < spec.looks; ++n) {
        cdouble g[3];
        for (auto& gi : g) {
          const double re = rng.normal() * kHalfStd;
          const double im = rng.normal() * kHalfStd;
          gi = {re, im};
        }
        const cdouble k1 = l[0][0] * g[0];
        const cdouble k2 = l[1][0] * g[0] + l[1][1] * g[1];
        const cdouble k3 = l[2][0] * g[0] + l[2][1] * g[1] + l[2][2] * g[2];
        d1 += std::norm(k1);
        d2 += std::norm(k2);
        d3 += std::norm(k3);
        o12 += k1 * std::conj(k2);
        o13 += k1 * std::conj(k3);
        o23 += k2 * std::conj(k3);
      }
      img.at(TPlane::T11, r, c) = static_cast<float>(d1 * inv_looks);
      img.at(TPlane::T22, r, c) = static_cast<float>(d2 * inv_looks);
      img.at(TPlane::T33, r, c) = static_cast<float>(d3 * inv_looks);
      img.at(TPlane::ReT12, r, c) = static_cast<float>(o12.real() * inv_looks);
      img.at(TPlane::ImT12, r, c) = static_cast<float>(o12.imag() * inv_looks);
      img.at(TPlane::ReT13, r, c) = static_cast<float>(o13.real() * inv_looks);
      img.at(TPlane::ImT13, r, c) = static_cast<float>(o13.imag() * inv_looks);
      img.at(TPlane::ReT23, r, c) = static_cast<float>(o23.real() * inv_looks);
      img.at(TPlane::ImT23, r, c) = static_cast<float>(o23.imag() * inv_looks);
    }
  }
  return {std::move(img), std::move(labels)};
}

}  // namespace polsar
