#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polsar/error.hpp"

namespace polsar {

/// Plane index into a CoherencyImage.
enum class TPlane : std::size_t {
  T11 = 0,
  T22,
  T33,
  ReT12,
  ImT12,
  ReT13,
  ImT13,
  ReT23,
  ImT23,
};
inline constexpr std::size_t kCoherencyPlanes = 9;

/// Relative tolerance used when checking the 2x2 principal minors.
inline constexpr double kMinorTolerance = 1e-6;

/**
 * Per-pixel 3x3 Hermitian coherency matrices stored as nine real planes
 * (T11, T22, T33, Re/Im T12, Re/Im T13, Re/Im T23), row-major, single
 * precision, linear power units.
 */
class CoherencyImage {
 public:
  CoherencyImage() = default;
  CoherencyImage(std::size_t height, std::size_t width)
      : height_(height), width_(width), data_(kCoherencyPlanes * height * width, 0.0F) {
    if (height == 0 || width == 0) throw ArgumentError("coherency image must be at least 1x1");
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }

  std::span<float> plane(TPlane p) {
    return {data_.data() + static_cast<std::size_t>(p) * pixels(), pixels()};
  }
  std::span<const float> plane(TPlane p) const {
    return {data_.data() + static_cast<std::size_t>(p) * pixels(), pixels()};
  }

  float& at(TPlane p, std::size_t row, std::size_t col) {
    return data_[static_cast<std::size_t>(p) * pixels() + row * width_ + col];
  }
  float at(TPlane p, std::size_t row, std::size_t col) const {
    return data_[static_cast<std::size_t>(p) * pixels() + row * width_ + col];
  }

  /// All nine planes back to back, in plane order.
  std::span<const float> raw() const { return data_; }
  std::span<float> raw() { return data_; }

  friend bool operator==(const CoherencyImage&, const CoherencyImage&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> data_;
};

/// Throws InvariantError describing the first pixel that breaks the
/// coherency invariants (finite values, non-negative diagonal, PSD minors).
inline void validate(const CoherencyImage& img) {
  auto fail = [&](const char* what, std::size_t idx) {
    throw InvariantError(std::string(what) + " at pixel (" + std::to_string(idx / img.width()) +
                         ", " + std::to_string(idx % img.width()) + ")");
  };
  for (float v : img.raw()) {
    if (!std::isfinite(v)) throw InvariantError("non-finite value in coherency image");
  }
  const auto t11 = img.plane(TPlane::T11);
  const auto t22 = img.plane(TPlane::T22);
  const auto t33 = img.plane(TPlane::T33);
  const auto r12 = img.plane(TPlane::ReT12), i12 = img.plane(TPlane::ImT12);
  const auto r13 = img.plane(TPlane::ReT13), i13 = img.plane(TPlane::ImT13);
  const auto r23 = img.plane(TPlane::ReT23), i23 = img.plane(TPlane::ImT23);
  auto minor_ok = [](double a, double b, double re, double im) {
    const double lhs = re * re + im * im;
    const double rhs = a * b;
    return lhs - rhs <= kMinorTolerance * std::max(lhs, rhs);
  };
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    if (t11[i] < 0.0F || t22[i] < 0.0F || t33[i] < 0.0F) fail("negative diagonal", i);
    if (!minor_ok(t11[i], t22[i], r12[i], i12[i]) || !minor_ok(t11[i], t33[i], r13[i], i13[i]) ||
        !minor_ok(t22[i], t33[i], r23[i], i23[i])) {
      fail("PSD minor violation", i);
    }
  }
}

/// H x W x C real tensor, pixel-interleaved: the C values of one pixel are
/// contiguous, pixels are row-major.
class FeatureCube {
 public:
  FeatureCube() = default;
  FeatureCube(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels),
        data_(height * width * channels, fill) {
    if (height == 0 || width == 0 || channels == 0) {
      throw ArgumentError("feature cube dimensions must be positive");
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t pixels() const { return height_ * width_; }

  double& operator()(std::size_t row, std::size_t col, std::size_t ch) {
    return data_[(row * width_ + col) * channels_ + ch];
  }
  double operator()(std::size_t row, std::size_t col, std::size_t ch) const {
    return data_[(row * width_ + col) * channels_ + ch];
  }

  /// Feature vector of the pixel with linear index `idx`.
  std::span<const double> pixel(std::size_t idx) const {
    return {data_.data() + idx * channels_, channels_};
  }
  std::span<double> pixel(std::size_t idx) { return {data_.data() + idx * channels_, channels_}; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const FeatureCube&, const FeatureCube&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

/// Class id 0 marks an unlabeled pixel; 1..K are classes.
using ClassId = std::uint8_t;
inline constexpr ClassId kUnlabeled = 0;

class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(std::size_t height, std::size_t width, std::size_t classes, ClassId fill = kUnlabeled)
      : height_(height), width_(width), classes_(classes), labels_(height * width, fill) {
    if (height == 0 || width == 0) throw ArgumentError("label map must be at least 1x1");
    if (classes < 1 || classes > 255) throw ArgumentError("class count must be in [1, 255]");
    if (fill > classes) throw ArgumentError("fill label exceeds class count");
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t classes() const { return classes_; }

  ClassId operator[](std::size_t idx) const { return labels_[idx]; }
  ClassId at(std::size_t row, std::size_t col) const { return labels_[row * width_ + col]; }

  void set(std::size_t idx, ClassId label) {
    if (label > classes_) throw ArgumentError("label exceeds class count");
    labels_[idx] = label;
  }
  void set(std::size_t row, std::size_t col, ClassId label) { set(row * width_ + col, label); }

  std::span<const ClassId> data() const { return labels_; }

  std::size_t labeled_count() const {
    std::size_t n = 0;
    for (ClassId l : labels_) n += (l != kUnlabeled);
    return n;
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t classes_ = 0;
  std::vector<ClassId> labels_;
};

/// Per-pixel Pauli amplitudes (sqrt T11, sqrt T22, sqrt T33).
class PauliField {
 public:
  PauliField() = default;
  PauliField(std::size_t height, std::size_t width)
      : height_(height), width_(width), data_(height * width) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }

  std::array<double, 3>& operator[](std::size_t idx) { return data_[idx]; }
  const std::array<double, 3>& operator[](std::size_t idx) const { return data_[idx]; }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::array<double, 3>> data_;
};

inline constexpr std::size_t kRawChannels = 7;

/// Seven raw indicators per pixel: SPAN, T11, T22, T33, |T12|, |T13|, |T23|.
inline FeatureCube extract_raw_features(const CoherencyImage& img) {
  FeatureCube out(img.height(), img.width(), kRawChannels);
  const auto t11 = img.plane(TPlane::T11);
  const auto t22 = img.plane(TPlane::T22);
  const auto t33 = img.plane(TPlane::T33);
  const auto r12 = img.plane(TPlane::ReT12), i12 = img.plane(TPlane::ImT12);
  const auto r13 = img.plane(TPlane::ReT13), i13 = img.plane(TPlane::ImT13);
  const auto r23 = img.plane(TPlane::ReT23), i23 = img.plane(TPlane::ImT23);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    auto z = out.pixel(i);
    const double a = t11[i], b = t22[i], c = t33[i];
    z[0] = a + b + c;
    z[1] = a;
    z[2] = b;
    z[3] = c;
    z[4] = std::hypot(static_cast<double>(r12[i]), static_cast<double>(i12[i]));
    z[5] = std::hypot(static_cast<double>(r13[i]), static_cast<double>(i13[i]));
    z[6] = std::hypot(static_cast<double>(r23[i]), static_cast<double>(i23[i]));
  }
  return out;
}

inline PauliField extract_pauli(const CoherencyImage& img) {
  PauliField out(img.height(), img.width());
  const auto t11 = img.plane(TPlane::T11);
  const auto t22 = img.plane(TPlane::T22);
  const auto t33 = img.plane(TPlane::T33);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    out[i] = {std::sqrt(static_cast<double>(t11[i])), std::sqrt(static_cast<double>(t22[i])),
              std::sqrt(static_cast<double>(t33[i]))};
  }
  return out;
}

}  // namespace polsar
