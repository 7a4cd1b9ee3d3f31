#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "polsar/core.hpp"
#include "polsar/error.hpp"
#include "polsar/io.hpp"
#include "polsar/rng.hpp"

namespace polsar {

struct TrainConfig {
  double train_fraction = 0.01;
  std::size_t cv_samples = 200;
  std::size_t cv_folds = 5;
  std::vector<double> reg_grid = {1e-3, 1e-2, 1e-1, 1.0, 10.0};
  std::size_t max_epochs = 500;
  double tol = 1e-8;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
      throw ArgumentError("train_fraction must be in (0, 1]");
    }
    if (cv_folds < 2) throw ArgumentError("cv_folds must be >= 2");
    if (cv_samples < cv_folds) throw ArgumentError("cv_samples must be >= cv_folds");
    if (reg_grid.empty()) throw ArgumentError("reg_grid must not be empty");
    for (double l : reg_grid) {
      if (!(l > 0.0)) throw ArgumentError("regularization strengths must be > 0");
    }
    if (max_epochs < 1) throw ArgumentError("max_epochs must be >= 1");
  }
};

/// Sampled training pixels: linear indices (ascending) and their labels.
struct TrainingSet {
  std::vector<std::size_t> indices;
  std::vector<ClassId> labels;
  std::size_t classes = 0;
};

namespace detail {
inline constexpr std::uint64_t kSampleTag = 0x53414D50ULL;  // "SAMP"
inline constexpr std::uint64_t kCvTag = 0x43565356ULL;      // "CVSV"
}  // namespace detail

/**
 * Uniform sample without replacement of round(fraction * labeled) labeled
 * pixels. If the draw misses a class, the last-drawn pixels of classes with
 * more than one sample are swapped for the first undrawn pixel of each
 * missing class.
 */
inline TrainingSet sample_training_set(const LabelMap& labels, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t k = labels.classes();
  std::vector<std::size_t> pool;
  std::vector<std::size_t> per_class(k + 1, 0);
  for (std::size_t i = 0; i < labels.pixels(); ++i) {
    if (labels[i] != kUnlabeled) {
      pool.push_back(i);
      ++per_class[labels[i]];
    }
  }
  for (std::size_t c = 1; c <= k; ++c) {
    if (per_class[c] == 0) {
      throw ArgumentError("class " + std::to_string(c) + " has no labeled pixels");
    }
  }

  Stream rng = Stream::derive(cfg.rng_seed, detail::kSampleTag, 0);
  shuffle(pool, rng);
  const auto target = static_cast<std::size_t>(std::llround(cfg.train_fraction * pool.size()));
  const std::size_t m = std::clamp(target, k, pool.size());

  std::vector<std::size_t> drawn(k + 1, 0);
  for (std::size_t i = 0; i < m; ++i) ++drawn[labels[pool[i]]];
  std::size_t next_free = m;
  for (std::size_t c = 1; c <= k; ++c) {
    if (drawn[c] > 0) continue;
    while (labels[pool[next_free]] != c) ++next_free;
    // Evict the latest draw whose class can spare a sample.
    std::size_t victim = m;
    while (drawn[labels[pool[victim - 1]]] < 2) --victim;
    --victim;
    --drawn[labels[pool[victim]]];
    std::swap(pool[victim], pool[next_free]);
    ++drawn[c];
  }

  std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(chosen.begin(), chosen.end());
  TrainingSet out;
  out.classes = k;
  out.indices = std::move(chosen);
  out.labels.reserve(m);
  for (std::size_t i : out.indices) out.labels.push_back(labels[i]);
  return out;
}

/// Softmax-linear model: P(k | z) = softmax(W * standardize(z) + b)_k.
struct LinearModel {
  std::size_t classes = 0;
  std::size_t dims = 0;
  std::vector<double> weights;  // classes x dims, row-major
  std::vector<double> biases;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  double lambda = 0.0;  // chosen regularization strength (not serialized)

  /// Class scores for one feature vector.
  void scores(std::span<const double> z, std::span<double> out) const {
    for (std::size_t k = 0; k < classes; ++k) {
      double s = biases[k];
      const double* w = weights.data() + k * dims;
      for (std::size_t c = 0; c < dims; ++c) s += w[c] * ((z[c] - feature_mean[c]) / feature_scale[c]);
      out[k] = s;
    }
  }

  bool operator==(const LinearModel& o) const {
    return classes == o.classes && dims == o.dims && weights == o.weights && biases == o.biases &&
           feature_mean == o.feature_mean && feature_scale == o.feature_scale;
  }
};

/// In-place normalized exponential; shift-invariant by construction.
inline void softmax(std::span<double> scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - top);
    sum += s;
  }
  for (double& s : scores) s /= sum;
}

namespace detail {

/// Dense standardized design matrix with 0-based class targets.
struct Design {
  std::size_t rows = 0;
  std::size_t dims = 0;
  std::vector<double> x;  // rows x dims
  std::vector<std::size_t> y;

  Design subset(std::span<const std::size_t> which) const {
    Design d;
    d.rows = which.size();
    d.dims = dims;
    d.x.reserve(d.rows * dims);
    for (std::size_t r : which) {
      d.x.insert(d.x.end(), x.begin() + static_cast<std::ptrdiff_t>(r * dims),
                 x.begin() + static_cast<std::ptrdiff_t>((r + 1) * dims));
      d.y.push_back(y[r]);
    }
    return d;
  }
};

/// Parameters laid out as [W (k x dims) | b (k)].
struct SoftmaxObjective {
  const Design& data;
  std::size_t classes;
  double lambda;

  std::size_t size() const { return classes * (data.dims + 1); }

  /// Mean cross-entropy plus lambda/2 ||W||^2. Fills `grad` when non-empty.
  double evaluate(std::span<const double> theta, std::span<double> grad) const {
    const std::size_t dims = data.dims;
    const double* w = theta.data();
    const double* b = theta.data() + classes * dims;
    const bool want_grad = !grad.empty();
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> s(classes);
    double loss = 0.0;
    for (std::size_t r = 0; r < data.rows; ++r) {
      const double* xr = data.x.data() + r * dims;
      for (std::size_t k = 0; k < classes; ++k) {
        double acc = b[k];
        const double* wk = w + k * dims;
        for (std::size_t c = 0; c < dims; ++c) acc += wk[c] * xr[c];
        s[k] = acc;
      }
      const double top = *std::max_element(s.begin(), s.end());
      double z = 0.0;
      for (double v : s) z += std::exp(v - top);
      const double log_z = top + std::log(z);
      loss += log_z - s[data.y[r]];
      if (want_grad) {
        for (std::size_t k = 0; k < classes; ++k) {
          const double resid = std::exp(s[k] - log_z) - (k == data.y[r] ? 1.0 : 0.0);
          double* gk = grad.data() + k * dims;
          for (std::size_t c = 0; c < dims; ++c) gk[c] += resid * xr[c];
          grad[classes * dims + k] += resid;
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(data.rows);
    double reg = 0.0;
    for (std::size_t i = 0; i < classes * dims; ++i) reg += w[i] * w[i];
    if (want_grad) {
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= inv_n;
      for (std::size_t i = 0; i < classes * dims; ++i) grad[i] += lambda * w[i];
    }
    return loss * inv_n + 0.5 * lambda * reg;
  }
};

struct FitResult {
  std::vector<double> theta;
  std::vector<double> objective;  // value after each accepted epoch, [0] = start
};

/**
 * Full-batch gradient descent with Armijo backtracking. The first trial step
 * of each epoch is the Barzilai-Borwein step from the previous move; trials
 * halve until the sufficient-decrease test passes, so the recorded objective
 * never increases.
 */
inline FitResult fit_softmax(const Design& data, std::size_t classes, double lambda,
                             std::size_t max_epochs, double tol) {
  SoftmaxObjective obj{data, classes, lambda};
  const std::size_t n = obj.size();
  FitResult res;
  res.theta.assign(n, 0.0);
  std::vector<double> grad(n), trial(n), trial_grad(n);
  double f = obj.evaluate(res.theta, grad);
  res.objective.push_back(f);
  double step = 1.0;
  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-16;
  for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
    double gnorm2 = 0.0;
    for (double g : grad) gnorm2 += g * g;
    if (gnorm2 == 0.0) break;
    double f_trial = 0.0;
    bool accepted = false;
    while (step >= kMinStep) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = res.theta[i] - step * grad[i];
      f_trial = obj.evaluate(trial, trial_grad);
      if (f_trial <= f - kArmijo * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    // Barzilai-Borwein estimate for the next trial step.
    double sy = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double si = trial[i] - res.theta[i];
      sy += si * (trial_grad[i] - grad[i]);
      ss += si * si;
    }
    const double decrease = f - f_trial;
    res.theta.swap(trial);
    grad.swap(trial_grad);
    f = f_trial;
    res.objective.push_back(f);
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-8, 1e8) : step * 2.0;
    if (decrease <= tol * std::max(std::abs(f), 1.0)) break;
  }
  return res;
}

inline std::size_t predict_row(std::span<const double> theta, const Design& data, std::size_t r,
                               std::size_t classes) {
  const std::size_t dims = data.dims;
  const double* xr = data.x.data() + r * dims;
  std::size_t best = 0;
  double best_s = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < classes; ++k) {
    double acc = theta[classes * dims + k];
    for (std::size_t c = 0; c < dims; ++c) acc += theta[k * dims + c] * xr[c];
    if (acc > best_s) {
      best_s = acc;
      best = k;
    }
  }
  return best;
}

}  // namespace detail

/// Diagnostics from train(): CV accuracy per grid entry and the final
/// objective trace.
struct TrainReport {
  std::vector<double> cv_accuracy;
  double chosen_lambda = 0.0;
  std::vector<double> objective;
};

/**
 * Fits the model on the sampled pixels. Features are z-scored with training
 * statistics; lambda is chosen by k-fold cross-validation on a random subset
 * of at most cv_samples training pixels (mean held-out accuracy, ties go to
 * the smaller lambda); the final fit uses all training pixels.
 */
inline LinearModel train(const FeatureCube& features, const TrainingSet& set,
                         const TrainConfig& cfg, TrainReport* report = nullptr) {
  cfg.validate();
  const std::size_t k = set.classes;
  if (k < 2) throw ArgumentError("training needs at least 2 classes");
  if (set.indices.empty()) throw ArgumentError("empty training set");
  if (set.indices.size() != set.labels.size()) throw ArgumentError("training set size mismatch");
  const std::size_t dims = features.channels();
  for (std::size_t i = 0; i < set.indices.size(); ++i) {
    if (set.indices[i] >= features.pixels()) throw ArgumentError("training index out of range");
    if (set.labels[i] == kUnlabeled || set.labels[i] > k) {
      throw ArgumentError("training label out of range");
    }
    for (double v : features.pixel(set.indices[i])) {
      if (!std::isfinite(v)) throw InvariantError("non-finite feature in training set");
    }
  }

  LinearModel model;
  model.classes = k;
  model.dims = dims;
  model.feature_mean.assign(dims, 0.0);
  model.feature_scale.assign(dims, 0.0);
  const double n = static_cast<double>(set.indices.size());
  for (std::size_t idx : set.indices) {
    const auto z = features.pixel(idx);
    for (std::size_t c = 0; c < dims; ++c) model.feature_mean[c] += z[c];
  }
  for (double& m : model.feature_mean) m /= n;
  for (std::size_t idx : set.indices) {
    const auto z = features.pixel(idx);
    for (std::size_t c = 0; c < dims; ++c) {
      const double d = z[c] - model.feature_mean[c];
      model.feature_scale[c] += d * d;
    }
  }
  for (double& s : model.feature_scale) {
    s = std::sqrt(s / n);
    if (!(s > 0.0)) s = 1.0;
  }

  detail::Design all;
  all.rows = set.indices.size();
  all.dims = dims;
  all.x.reserve(all.rows * dims);
  for (std::size_t i = 0; i < all.rows; ++i) {
    const auto z = features.pixel(set.indices[i]);
    for (std::size_t c = 0; c < dims; ++c) {
      all.x.push_back((z[c] - model.feature_mean[c]) / model.feature_scale[c]);
    }
    all.y.push_back(static_cast<std::size_t>(set.labels[i] - 1));
  }

  // Cross-validation subset and fold assignment.
  std::vector<std::size_t> order(all.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Stream rng = Stream::derive(cfg.rng_seed, detail::kCvTag, 0);
  shuffle(order, rng);
  order.resize(std::min(order.size(), cfg.cv_samples));
  const std::size_t folds = std::min(cfg.cv_folds, order.size());

  std::vector<double> grid = cfg.reg_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<double> cv_acc(grid.size(), 0.0);
  if (folds >= 2) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double acc_sum = 0.0;
      for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> fit_rows, held_rows;
        for (std::size_t p = 0; p < order.size(); ++p) {
          (p % folds == f ? held_rows : fit_rows).push_back(order[p]);
        }
        const detail::Design fit_set = all.subset(fit_rows);
        const auto fit = detail::fit_softmax(fit_set, k, grid[g], cfg.max_epochs, cfg.tol);
        std::size_t correct = 0;
        for (std::size_t r : held_rows) correct += detail::predict_row(fit.theta, all, r, k) == all.y[r];
        acc_sum += static_cast<double>(correct) / static_cast<double>(held_rows.size());
      }
      cv_acc[g] = acc_sum / static_cast<double>(folds);
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (cv_acc[g] > cv_acc[best]) best = g;
  }
  model.lambda = grid[best];

  const auto fit = detail::fit_softmax(all, k, model.lambda, cfg.max_epochs, cfg.tol);
  model.weights.assign(fit.theta.begin(), fit.theta.begin() + static_cast<std::ptrdiff_t>(k * dims));
  model.biases.assign(fit.theta.begin() + static_cast<std::ptrdiff_t>(k * dims), fit.theta.end());
  if (report != nullptr) {
    report->cv_accuracy = cv_acc;
    report->chosen_lambda = model.lambda;
    report->objective = fit.objective;
  }
  return model;
}

inline constexpr double kProbabilityFloor = 1e-12;

/// Per-pixel class probabilities, pixel-interleaved (K values per pixel).
class ProbabilityField {
 public:
  ProbabilityField() = default;
  ProbabilityField(std::size_t height, std::size_t width, std::size_t classes)
      : height_(height), width_(width), classes_(classes), probs_(height * width * classes) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t classes() const { return classes_; }

  std::span<const double> pixel(std::size_t idx) const {
    return {probs_.data() + idx * classes_, classes_};
  }
  std::span<double> pixel(std::size_t idx) { return {probs_.data() + idx * classes_, classes_}; }

  /// Most probable class (1-based) per pixel; ties go to the smaller class.
  LabelMap argmax() const {
    LabelMap out(height_, width_, classes_);
    for (std::size_t i = 0; i < pixels(); ++i) {
      const auto p = pixel(i);
      out.set(i, static_cast<ClassId>(std::max_element(p.begin(), p.end()) - p.begin() + 1));
    }
    return out;
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> probs_;
};

inline ProbabilityField predict_probabilities(const LinearModel& model,
                                              const FeatureCube& features) {
  if (features.channels() != model.dims) {
    throw ArgumentError("feature dimension " + std::to_string(features.channels()) +
                        " does not match model dimension " + std::to_string(model.dims));
  }
  ProbabilityField out(features.height(), features.width(), model.classes);
  for (std::size_t i = 0; i < features.pixels(); ++i) {
    auto p = out.pixel(i);
    model.scores(features.pixel(i), p);
    softmax(p);
    for (double& v : p) v = std::max(v, kProbabilityFloor);
  }
  return out;
}

namespace detail {
inline constexpr std::string_view kModelMagic{"PLM1", 4};
}

/// "PLM1" model file: u32 K, u32 C, then f64 weights (row-major), biases,
/// feature means and feature scales.
inline void save_model(const LinearModel& model, const std::filesystem::path& path) {
  detail::ByteWriter out;
  out.bytes(detail::kModelMagic);
  out.u32(static_cast<std::uint32_t>(model.classes));
  out.u32(static_cast<std::uint32_t>(model.dims));
  for (double v : model.weights) out.f64(v);
  for (double v : model.biases) out.f64(v);
  for (double v : model.feature_mean) out.f64(v);
  for (double v : model.feature_scale) out.f64(v);
  out.write_to(path);
}

inline LinearModel load_model(const std::filesystem::path& path) {
  detail::ByteReader in(path);
  in.expect_magic(detail::kModelMagic);
  LinearModel m;
  m.classes = in.u32();
  m.dims = in.u32();
  if (m.classes < 2 || m.dims < 1) throw IoError("invalid model header in '" + in.path() + "'");
  in.need((m.classes * m.dims + m.classes + 2 * m.dims) * 8);
  auto read = [&](std::vector<double>& v, std::size_t count) {
    v.resize(count);
    for (double& x : v) x = in.f64();
  };
  read(m.weights, m.classes * m.dims);
  read(m.biases, m.classes);
  read(m.feature_mean, m.dims);
  read(m.feature_scale, m.dims);
  for (double s : m.feature_scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InvariantError("invalid feature scale in model");
  }
  return m;
}

}  // namespace polsar
