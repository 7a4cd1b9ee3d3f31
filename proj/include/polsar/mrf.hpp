#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polsar/classifier.hpp"
#include "polsar/core.hpp"
#include "polsar/error.hpp"

namespace polsar {

enum class SmoothnessKernel { Potts, LinearLabel };

inline std::string_view to_string(SmoothnessKernel k) {
  return k == SmoothnessKernel::Potts ? "potts" : "linear-label";
}

inline SmoothnessKernel parse_kernel(std::string_view s) {
  if (s == "potts") return SmoothnessKernel::Potts;
  if (s == "linear-label" || s == "linear") return SmoothnessKernel::LinearLabel;
  throw ArgumentError("unknown smoothness kernel '" + std::string(s) + "'");
}

/// Edge cost between classes y_i and y_j (1-based) joined by affinity a.
inline double pairwise_cost(std::size_t yi, std::size_t yj, double affinity, double alpha_s,
                            SmoothnessKernel kernel) {
  if (yi == yj) return 0.0;
  const double dist = kernel == SmoothnessKernel::Potts
                          ? 1.0
                          : static_cast<double>(yi > yj ? yi - yj : yj - yi);
  return alpha_s * affinity * dist;
}

struct SigmaEstimate {
  double sigma = 1.0;
  bool flat = false;  // every neighbouring pair identical; sigma fell back to 1
};

/// Mean squared Pauli distance over all 4-neighbour pairs.
inline SigmaEstimate compute_sigma(const PauliField& pauli) {
  const std::size_t h = pauli.height(), w = pauli.width();
  if (h * w < 2) throw ArgumentError("compute_sigma needs at least two pixels");
  auto dist2 = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = pauli[a][c] - pauli[b][c];
      s += d * d;
    }
    return s;
  };
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t i = r * w + c;
      if (c + 1 < w) {
        sum += dist2(i, i + 1);
        ++pairs;
      }
      if (r + 1 < h) {
        sum += dist2(i, i + w);
        ++pairs;
      }
    }
  }
  const double mean = sum / static_cast<double>(pairs);
  if (mean > 0.0) return {mean, false};
  return {1.0, true};
}

/**
 * Pixel-grid MRF: per-pixel unary costs (nats) and per-edge affinities on the
 * 4-connected grid. Horizontal edge (r, c)-(r, c+1) is stored at
 * r * (W - 1) + c; vertical edge (r, c)-(r+1, c) at r * W + c.
 */
struct MrfProblem {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  std::vector<double> unary;           // H * W * K, pixel-interleaved
  std::vector<double> horizontal;      // H * (W - 1)
  std::vector<double> vertical;        // (H - 1) * W
  double alpha_s = 5.0;
  SmoothnessKernel kernel = SmoothnessKernel::Potts;
  double sigma = 1.0;

  std::size_t pixels() const { return height * width; }
  std::span<const double> unary_at(std::size_t idx) const {
    return {unary.data() + idx * classes, classes};
  }
  double h_affinity(std::size_t r, std::size_t c) const { return horizontal[r * (width - 1) + c]; }
  double v_affinity(std::size_t r, std::size_t c) const { return vertical[r * width + c]; }

  void validate() const {
    if (height == 0 || width == 0 || classes == 0) throw ArgumentError("empty MRF problem");
    if (unary.size() != pixels() * classes) throw ArgumentError("unary size mismatch");
    if (horizontal.size() != height * (width - 1) || vertical.size() != (height - 1) * width) {
      throw ArgumentError("affinity size mismatch");
    }
    for (double u : unary) {
      if (!std::isfinite(u)) throw InvariantError("non-finite unary cost");
    }
    for (const auto* edges : {&horizontal, &vertical}) {
      for (double a : *edges) {
        if (!(a > 0.0 && a <= 1.0)) throw InvariantError("edge affinity outside (0, 1]");
      }
    }
    if (!(sigma > 0.0)) throw InvariantError("sigma must be positive");
    if (!(alpha_s >= 0.0) || !std::isfinite(alpha_s)) throw ArgumentError("alpha_s must be >= 0");
  }
};

/// exp(-d^2 / (2 sigma)), kept strictly positive.
inline double edge_affinity(const std::array<double, 3>& a, const std::array<double, 3>& b,
                            double sigma) {
  double d2 = 0.0;
  for (int c = 0; c < 3; ++c) d2 += (a[c] - b[c]) * (a[c] - b[c]);
  return std::max(std::exp(-d2 / (2.0 * sigma)), std::numeric_limits<double>::min());
}

/// Unary costs -log P(y | z) from the classifier output and Pauli edge
/// affinities with sigma estimated from the image itself.
inline MrfProblem build_problem(const ProbabilityField& probs, const PauliField& pauli,
                                double alpha_s, SmoothnessKernel kernel) {
  if (probs.height() != pauli.height() || probs.width() != pauli.width()) {
    throw ArgumentError("probability field and Pauli field dimensions differ");
  }
  MrfProblem p;
  p.height = probs.height();
  p.width = probs.width();
  p.classes = probs.classes();
  p.alpha_s = alpha_s;
  p.kernel = kernel;
  p.sigma = p.pixels() >= 2 ? compute_sigma(pauli).sigma : 1.0;
  p.unary.resize(p.pixels() * p.classes);
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    const auto pr = probs.pixel(i);
    for (std::size_t k = 0; k < p.classes; ++k) {
      p.unary[i * p.classes + k] = -std::log(std::max(pr[k], kProbabilityFloor));
    }
  }
  p.horizontal.resize(p.height * (p.width - 1));
  p.vertical.resize((p.height - 1) * p.width);
  for (std::size_t r = 0; r < p.height; ++r) {
    for (std::size_t c = 0; c < p.width; ++c) {
      const std::size_t i = r * p.width + c;
      if (c + 1 < p.width) p.horizontal[r * (p.width - 1) + c] = edge_affinity(pauli[i], pauli[i + 1], p.sigma);
      if (r + 1 < p.height) p.vertical[r * p.width + c] = edge_affinity(pauli[i], pauli[i + p.width], p.sigma);
    }
  }
  return p;
}

namespace detail {

/// Energy of a 0-based labeling; each undirected edge counted once.
inline double energy_of(const MrfProblem& p, std::span<const std::size_t> y) {
  double e = 0.0;
  for (std::size_t i = 0; i < p.pixels(); ++i) e += p.unary[i * p.classes + y[i]];
  for (std::size_t r = 0; r < p.height; ++r) {
    for (std::size_t c = 0; c < p.width; ++c) {
      const std::size_t i = r * p.width + c;
      if (c + 1 < p.width) e += pairwise_cost(y[i], y[i + 1], p.h_affinity(r, c), p.alpha_s, p.kernel);
      if (r + 1 < p.height) e += pairwise_cost(y[i], y[i + p.width], p.v_affinity(r, c), p.alpha_s, p.kernel);
    }
  }
  return e;
}

inline std::vector<std::size_t> zero_based(const MrfProblem& p, const LabelMap& labels) {
  if (labels.height() != p.height || labels.width() != p.width) {
    throw ArgumentError("label map dimensions do not match the MRF problem");
  }
  std::vector<std::size_t> y(p.pixels());
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    if (labels[i] == kUnlabeled) throw ArgumentError("unlabeled pixel in labeling");
    if (labels[i] > p.classes) throw ArgumentError("label exceeds class count");
    y[i] = labels[i] - 1U;
  }
  return y;
}

inline LabelMap one_based(const MrfProblem& p, std::span<const std::size_t> y) {
  LabelMap out(p.height, p.width, p.classes);
  for (std::size_t i = 0; i < p.pixels(); ++i) out.set(i, static_cast<ClassId>(y[i] + 1));
  return out;
}

}  // namespace detail

inline double total_energy(const MrfProblem& problem, const LabelMap& labels) {
  const auto y = detail::zero_based(problem, labels);
  return detail::energy_of(problem, y);
}

/// Per-pixel argmin of the unary costs (ties to the smaller class).
inline LabelMap unary_argmin(const MrfProblem& p) {
  std::vector<std::size_t> y(p.pixels());
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    const auto u = p.unary_at(i);
    y[i] = static_cast<std::size_t>(std::min_element(u.begin(), u.end()) - u.begin());
  }
  return detail::one_based(p, y);
}

/// Global minimizer by enumeration; K^(H*W) must not exceed 1e7.
inline LabelMap exhaustive_map(const MrfProblem& problem) {
  problem.validate();
  const std::size_t n = problem.pixels();
  const std::size_t k = problem.classes;
  double count = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    count *= static_cast<double>(k);
    if (count > 1e7) throw ArgumentError("instance too large for exhaustive search");
  }
  // Odometer with pixel 0 as the most significant digit visits labelings in
  // lexicographic order; keeping only strict improvements resolves ties to
  // the lexicographically smallest labeling.
  std::vector<std::size_t> y(n, 0), best = y;
  double best_e = detail::energy_of(problem, y);
  while (true) {
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++y[pos] < k) break;
      y[pos] = 0;
      if (pos == 0) {
        pos = n;
        break;
      }
    }
    if (pos == n) break;
    const double e = detail::energy_of(problem, y);
    if (e < best_e) {
      best_e = e;
      best = y;
    }
  }
  return detail::one_based(problem, best);
}

struct BpOptions {
  std::size_t max_sweeps = 50;
  double eps = 1e-4;
  double damping = 0.0;  // new = (1 - damping) * computed + damping * old
  bool normalize = true;
};

struct BpDiagnostics {
  std::size_t iterations = 0;
  double final_delta = 0.0;
  bool converged = false;
  double energy = 0.0;
  std::vector<double> sweep_seconds;  // wall time per iteration
};

struct BpResult {
  LabelMap labels;
  BpDiagnostics diagnostics;
};

namespace detail {

enum Incoming : std::size_t { kFromUp = 0, kFromDown, kFromLeft, kFromRight };

/// Incoming min-sum messages, one K-vector per pixel per direction.
class MessageState {
 public:
  MessageState(std::size_t pixels, std::size_t classes)
      : classes_(classes), planes_{std::vector<double>(pixels * classes, 0.0),
                                   std::vector<double>(pixels * classes, 0.0),
                                   std::vector<double>(pixels * classes, 0.0),
                                   std::vector<double>(pixels * classes, 0.0)} {}

  std::span<double> at(Incoming dir, std::size_t pixel) {
    return {planes_[dir].data() + pixel * classes_, classes_};
  }
  std::span<const double> at(Incoming dir, std::size_t pixel) const {
    return {planes_[dir].data() + pixel * classes_, classes_};
  }

 private:
  std::size_t classes_;
  std::array<std::vector<double>, 4> planes_;
};

class BpSolver {
 public:
  BpSolver(const MrfProblem& p, const BpOptions& opt)
      : p_(p), opt_(opt), msgs_(p.pixels(), p.classes), h_(p.classes), out_(p.classes) {}

  /// Sends the message from pixel `from` to pixel `to`. `skip` is the
  /// direction (at `from`) whose incoming message comes from `to`; the
  /// result lands at `to` under `store`.
  void send(std::size_t from, std::size_t to, Incoming skip, Incoming store, double affinity) {
    const std::size_t k = p_.classes;
    const auto u = p_.unary_at(from);
    for (std::size_t y = 0; y < k; ++y) h_[y] = u[y];
    for (std::size_t d = 0; d < 4; ++d) {
      if (d == skip) continue;
      const auto m = msgs_.at(static_cast<Incoming>(d), from);
      for (std::size_t y = 0; y < k; ++y) h_[y] += m[y];
    }
    for (std::size_t yt = 0; yt < k; ++yt) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t yf = 0; yf < k; ++yf) {
        best = std::min(best, h_[yf] + pairwise_cost(yf, yt, affinity, p_.alpha_s, p_.kernel));
      }
      out_[yt] = best;
    }
    auto dst = msgs_.at(store, to);
    if (opt_.damping > 0.0) {
      for (std::size_t y = 0; y < k; ++y) out_[y] = (1.0 - opt_.damping) * out_[y] + opt_.damping * dst[y];
    }
    if (opt_.normalize) {
      const double lo = *std::min_element(out_.begin(), out_.end());
      for (double& v : out_) v -= lo;
    }
    for (std::size_t y = 0; y < k; ++y) {
      delta_ = std::max(delta_, std::abs(out_[y] - dst[y]));
      dst[y] = out_[y];
    }
  }

  /// One iteration: full-image sweeps up, down, left, right. Returns the
  /// largest message change.
  double iterate() {
    const std::size_t h = p_.height, w = p_.width;
    delta_ = 0.0;
    for (std::size_t r = h; r-- > 1;) {  // up
      for (std::size_t c = 0; c < w; ++c) {
        send(r * w + c, (r - 1) * w + c, kFromUp, kFromDown, p_.v_affinity(r - 1, c));
      }
    }
    for (std::size_t r = 0; r + 1 < h; ++r) {  // down
      for (std::size_t c = 0; c < w; ++c) {
        send(r * w + c, (r + 1) * w + c, kFromDown, kFromUp, p_.v_affinity(r, c));
      }
    }
    for (std::size_t c = w; c-- > 1;) {  // left
      for (std::size_t r = 0; r < h; ++r) {
        send(r * w + c, r * w + c - 1, kFromLeft, kFromRight, p_.h_affinity(r, c - 1));
      }
    }
    for (std::size_t c = 0; c + 1 < w; ++c) {  // right
      for (std::size_t r = 0; r < h; ++r) {
        send(r * w + c, r * w + c + 1, kFromRight, kFromLeft, p_.h_affinity(r, c));
      }
    }
    return delta_;
  }

  /// Minimum-belief label per pixel (0-based, ties to the smaller class).
  std::vector<std::size_t> decode() const {
    std::vector<std::size_t> y(p_.pixels());
    for (std::size_t i = 0; i < p_.pixels(); ++i) {
      const auto u = p_.unary_at(i);
      std::size_t best = 0;
      double best_b = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < p_.classes; ++k) {
        double b = u[k];
        for (std::size_t d = 0; d < 4; ++d) b += msgs_.at(static_cast<Incoming>(d), i)[k];
        if (b < best_b) {
          best_b = b;
          best = k;
        }
      }
      y[i] = best;
    }
    return y;
  }

 private:
  const MrfProblem& p_;
  BpOptions opt_;
  MessageState msgs_;
  std::vector<double> h_, out_;
  double delta_ = 0.0;
};

}  // namespace detail

/**
 * Min-sum loopy belief propagation on the 4-connected grid. Messages start
 * at zero and are refreshed by four sequential directional sweeps per
 * iteration (up, down, left, right); iteration stops once the largest
 * message change drops below eps or after max_sweeps iterations.
 */
inline BpResult bp_solve(const MrfProblem& problem, const BpOptions& options = {}) {
  problem.validate();
  if (options.max_sweeps < 1) throw ArgumentError("max_sweeps must be >= 1");
  if (!(options.damping >= 0.0 && options.damping < 1.0)) {
    throw ArgumentError("damping must be in [0, 1)");
  }
  detail::BpSolver solver(problem, options);
  BpDiagnostics diag;
  for (std::size_t t = 0; t < options.max_sweeps; ++t) {
    const auto start = std::chrono::steady_clock::now();
    diag.final_delta = solver.iterate();
    diag.sweep_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    diag.iterations = t + 1;
    if (diag.final_delta < options.eps) {
      diag.converged = true;
      break;
    }
  }
  const auto y = solver.decode();
  diag.energy = detail::energy_of(problem, y);
  return {detail::one_based(problem, y), std::move(diag)};
}

/// Number of 4-neighbour pairs whose labels differ.
inline std::size_t count_discontinuities(const LabelMap& labels) {
  std::size_t n = 0;
  for (std::size_t r = 0; r < labels.height(); ++r) {
    for (std::size_t c = 0; c < labels.width(); ++c) {
      if (c + 1 < labels.width() && labels.at(r, c) != labels.at(r, c + 1)) ++n;
      if (r + 1 < labels.height() && labels.at(r, c) != labels.at(r + 1, c)) ++n;
    }
  }
  return n;
}

}  // namespace polsar
