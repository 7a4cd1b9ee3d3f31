#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <span>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "polsar/classifier.hpp"
#include "polsar/config.hpp"
#include "polsar/core.hpp"
#include "polsar/dwt.hpp"
#include "polsar/error.hpp"
#include "polsar/io.hpp"
#include "polsar/mrf.hpp"
#include "polsar/png.hpp"
#include "polsar/synth.hpp"

namespace polsar {

enum class FeatureMode { Raw, Dwt2d, Dwt3d };

inline std::string_view to_string(FeatureMode m) {
  switch (m) {
    case FeatureMode::Raw: return "raw";
    case FeatureMode::Dwt2d: return "dwt2d";
    case FeatureMode::Dwt3d: return "dwt3d";
  }
  return "?";
}

inline FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "raw") return FeatureMode::Raw;
  if (s == "dwt2d") return FeatureMode::Dwt2d;
  if (s == "dwt3d") return FeatureMode::Dwt3d;
  throw ArgumentError("unknown feature mode '" + std::string(s) + "'");
}

struct PipelineConfig {
  std::optional<std::filesystem::path> coherency_path;
  std::optional<std::filesystem::path> labels_path;
  std::optional<SceneSpec> scene;
  FeatureMode feature_mode = FeatureMode::Dwt3d;
  std::size_t dwt_levels = 2;
  TrainConfig train;
  double alpha_s = 5.0;
  SmoothnessKernel kernel = SmoothnessKernel::Potts;
  bool mrf = true;
  BpOptions bp;
  std::filesystem::path out_dir = "polsar-out";
  std::uint64_t rng_seed = 0;
  bool record_timing = false;    // timing_s / per-sweep times in metrics.json
  bool write_artifacts = true;

  void validate() const {
    const bool files = coherency_path.has_value() || labels_path.has_value();
    if (files == scene.has_value()) {
      throw ArgumentError("configure exactly one of input files or a synthetic scene");
    }
    if (files && !(coherency_path && labels_path)) {
      throw ArgumentError("input files need both a coherency and a label path");
    }
    if (dwt_levels < 1) throw ArgumentError("dwt levels must be >= 1");
    if (!(alpha_s >= 0.0)) throw ArgumentError("alpha_s must be >= 0");
    train.validate();
  }

  /**
   * Reads recognised keys from a parsed config. Unknown keys are rejected so
   * typos do not silently fall back to defaults.
   *
   *   seed, feature_mode, alpha_s, kernel, mrf, out_dir, timing,
   *   train_frac, cv_samples, cv_folds, reg_grid, max_epochs, tol,
   *   bp.max_sweeps, bp.eps, bp.damping, dwt.levels,
   *   input.coherency, input.labels,
   *   scene.height, scene.width, scene.classes, scene.layout,
   *   scene.seeds, scene.looks
   */
  static PipelineConfig from_config(const KeyValueConfig& kv) {
    static const std::vector<std::string> known = {
        "seed", "feature_mode", "alpha_s", "kernel", "mrf", "out_dir", "timing", "train_frac",
        "cv_samples", "cv_folds", "reg_grid", "max_epochs", "tol", "bp.max_sweeps", "bp.eps",
        "bp.damping", "dwt.levels", "input.coherency", "input.labels", "scene.height",
        "scene.width", "scene.classes", "scene.layout", "scene.seeds", "scene.looks"};
    for (const auto& [key, value] : kv.entries()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw ArgumentError("unknown config key '" + key + "'");
      }
    }
    PipelineConfig cfg;
    if (auto v = kv.get_uint("seed")) cfg.rng_seed = *v;
    if (auto v = kv.get_string("feature_mode")) cfg.feature_mode = parse_feature_mode(*v);
    if (auto v = kv.get_double("alpha_s")) cfg.alpha_s = *v;
    if (auto v = kv.get_string("kernel")) cfg.kernel = parse_kernel(*v);
    if (auto v = kv.get_bool("mrf")) cfg.mrf = *v;
    if (auto v = kv.get_string("out_dir")) cfg.out_dir = *v;
    if (auto v = kv.get_bool("timing")) cfg.record_timing = *v;
    if (auto v = kv.get_double("train_frac")) cfg.train.train_fraction = *v;
    if (auto v = kv.get_uint("cv_samples")) cfg.train.cv_samples = *v;
    if (auto v = kv.get_uint("cv_folds")) cfg.train.cv_folds = *v;
    if (auto v = kv.get_double_list("reg_grid")) cfg.train.reg_grid = *v;
    if (auto v = kv.get_uint("max_epochs")) cfg.train.max_epochs = *v;
    if (auto v = kv.get_double("tol")) cfg.train.tol = *v;
    if (auto v = kv.get_uint("bp.max_sweeps")) cfg.bp.max_sweeps = *v;
    if (auto v = kv.get_double("bp.eps")) cfg.bp.eps = *v;
    if (auto v = kv.get_double("bp.damping")) cfg.bp.damping = *v;
    if (auto v = kv.get_uint("dwt.levels")) cfg.dwt_levels = *v;
    if (auto v = kv.get_string("input.coherency")) cfg.coherency_path = *v;
    if (auto v = kv.get_string("input.labels")) cfg.labels_path = *v;

    const bool any_scene = std::any_of(kv.entries().begin(), kv.entries().end(),
                                       [](const auto& e) { return e.first.rfind("scene.", 0) == 0; });
    if (any_scene) {
      SceneSpec s;
      if (auto v = kv.get_uint("scene.height")) s.height = *v;
      if (auto v = kv.get_uint("scene.width")) s.width = *v;
      s.classes = default_class_bank(kv.get_uint("scene.classes").value_or(4));
      const std::string layout = kv.get_string("scene.layout").value_or("voronoi");
      if (layout == "rectangles") {
        s.layout = RectanglesLayout{};
      } else if (layout == "voronoi") {
        s.layout = VoronoiLayout{kv.get_uint("scene.seeds").value_or(VoronoiLayout{}.seeds)};
      } else {
        throw ArgumentError("unknown scene layout '" + layout + "'");
      }
      if (auto v = kv.get_uint("scene.looks")) s.looks = *v;
      cfg.scene = std::move(s);
    }
    return cfg;
  }
};

/// Standard desk-scale synthetic scene: 256x256, four default classes,
/// four looks, Voronoi layout.
inline SceneSpec default_scene(std::size_t classes = 4) {
  SceneSpec s;
  s.classes = default_class_bank(classes);
  return s;
}

struct SceneData {
  CoherencyImage image;
  LabelMap truth;
  std::vector<std::string> class_names;
};

inline SceneData acquire_scene(const PipelineConfig& cfg) {
  SceneData out;
  if (cfg.scene) {
    SceneSpec spec = *cfg.scene;
    spec.rng_seed = cfg.rng_seed;
    auto [img, labels] = generate_scene(spec);
    out.image = std::move(img);
    out.truth = std::move(labels);
    for (const auto& c : spec.classes) out.class_names.push_back(c.name);
  } else {
    out.image = load_coherency(*cfg.coherency_path);
    out.truth = load_labels(*cfg.labels_path);
    if (out.truth.height() != out.image.height() || out.truth.width() != out.image.width()) {
      throw ArgumentError("label map and coherency image dimensions differ");
    }
    for (std::size_t k = 1; k <= out.truth.classes(); ++k) {
      out.class_names.push_back("class-" + std::to_string(k));
    }
  }
  return out;
}

inline FeatureCube compute_features(const CoherencyImage& img, FeatureMode mode,
                                    std::size_t levels = 2) {
  FeatureCube raw = extract_raw_features(img);
  switch (mode) {
    case FeatureMode::Raw: return raw;
    case FeatureMode::Dwt2d: return dwt2d_features(raw, levels);
    case FeatureMode::Dwt3d: return dwt_features(raw, DwtPlan{levels});
  }
  return raw;
}

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> per_class_ca;  // empty when the class has no evaluated pixels
  double overall_ca = 0.0;
  std::vector<std::vector<std::uint64_t>> confusion;  // [truth - 1][pred - 1]
  std::uint64_t evaluated_pixels = 0;
  std::vector<std::pair<std::string, double>> timing_s;  // stage order
};

/**
 * Confusion matrix and accuracies over labeled truth pixels not listed in
 * `exclude` (sorted ascending). Unlabeled truth pixels are skipped.
 */
inline EvalReport evaluate(const LabelMap& pred, const LabelMap& truth,
                           std::span<const std::size_t> exclude = {}) {
  if (pred.height() != truth.height() || pred.width() != truth.width()) {
    throw ArgumentError("prediction and truth dimensions differ");
  }
  const std::size_t k = truth.classes();
  if (pred.classes() > k) throw ArgumentError("prediction has more classes than truth");
  EvalReport rep;
  rep.confusion.assign(k, std::vector<std::uint64_t>(k, 0));
  std::size_t next_excluded = 0;
  for (std::size_t i = 0; i < truth.pixels(); ++i) {
    while (next_excluded < exclude.size() && exclude[next_excluded] < i) ++next_excluded;
    if (next_excluded < exclude.size() && exclude[next_excluded] == i) continue;
    if (truth[i] == kUnlabeled) continue;
    if (pred[i] == kUnlabeled) throw ArgumentError("prediction leaves an evaluated pixel unlabeled");
    ++rep.confusion[truth[i] - 1U][pred[i] - 1U];
    ++rep.evaluated_pixels;
  }
  if (rep.evaluated_pixels == 0) throw ArgumentError("empty evaluation set");
  std::uint64_t correct = 0;
  for (std::size_t t = 0; t < k; ++t) {
    std::uint64_t row = 0;
    for (std::uint64_t v : rep.confusion[t]) row += v;
    correct += rep.confusion[t][t];
    if (row == 0) {
      rep.per_class_ca.emplace_back(std::nullopt);
    } else {
      rep.per_class_ca.emplace_back(100.0 * static_cast<double>(rep.confusion[t][t]) /
                                    static_cast<double>(row));
    }
  }
  rep.overall_ca = 100.0 * static_cast<double>(correct) / static_cast<double>(rep.evaluated_pixels);
  for (std::size_t t = 1; t <= k; ++t) rep.class_names.push_back("class-" + std::to_string(t));
  return rep;
}

/// FNV-1a over the index list; identifies a training sample in logs.
inline std::uint64_t index_hash(std::span<const std::size_t> indices) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t idx : indices) {
    for (int s = 0; s < 64; s += 8) {
      h ^= (static_cast<std::uint64_t>(idx) >> s) & 0xFFU;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

inline nlohmann::ordered_json bp_json(const BpDiagnostics& d, bool with_timing) {
  nlohmann::ordered_json j;
  j["iterations"] = d.iterations;
  j["final_delta"] = d.final_delta;
  j["converged"] = d.converged;
  j["energy"] = d.energy;
  if (with_timing) j["sweep_seconds"] = d.sweep_seconds;
  return j;
}

inline nlohmann::ordered_json metrics_json(const EvalReport& rep,
                                           const std::optional<BpDiagnostics>& bp,
                                           bool with_timing) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < rep.per_class_ca.size(); ++k) {
    if (rep.per_class_ca[k]) {
      per_class[rep.class_names[k]] = *rep.per_class_ca[k];
    } else {
      per_class[rep.class_names[k]] = nullptr;
    }
  }
  j["per_class_ca"] = per_class;
  j["overall_ca"] = rep.overall_ca;
  j["confusion"] = rep.confusion;
  if (with_timing) {
    nlohmann::ordered_json t = nlohmann::ordered_json::object();
    for (const auto& [stage, secs] : rep.timing_s) t[stage] = secs;
    j["timing_s"] = t;
  }
  j["bp"] = bp ? bp_json(*bp, with_timing) : nlohmann::ordered_json(nullptr);
  j["evaluated_pixels"] = rep.evaluated_pixels;
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

struct PipelineResult {
  EvalReport report;
  LabelMap prediction;
  TrainingSet train_set;
  ProbabilityField probabilities;
  LinearModel model;
  std::optional<BpDiagnostics> bp;
  nlohmann::ordered_json metrics;
};

namespace detail {

/// Runs one named stage, recording wall time and tagging errors with the
/// stage name.
template <typename Fn>
auto run_stage(std::string_view name, std::vector<std::pair<std::string, double>>& timing, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&] {
    timing.emplace_back(std::string(name),
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto result = fn();
      finish();
      return result;
    }
  } catch (const Error& e) {
    throw Error("stage '" + std::string(name) + "': " + e.what());
  }
}

}  // namespace detail

/**
 * End-to-end segmentation: acquire the scene, extract features, sample
 * training pixels, fit the classifier, predict probabilities, optionally
 * refine with BP, and evaluate on labeled pixels outside the training
 * sample. Writes labels.png, metrics.json, model.plm (and timing.json) into
 * out_dir when write_artifacts is set.
 */
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, double>> timing;
  PipelineResult res;

  const SceneData scene = detail::run_stage("scene", timing, [&] { return acquire_scene(cfg); });
  const FeatureCube features = detail::run_stage(
      "features", timing, [&] { return compute_features(scene.image, cfg.feature_mode, cfg.dwt_levels); });
  TrainConfig tcfg = cfg.train;
  tcfg.rng_seed = cfg.rng_seed;
  res.train_set = detail::run_stage("sample", timing, [&] { return sample_training_set(scene.truth, tcfg); });
  res.model = detail::run_stage("train", timing, [&] { return train(features, res.train_set, tcfg); });
  res.probabilities =
      detail::run_stage("predict", timing, [&] { return predict_probabilities(res.model, features); });
  if (cfg.mrf) {
    const auto bp = detail::run_stage("mrf", timing, [&] {
      const MrfProblem problem =
          build_problem(res.probabilities, extract_pauli(scene.image), cfg.alpha_s, cfg.kernel);
      return bp_solve(problem, cfg.bp);
    });
    res.prediction = bp.labels;
    res.bp = bp.diagnostics;
  } else {
    res.prediction = res.probabilities.argmax();
  }
  res.report = detail::run_stage("evaluate", timing, [&] {
    return evaluate(res.prediction, scene.truth, res.train_set.indices);
  });
  res.report.class_names = scene.class_names;
  res.report.timing_s = timing;
  res.metrics = metrics_json(res.report, res.bp, cfg.record_timing);

  if (cfg.write_artifacts) {
    detail::run_stage("export", timing, [&] {
      std::filesystem::create_directories(cfg.out_dir);
      export_label_png(res.prediction, Palette::standard(), cfg.out_dir / "labels.png");
      write_text(cfg.out_dir / "metrics.json", res.metrics.dump(2) + "\n");
      save_model(res.model, cfg.out_dir / "model.plm");
      nlohmann::ordered_json t = nlohmann::ordered_json::object();
      for (const auto& [stage, secs] : timing) t[stage] = secs;
      write_text(cfg.out_dir / "timing.json", t.dump(2) + "\n");
    });
  }
  return res;
}

struct AblationRow {
  std::string name;
  FeatureMode mode = FeatureMode::Raw;
  bool mrf = false;
  std::size_t feature_dims = 0;
  EvalReport report;
  LabelMap prediction;
  ProbabilityField probabilities;
  std::optional<BpDiagnostics> bp;
};

struct AblationResult {
  std::vector<AblationRow> rows;  // raw, dwt2d, dwt3d, dwt3d+mrf
  std::uint64_t train_index_hash = 0;
  std::size_t training_pixels = 0;
  SceneData scene;
  TrainingSet train_set;

  const AblationRow& row(std::string_view name) const {
    for (const auto& r : rows) {
      if (r.name == name) return r;
    }
    throw ArgumentError("no ablation row '" + std::string(name) + "'");
  }
};

/**
 * Runs raw, dwt2d, dwt3d and dwt3d+MRF on one scene with one shared
 * training sample. The MRF row refines the dwt3d probabilities.
 */
inline AblationResult ablation_harness(const PipelineConfig& base) {
  base.validate();
  AblationResult res;
  res.scene = acquire_scene(base);
  TrainConfig tcfg = base.train;
  tcfg.rng_seed = base.rng_seed;
  res.train_set = sample_training_set(res.scene.truth, tcfg);
  res.train_index_hash = index_hash(res.train_set.indices);
  res.training_pixels = res.train_set.indices.size();

  const FeatureCube raw = extract_raw_features(res.scene.image);
  auto classify = [&](std::string name, FeatureMode mode, const FeatureCube& features) {
    AblationRow row;
    row.name = std::move(name);
    row.mode = mode;
    row.feature_dims = features.channels();
    const LinearModel model = train(features, res.train_set, tcfg);
    row.probabilities = predict_probabilities(model, features);
    row.prediction = row.probabilities.argmax();
    row.report = evaluate(row.prediction, res.scene.truth, res.train_set.indices);
    row.report.class_names = res.scene.class_names;
    return row;
  };
  res.rows.push_back(classify("raw", FeatureMode::Raw, raw));
  res.rows.push_back(classify("dwt2d", FeatureMode::Dwt2d, dwt2d_features(raw, base.dwt_levels)));
  res.rows.push_back(
      classify("dwt3d", FeatureMode::Dwt3d, dwt_features(raw, DwtPlan{base.dwt_levels})));

  AblationRow mrf_row;
  mrf_row.name = "dwt3d+mrf";
  mrf_row.mode = FeatureMode::Dwt3d;
  mrf_row.mrf = true;
  mrf_row.feature_dims = res.rows.back().feature_dims;
  mrf_row.probabilities = res.rows.back().probabilities;
  const MrfProblem problem = build_problem(mrf_row.probabilities, extract_pauli(res.scene.image),
                                           base.alpha_s, base.kernel);
  auto bp = bp_solve(problem, base.bp);
  mrf_row.prediction = std::move(bp.labels);
  mrf_row.bp = bp.diagnostics;
  mrf_row.report = evaluate(mrf_row.prediction, res.scene.truth, res.train_set.indices);
  mrf_row.report.class_names = res.scene.class_names;
  res.rows.push_back(std::move(mrf_row));
  return res;
}

inline nlohmann::ordered_json ablation_json(const AblationResult& res) {
  nlohmann::ordered_json j;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(res.train_index_hash));
  j["train_index_hash"] = hash;
  j["training_pixels"] = res.training_pixels;
  j["dwt2d_layout"] = "2-D Haar on height/width per channel; level-1 LH, HL, HH + level-2 LL, LH, HL, HH";
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : res.rows) {
    nlohmann::ordered_json row;
    row["config"] = r.name;
    row["feature_dims"] = r.feature_dims;
    row["mrf"] = r.mrf;
    row["overall_ca"] = r.report.overall_ca;
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j;
}

}  // namespace polsar
