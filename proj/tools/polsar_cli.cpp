// polsar: command-line front end for the segmentation pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "polsar/polsar.hpp"

namespace fs = std::filesystem;
using namespace polsar;

namespace {

/// Flags shared by every subcommand. Values given on the command line win
/// over the config file.
struct GlobalOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha_s;
  std::optional<std::string> feature_mode;
  bool no_mrf = false;
  std::optional<std::string> out_dir;
  std::optional<std::string> kernel;
  std::optional<double> train_frac;
};

struct SceneOptions {
  std::optional<std::size_t> height, width, classes, looks, seeds;
  std::optional<std::string> layout;
};

KeyValueConfig merged_config(const GlobalOptions& g, const SceneOptions* scene = nullptr) {
  KeyValueConfig kv = g.config ? KeyValueConfig::load(*g.config) : KeyValueConfig{};
  auto num = [](auto v) { return std::to_string(v); };
  if (g.seed) kv.set("seed", num(*g.seed));
  if (g.alpha_s) kv.set("alpha_s", num(*g.alpha_s));
  if (g.feature_mode) kv.set("feature_mode", *g.feature_mode);
  if (g.no_mrf) kv.set("mrf", "false");
  if (g.out_dir) kv.set("out_dir", *g.out_dir);
  if (g.kernel) kv.set("kernel", *g.kernel);
  if (g.train_frac) kv.set("train_frac", num(*g.train_frac));
  if (scene != nullptr) {
    if (scene->height) kv.set("scene.height", num(*scene->height));
    if (scene->width) kv.set("scene.width", num(*scene->width));
    if (scene->classes) kv.set("scene.classes", num(*scene->classes));
    if (scene->looks) kv.set("scene.looks", num(*scene->looks));
    if (scene->seeds) kv.set("scene.seeds", num(*scene->seeds));
    if (scene->layout) kv.set("scene.layout", *scene->layout);
  }
  return kv;
}

PipelineConfig resolve(const GlobalOptions& g, const SceneOptions* scene = nullptr) {
  PipelineConfig cfg = PipelineConfig::from_config(merged_config(g, scene));
  if (!cfg.scene && !cfg.coherency_path && !cfg.labels_path) cfg.scene = default_scene(4);
  return cfg;
}

void add_scene_options(CLI::App* cmd, SceneOptions& s) {
  cmd->add_option("--height", s.height, "Scene height in pixels");
  cmd->add_option("--width", s.width, "Scene width in pixels");
  cmd->add_option("--classes", s.classes, "Number of classes (2-8)");
  cmd->add_option("--looks", s.looks, "Looks averaged per pixel");
  cmd->add_option("--layout", s.layout, "voronoi or rectangles");
  cmd->add_option("--voronoi-seeds", s.seeds, "Voronoi seed count");
}

fs::path prepare_out_dir(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  return cfg.out_dir;
}

void print_report(const EvalReport& rep) {
  for (std::size_t k = 0; k < rep.per_class_ca.size(); ++k) {
    if (rep.per_class_ca[k]) {
      std::printf("  %-12s %6.2f%%\n", rep.class_names[k].c_str(), *rep.per_class_ca[k]);
    } else {
      std::printf("  %-12s    n/a\n", rep.class_names[k].c_str());
    }
  }
  std::printf("  overall      %6.2f%%  (%llu pixels)\n", rep.overall_ca,
              static_cast<unsigned long long>(rep.evaluated_pixels));
}

int cmd_synth(const GlobalOptions& g, const SceneOptions& s) {
  PipelineConfig cfg = resolve(g, &s);
  if (!cfg.scene) throw ArgumentError("synth needs a scene, not input files");
  const SceneData scene = acquire_scene(cfg);
  const fs::path out = prepare_out_dir(cfg);
  save_coherency(scene.image, out / "scene.pt3");
  save_labels(scene.truth, out / "truth.plb");
  export_label_png(scene.truth, Palette::standard(), out / "truth.png");
  std::printf("wrote %s, %s (%zux%zu, %zu classes)\n", (out / "scene.pt3").c_str(),
              (out / "truth.plb").c_str(), scene.image.height(), scene.image.width(),
              scene.truth.classes());
  return 0;
}

int cmd_features(const GlobalOptions& g, const fs::path& coherency) {
  const PipelineConfig cfg = resolve(g);
  const CoherencyImage img = load_coherency(coherency);
  const FeatureCube f = compute_features(img, cfg.feature_mode, cfg.dwt_levels);
  const fs::path out = prepare_out_dir(cfg) / "features.pfc";
  save_features(f, out);
  std::printf("wrote %s (%s, %zu channels)\n", out.c_str(), std::string(to_string(cfg.feature_mode)).c_str(),
              f.channels());
  return 0;
}

int cmd_train(const GlobalOptions& g, const fs::path& features_path, const fs::path& labels_path) {
  const PipelineConfig cfg = resolve(g);
  const FeatureCube f = load_features(features_path);
  const LabelMap labels = load_labels(labels_path);
  if (f.height() != labels.height() || f.width() != labels.width()) {
    throw ArgumentError("feature cube and label map dimensions differ");
  }
  TrainConfig tcfg = cfg.train;
  tcfg.rng_seed = cfg.rng_seed;
  const TrainingSet set = sample_training_set(labels, tcfg);
  TrainReport report;
  const LinearModel model = train(f, set, tcfg, &report);
  const fs::path out = prepare_out_dir(cfg);
  save_model(model, out / "model.plm");
  save_labels([&] {
    LabelMap mask(labels.height(), labels.width(), labels.classes());
    for (std::size_t i = 0; i < set.indices.size(); ++i) mask.set(set.indices[i], set.labels[i]);
    return mask;
  }(), out / "train.plb");
  nlohmann::ordered_json j;
  j["training_pixels"] = set.indices.size();
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(index_hash(set.indices)));
  j["train_index_hash"] = hash;
  j["chosen_lambda"] = report.chosen_lambda;
  j["cv_accuracy"] = report.cv_accuracy;
  j["epochs"] = report.objective.size() - 1;
  j["final_objective"] = report.objective.back();
  write_text(out / "train.json", j.dump(2) + "\n");
  std::printf("trained on %zu pixels, lambda %g; wrote %s\n", set.indices.size(), report.chosen_lambda,
              (out / "model.plm").c_str());
  return 0;
}

int cmd_predict(const GlobalOptions& g, const fs::path& model_path, const fs::path& features_path,
                const std::optional<fs::path>& coherency) {
  const PipelineConfig cfg = resolve(g);
  const LinearModel model = load_model(model_path);
  const FeatureCube f = load_features(features_path);
  const ProbabilityField probs = predict_probabilities(model, f);
  const fs::path out = prepare_out_dir(cfg);
  LabelMap pred;
  if (cfg.mrf && coherency) {
    const CoherencyImage img = load_coherency(*coherency);
    const BpResult bp = bp_solve(build_problem(probs, extract_pauli(img), cfg.alpha_s, cfg.kernel), cfg.bp);
    pred = bp.labels;
    write_text(out / "bp.json", bp_json(bp.diagnostics, cfg.record_timing).dump(2) + "\n");
    std::printf("bp: %zu iterations, delta %.3g, energy %.6g%s\n", bp.diagnostics.iterations,
                bp.diagnostics.final_delta, bp.diagnostics.energy,
                bp.diagnostics.converged ? "" : " (not converged)");
  } else {
    if (cfg.mrf) std::fprintf(stderr, "note: no --coherency given, skipping MRF refinement\n");
    pred = probs.argmax();
  }
  save_labels(pred, out / "prediction.plb");
  export_label_png(pred, Palette::standard(), out / "labels.png");
  std::printf("wrote %s, %s\n", (out / "prediction.plb").c_str(), (out / "labels.png").c_str());
  return 0;
}

int cmd_segment(const GlobalOptions& g, const SceneOptions& s, const std::optional<fs::path>& coherency,
                const std::optional<fs::path>& labels) {
  KeyValueConfig kv = merged_config(g, &s);
  if (coherency) kv.set("input.coherency", coherency->string());
  if (labels) kv.set("input.labels", labels->string());
  PipelineConfig cfg = PipelineConfig::from_config(kv);
  if (!cfg.scene && !cfg.coherency_path && !cfg.labels_path) cfg.scene = default_scene(4);
  const PipelineResult res = run_pipeline(cfg);
  std::printf("%s, %s, %zu training pixels\n", std::string(to_string(cfg.feature_mode)).c_str(),
              cfg.mrf ? "mrf on" : "mrf off", res.train_set.indices.size());
  print_report(res.report);
  if (res.bp && !res.bp->converged) {
    std::printf("  bp stopped after %zu iterations (delta %.3g)\n", res.bp->iterations, res.bp->final_delta);
  }
  std::printf("artifacts in %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_eval(const GlobalOptions& g, const fs::path& pred_path, const fs::path& truth_path,
             const std::optional<fs::path>& exclude_path) {
  const PipelineConfig cfg = resolve(g);
  const LabelMap pred = load_labels(pred_path);
  const LabelMap truth = load_labels(truth_path);
  std::vector<std::size_t> exclude;
  if (exclude_path) {
    const LabelMap mask = load_labels(*exclude_path);
    for (std::size_t i = 0; i < mask.pixels(); ++i) {
      if (mask[i] != kUnlabeled) exclude.push_back(i);
    }
  }
  const EvalReport rep = evaluate(pred, truth, exclude);
  const fs::path out = prepare_out_dir(cfg) / "metrics.json";
  write_text(out, metrics_json(rep, std::nullopt, false).dump(2) + "\n");
  print_report(rep);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_ablate(const GlobalOptions& g, const SceneOptions& s) {
  const PipelineConfig cfg = resolve(g, &s);
  const AblationResult res = ablation_harness(cfg);
  const auto j = ablation_json(res);
  const fs::path out = prepare_out_dir(cfg) / "ablation.json";
  write_text(out, j.dump(2) + "\n");
  std::printf("training pixels %zu, index hash %s\n", res.training_pixels,
              j["train_index_hash"].get<std::string>().c_str());
  for (const auto& row : res.rows) {
    std::printf("  %-10s %4zu features  %6.2f%%\n", row.name.c_str(), row.feature_dims, row.report.overall_ca);
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PolSAR terrain segmentation: wavelet texture features, linear classifier, BP-MRF refinement"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "Key/value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Random seed for scene, sampling and cross-validation");
  app.add_option("--alpha-s", g.alpha_s, "Pairwise smoothness weight");
  app.add_option("--feature-mode", g.feature_mode, "raw, dwt2d or dwt3d");
  app.add_flag("--no-mrf", g.no_mrf, "Skip BP refinement");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--kernel", g.kernel, "potts or linear-label");
  app.add_option("--train-frac", g.train_frac, "Fraction of labeled pixels used for training");

  SceneOptions scene;
  std::optional<fs::path> coherency, labels, features, model, pred, truth, exclude;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic speckled scene and its ground truth");
  add_scene_options(synth, scene);

  auto* feat = app.add_subcommand("features", "Extract a feature cube from a coherency file");
  feat->add_option("--coherency", coherency, "Coherency file (.pt3)")->required();

  auto* tr = app.add_subcommand("train", "Sample training pixels and fit the classifier");
  tr->add_option("--features", features, "Feature cube (.pfc)")->required();
  tr->add_option("--labels", labels, "Ground-truth labels (.plb)")->required();

  auto* pr = app.add_subcommand("predict", "Classify a feature cube, optionally with BP refinement");
  pr->add_option("--model", model, "Model file (.plm)")->required();
  pr->add_option("--features", features, "Feature cube (.pfc)")->required();
  pr->add_option("--coherency", coherency, "Coherency file; enables MRF refinement");

  auto* seg = app.add_subcommand("segment", "Run the whole pipeline and evaluate");
  add_scene_options(seg, scene);
  seg->add_option("--coherency", coherency, "Coherency file instead of a synthetic scene");
  seg->add_option("--labels", labels, "Ground-truth labels for --coherency");

  auto* ev = app.add_subcommand("eval", "Score a prediction against ground truth");
  ev->add_option("--pred", pred, "Predicted labels (.plb)")->required();
  ev->add_option("--truth", truth, "Ground-truth labels (.plb)")->required();
  ev->add_option("--exclude", exclude, "Label file whose labeled pixels are skipped (e.g. train.plb)");

  auto* ab = app.add_subcommand("ablate", "Compare raw, dwt2d, dwt3d and dwt3d+MRF on one sample");
  add_scene_options(ab, scene);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(g, scene);
    if (feat->parsed()) return cmd_features(g, *coherency);
    if (tr->parsed()) return cmd_train(g, *features, *labels);
    if (pr->parsed()) return cmd_predict(g, *model, *features, coherency);
    if (seg->parsed()) return cmd_segment(g, scene, coherency, labels);
    if (ev->parsed()) return cmd_eval(g, *pred, *truth, exclude);
    if (ab->parsed()) return cmd_ablate(g, scene);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
