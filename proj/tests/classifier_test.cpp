#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "polsar/classifier.hpp"
#include "test_util.hpp"

namespace polsar {
namespace {

using testing::TempDir;

/// 100 x 100 map with four vertical class bands.
LabelMap banded_labels() {
  LabelMap labels(100, 100, 4);
  for (std::size_t r = 0; r < 100; ++r) {
    for (std::size_t c = 0; c < 100; ++c) labels.set(r, c, static_cast<ClassId>(c / 25 + 1));
  }
  return labels;
}

/// 1-D toy: class 1 at -1, class 2 at +1, 50 points each.
struct Toy {
  FeatureCube features{1, 100, 1};
  TrainingSet set;
};

Toy separable_toy() {
  Toy t;
  t.set.classes = 2;
  for (std::size_t i = 0; i < 100; ++i) {
    t.features(0, i, 0) = i < 50 ? -1.0 : 1.0;
    t.set.indices.push_back(i);
    t.set.labels.push_back(i < 50 ? 1 : 2);
  }
  return t;
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.rng_seed = 9;
  return cfg;
}

TEST(SampleTrainingSet, OnePercentOfTenThousand) {
  const LabelMap labels = banded_labels();
  TrainConfig cfg;
  cfg.rng_seed = 1;
  const TrainingSet set = sample_training_set(labels, cfg);
  ASSERT_EQ(set.indices.size(), 100U);
  EXPECT_TRUE(std::is_sorted(set.indices.begin(), set.indices.end()));
  std::set<ClassId> seen;
  for (std::size_t i = 0; i < set.indices.size(); ++i) {
    EXPECT_NE(labels[set.indices[i]], kUnlabeled);
    EXPECT_EQ(labels[set.indices[i]], set.labels[i]);
    seen.insert(set.labels[i]);
  }
  EXPECT_EQ(seen.size(), 4U);
}

TEST(SampleTrainingSet, FullFractionTakesEveryLabeledPixel) {
  LabelMap labels = banded_labels();
  labels.set(0, 0, kUnlabeled);
  TrainConfig cfg;
  cfg.train_fraction = 1.0;
  const TrainingSet set = sample_training_set(labels, cfg);
  EXPECT_EQ(set.indices.size(), labels.labeled_count());
  EXPECT_EQ(set.indices.front(), 1U);
}

TEST(SampleTrainingSet, DeterministicPerSeed) {
  const LabelMap labels = banded_labels();
  TrainConfig cfg;
  cfg.rng_seed = 42;
  const auto a = sample_training_set(labels, cfg);
  EXPECT_EQ(a.indices, sample_training_set(labels, cfg).indices);
  cfg.rng_seed = 43;
  EXPECT_NE(a.indices, sample_training_set(labels, cfg).indices);
}

TEST(SampleTrainingSet, RareClassIsForcedIn) {
  // One pixel of class 3 among 10,000; a 1% draw almost surely misses it.
  LabelMap labels(100, 100, 3, 1);
  for (std::size_t c = 0; c < 100; ++c) labels.set(0, c, 2);
  labels.set(99, 99, 3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrainConfig cfg;
    cfg.rng_seed = seed;
    const auto set = sample_training_set(labels, cfg);
    EXPECT_EQ(set.indices.size(), 100U);
    EXPECT_EQ(std::count(set.labels.begin(), set.labels.end(), 3), 1);
    EXPECT_GE(std::count(set.labels.begin(), set.labels.end(), 2), 1);
  }
}

TEST(SampleTrainingSet, MissingClassFails) {
  LabelMap labels(4, 4, 3, 1);
  labels.set(0, 0, 2);
  EXPECT_THROW(sample_training_set(labels, TrainConfig{}), ArgumentError);
}

TEST(SampleTrainingSet, BadFractionFails) {
  TrainConfig cfg;
  cfg.train_fraction = 0.0;
  EXPECT_THROW(sample_training_set(banded_labels(), cfg), ArgumentError);
  cfg.train_fraction = 1.5;
  EXPECT_THROW(sample_training_set(banded_labels(), cfg), ArgumentError);
}

TEST(Train, SeparableToy) {
  const Toy t = separable_toy();
  const LinearModel model = train(t.features, t.set, quick_config());
  const ProbabilityField p = predict_probabilities(model, t.features);
  const LabelMap pred = p.argmax();
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(pred[i], t.set.labels[i]);
  EXPECT_GT(p.pixel(99)[1], 0.9);
  EXPECT_GT(p.pixel(0)[0], 0.9);
}

TEST(Train, ConstantFeatureGivesUniformProbabilities) {
  FeatureCube f(1, 90, 1, 3.25);
  TrainingSet set;
  set.classes = 3;
  for (std::size_t i = 0; i < 90; ++i) {
    set.indices.push_back(i);
    set.labels.push_back(static_cast<ClassId>(i % 3 + 1));
  }
  const LinearModel model = train(f, set, quick_config());
  FeatureCube probe(1, 3, 1);
  probe(0, 0, 0) = -100.0;
  probe(0, 1, 0) = 3.25;
  probe(0, 2, 0) = 1e4;
  const ProbabilityField p = predict_probabilities(model, probe);
  for (std::size_t i = 0; i < 3; ++i) {
    for (double v : p.pixel(i)) EXPECT_NEAR(v, 1.0 / 3.0, 0.01);
  }
}

TEST(Train, BitIdenticalForSameSeed) {
  const CoherencyImage img = testing::random_scene(24, 24, 4);
  const FeatureCube f = extract_raw_features(img);
  SceneSpec spec;
  spec.height = 24;
  spec.width = 24;
  spec.classes = default_class_bank(3);
  spec.layout = RectanglesLayout{};
  spec.looks = 2;
  spec.rng_seed = 4;
  const LabelMap truth = generate_scene(spec).second;
  TrainConfig cfg;
  cfg.train_fraction = 0.2;
  cfg.rng_seed = 3;
  const auto set = sample_training_set(truth, cfg);
  const LinearModel a = train(f, set, cfg);
  const LinearModel b = train(f, set, cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.lambda, b.lambda);
}

TEST(Train, ObjectiveNeverIncreases) {
  const Toy t = separable_toy();
  for (double lambda : {1e-3, 1.0}) {
    TrainConfig cfg = quick_config();
    cfg.reg_grid = {lambda};
    TrainReport report;
    train(t.features, t.set, cfg, &report);
    ASSERT_GE(report.objective.size(), 2U);
    for (std::size_t i = 1; i < report.objective.size(); ++i) {
      EXPECT_LE(report.objective[i], report.objective[i - 1]);
    }
    EXPECT_EQ(report.chosen_lambda, lambda);
  }
}

TEST(Train, CrossValidationTiesGoToSmallerLambda) {
  // Separable data: every lightly regularized grid entry scores 100%
  // held-out accuracy.
  const Toy t = separable_toy();
  TrainConfig cfg = quick_config();
  cfg.reg_grid = {0.1, 0.001, 0.01};
  TrainReport report;
  train(t.features, t.set, cfg, &report);
  ASSERT_EQ(report.cv_accuracy.size(), 3U);
  for (double acc : report.cv_accuracy) EXPECT_DOUBLE_EQ(acc, 1.0);
  EXPECT_EQ(report.chosen_lambda, 0.001);
}

TEST(Train, CrossValidationPicksBestAccuracy) {
  const Toy t = separable_toy();
  TrainConfig cfg = quick_config();
  cfg.reg_grid = {10.0, 0.1, 1.0};
  TrainReport report;
  train(t.features, t.set, cfg, &report);
  const std::vector<double> grid = {0.1, 1.0, 10.0};  // ascending, as reported
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (report.cv_accuracy[g] > report.cv_accuracy[best]) best = g;
  }
  EXPECT_EQ(report.chosen_lambda, grid[best]);
}

TEST(Train, ScaleInvariantThroughStandardization) {
  const CoherencyImage img = testing::random_scene(20, 21, 6);
  const FeatureCube f = extract_raw_features(img);
  FeatureCube scaled = f;
  for (std::size_t p = 0; p < scaled.pixels(); ++p) {
    for (std::size_t c = 0; c < scaled.channels(); ++c) {
      scaled.pixel(p)[c] = f.pixel(p)[c] * static_cast<double>(c + 1) * 8.0;
    }
  }
  TrainingSet set;
  set.classes = 3;
  for (std::size_t i = 0; i < f.pixels(); i += 3) {
    set.indices.push_back(i);
    set.labels.push_back(static_cast<ClassId>((i % 21) / 7 + 1));
  }
  TrainConfig cfg = quick_config();
  cfg.reg_grid = {0.1};
  const auto pa = predict_probabilities(train(f, set, cfg), f);
  const auto pb = predict_probabilities(train(scaled, set, cfg), scaled);
  for (std::size_t i = 0; i < pa.pixels(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(pa.pixel(i)[k], pb.pixel(i)[k], 1e-9);
  }
}

TEST(Train, NonFiniteFeatureFails) {
  Toy t = separable_toy();
  t.features(0, 7, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train(t.features, t.set, quick_config()), InvariantError);
}

TEST(Train, MalformedTrainingSetFails) {
  Toy t = separable_toy();
  Toy bad_label = t;
  bad_label.set.labels[3] = 5;
  EXPECT_THROW(train(bad_label.features, bad_label.set, quick_config()), ArgumentError);
  Toy bad_index = t;
  bad_index.set.indices[3] = 1000;
  EXPECT_THROW(train(bad_index.features, bad_index.set, quick_config()), ArgumentError);
}

TEST(Softmax, HandExamples) {
  std::vector<double> two = {0.0, 0.0};
  softmax(two);
  EXPECT_DOUBLE_EQ(two[0], 0.5);
  EXPECT_DOUBLE_EQ(two[1], 0.5);
  std::vector<double> three = {std::log(2.0), 0.0, 0.0};
  softmax(three);
  EXPECT_NEAR(three[0], 0.5, 1e-15);
  EXPECT_NEAR(three[1], 0.25, 1e-15);
  EXPECT_NEAR(three[2], 0.25, 1e-15);
}

TEST(Softmax, ExtremeScoresStayFinite) {
  std::vector<double> s = {1000.0, -1000.0, 999.0};
  softmax(s);
  for (double v : s) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(s[0] + s[1] + s[2], 1.0, 1e-15);
}

TEST(PredictProbabilities, RowsSumToOne) {
  const CoherencyImage img = testing::random_scene(16, 18, 8);
  const FeatureCube f = extract_raw_features(img);
  TrainingSet set;
  set.classes = 3;
  for (std::size_t i = 0; i < f.pixels(); i += 2) {
    set.indices.push_back(i);
    set.labels.push_back(static_cast<ClassId>((i % 18) / 6 + 1));
  }
  const auto p = predict_probabilities(train(f, set, quick_config()), f);
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    double sum = 0.0;
    for (double v : p.pixel(i)) {
      EXPECT_GE(v, kProbabilityFloor);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(PredictProbabilities, DimensionMismatchFails) {
  const Toy t = separable_toy();
  const LinearModel model = train(t.features, t.set, quick_config());
  EXPECT_THROW(predict_probabilities(model, FeatureCube(2, 2, 3)), ArgumentError);
}

TEST(ModelFile, RoundTrip) {
  TempDir dir("clf");
  const Toy t = separable_toy();
  const LinearModel model = train(t.features, t.set, quick_config());
  save_model(model, dir / "m.plm");
  const LinearModel back = load_model(dir / "m.plm");
  EXPECT_EQ(back, model);
  const auto bytes = testing::read_bytes(dir / "m.plm");
  EXPECT_EQ(bytes.size(), 4U + 8U + 8U * (2 * 1 + 2 + 2 * 1));

  auto truncated = bytes;
  truncated.resize(bytes.size() - 1);
  testing::write_bytes(dir / "t.plm", truncated);
  EXPECT_THROW(load_model(dir / "t.plm"), IoError);
  EXPECT_THROW(load_model(dir / "missing.plm"), IoError);
}

}  // namespace
}  // namespace polsar
