// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dwt_oracle.hpp"
#include "mrf_instances.hpp"
#include "polsar/polsar.hpp"
#include "test_util.hpp"

namespace {

using namespace polsar;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

Outcome haar_energy() {
  const auto start = Clock::now();
  Stream rng(0xA11CE);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(1 + rng.below(64));
    for (double& v : x) v = 20.0 * rng.uniform() - 10.0;
    const auto lo = udwt_1d(x, HaarFilters::low);
    const auto hi = udwt_1d(x, HaarFilters::high);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double next = i + 1 < x.size() ? x[i + 1] : x.back();
      worst = std::max(worst, std::abs(lo[i] * lo[i] + hi[i] * hi[i] - x[i] * x[i] - next * next));
    }
  }
  const double t = seconds_since(start);
  return {worst <= 1e-10 && t < 1.0, fmt("max error %.3g, %.3f s", worst, t)};
}

Outcome dwt_oracle() {
  const auto start = Clock::now();
  Stream rng(0xD3D);
  double worst = 0.0;
  bool channels_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    FeatureCube raw(5, 5, 7);
    for (double& v : raw.data()) v = 6.0 * rng.uniform() - 3.0;
    const FeatureCube out = dwt_features(raw);
    channels_ok = channels_ok && out.channels() == 105;
    const auto ref = oracle::two_level_features(oracle::from_feature_cube(raw));
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t c = 0; c < 5; ++c) {
        for (std::size_t k = 0; k < 15; ++k) {
          for (std::size_t d = 0; d < 7; ++d) {
            worst = std::max(worst, std::abs(out(r, c, k * 7 + d) - ref[k][r][c][d]));
          }
        }
      }
    }
  }
  const double t = seconds_since(start);
  return {channels_ok && worst <= 1e-9 && t < 5.0,
          fmt("max error %.3g, %.3f s", worst, t) +
              (channels_ok ? ", 105 channels" : ", wrong channel count")};
}

Outcome bp_chains() {
  const auto start = Clock::now();
  Stream rng(0xC4A1);
  int exact = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    const std::size_t k = 2 + rng.below(3);
    const double alpha = rng.below(2) == 0 ? 0.5 : 5.0;
    const MrfProblem p = testing::random_problem(1, n, k, alpha, rng);
    const double bp = bp_solve(p).diagnostics.energy;
    exact += std::abs(bp - total_energy(p, exhaustive_map(p))) < 1e-9;
  }
  const double t = seconds_since(start);
  return {exact == 200 && t < 10.0, fmt("%.0f/200 exact, %.3f s", exact, t)};
}

Outcome bp_loopy() {
  const auto start = Clock::now();
  Stream rng(0x3B3);
  int no_worse = 0, optimal = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double alpha = 0.5 + 4.5 * rng.uniform();
    const MrfProblem p = testing::random_problem(3, 3, 3, alpha, rng);
    const double bp = bp_solve(p).diagnostics.energy;
    no_worse += bp <= total_energy(p, unary_argmin(p)) + 1e-12;
    optimal += std::abs(bp - total_energy(p, exhaustive_map(p))) < 1e-9;
  }
  const double t = seconds_since(start);
  return {no_worse == 100 && optimal >= 90 && t < 30.0,
          fmt("no worse than unary argmin %.0f/100, optimal %.0f/100, %.3f s", no_worse, optimal, t)};
}

Outcome zero_alpha() {
  int identical = 0;
  for (std::uint64_t seed : {11U, 12U, 13U, 14U, 15U}) {
    SceneSpec spec;
    spec.height = 64;
    spec.width = 64;
    spec.classes = default_class_bank(4);
    spec.layout = VoronoiLayout{12};
    PipelineConfig cfg;
    cfg.scene = spec;
    cfg.rng_seed = seed;
    cfg.train.train_fraction = 0.02;
    cfg.write_artifacts = false;
    cfg.alpha_s = 0.0;
    const LabelMap with = run_pipeline(cfg).prediction;
    cfg.mrf = false;
    identical += with == run_pipeline(cfg).prediction;
  }
  return {identical == 5, fmt("%.0f/5 seeds identical", identical)};
}

/// Criterion-6 scene and runs; shared by criteria 6, 7, 8 and 9.
constexpr std::uint64_t kSeeds[10] = {1000, 1001, 1002, 1003, 1004,
                                      1005, 1006, 1007, 1008, 1009};

PipelineConfig scaled_config(std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.scene = default_scene(4);
  cfg.rng_seed = seed;
  cfg.train.train_fraction = 0.01;
  cfg.alpha_s = 5.0;
  return cfg;
}

struct ScaledRun {
  AblationResult ablation;
};

std::vector<ScaledRun> g_runs;
double g_scaled_seconds = 0.0;

Outcome ablation_order() {
  const auto start = Clock::now();
  int dwt_wins = 0, mrf_wins = 0;
  double gain = 0.0;
  for (std::uint64_t seed : kSeeds) {
    ScaledRun run{ablation_harness(scaled_config(seed))};
    const double raw = run.ablation.row("raw").report.overall_ca;
    const double d3 = run.ablation.row("dwt3d").report.overall_ca;
    const double mrf = run.ablation.row("dwt3d+mrf").report.overall_ca;
    std::printf("  seed %llu: raw %.2f  dwt2d %.2f  dwt3d %.2f  dwt3d+mrf %.2f\n",
                static_cast<unsigned long long>(seed), raw,
                run.ablation.row("dwt2d").report.overall_ca, d3, mrf);
    dwt_wins += d3 > raw;
    mrf_wins += mrf > d3;
    gain += mrf - d3;
    g_runs.push_back(std::move(run));
  }
  gain /= 10.0;
  g_scaled_seconds = seconds_since(start);
  const bool pass = dwt_wins >= 9 && mrf_wins >= 9 && gain >= 2.0 && g_scaled_seconds < 120.0;
  return {pass, fmt("dwt3d>raw %.0f/10, mrf>dwt3d %.0f/10, ", dwt_wins, mrf_wins) +
                    fmt("mean mrf gain %.2f pp, %.1f s", gain, g_scaled_seconds)};
}

Outcome smoothing_trend() {
  int ok = 0;
  for (std::size_t s = 0; s < g_runs.size(); ++s) {
    const AblationResult& a = g_runs[s].ablation;
    const PauliField pauli = extract_pauli(a.scene.image);
    const auto& probs = a.row("dwt3d").probabilities;
    const auto weak = bp_solve(build_problem(probs, pauli, 0.5, SmoothnessKernel::Potts));
    const auto strong = bp_solve(build_problem(probs, pauli, 10.0, SmoothnessKernel::Potts));
    ok += count_discontinuities(strong.labels) <= count_discontinuities(weak.labels);
  }
  return {g_runs.size() == 10 && ok >= 9, fmt("%.0f/10 seeds", ok)};
}

Outcome normalization() {
  double worst = 0.0;
  std::size_t pixels = 0;
  for (const auto& run : g_runs) {
    for (const auto& row : run.ablation.rows) {
      const auto& p = row.probabilities;
      for (std::size_t i = 0; i < p.pixels(); ++i) {
        double sum = 0.0;
        for (double v : p.pixel(i)) sum += v;
        worst = std::max(worst, std::abs(sum - 1.0));
      }
      pixels += p.pixels();
    }
  }
  return {pixels > 0 && worst <= 1e-6, fmt("max |sum - 1| %.3g over %.0f pixels", worst, pixels)};
}

Outcome determinism() {
  const auto base = std::filesystem::temp_directory_path() / "polsar-acceptance";
  std::filesystem::remove_all(base);
  PipelineConfig cfg = scaled_config(kSeeds[0]);
  cfg.out_dir = base / "a";
  run_pipeline(cfg);
  cfg.out_dir = base / "b";
  run_pipeline(cfg);
  bool same = true;
  for (const char* name : {"metrics.json", "labels.png"}) {
    const auto a = testing::read_bytes(base / "a" / name);
    same = same && !a.empty() && a == testing::read_bytes(base / "b" / name);
  }
  std::filesystem::remove_all(base);
  return {same, same ? "metrics.json and labels.png byte-identical" : "artifacts differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 haar energy conservation", haar_energy},
      {"2 dwt oracle equivalence", dwt_oracle},
      {"3 bp exact on chains", bp_chains},
      {"4 loopy bp quality", bp_loopy},
      {"5 zero alpha equals no mrf", zero_alpha},
      {"6 ablation ordering", ablation_order},
      {"7 smoothing trend", smoothing_trend},
      {"8 probability normalization", normalization},
      {"9 determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
