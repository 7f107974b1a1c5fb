// Copyright 2026 The qsit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qsit/mixopt.hpp"
#include "qsit/oracle.hpp"
#include "qsit/polyfit.hpp"
#include "test_util.hpp"

namespace qsit {
namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> t;
  for (int i = 0; i < n; ++i) t.push_back(a + (b - a) * i / (n - 1));
  return t;
}

template <typename F>
FittedCurve fit_fn(F f, std::vector<double> t) {
  std::vector<double> y;
  for (double v : t) y.push_back(f(v));
  return fit_curve(t, y);
}

TEST(FitCurve, RecoversQuarticExactly) {
  const auto c = fit_fn([](double t) { return t * t * t * t - t * t; }, linspace(-1, 1, 19));
  const double want[5] = {0, 0, -1, 0, 1};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(c.coefficients[i], want[i], 1e-9);
  EXPECT_LT(c.residual_rms, 1e-12);
}

TEST(FitCurve, QuadraticArgmax) {
  const auto c = fit_fn([](double t) { return 1 - (t - 0.38) * (t - 0.38); }, linspace(-1, 1, 19));
  EXPECT_NEAR(argmax(c), 0.38, 1e-6);
  EXPECT_NEAR(std::pow(10.0, argmax(c)), 2.40, 0.005);
}

TEST(FitCurve, RankDeficient) {
  EXPECT_THROW(fit_fn([](double t) { return t; }, {0, 1, 2, 3}), DegenerateSampleError);
  EXPECT_THROW(fit_fn([](double t) { return t; }, {0, 1, 2, 3, 3, 2}), DegenerateSampleError);
}

TEST(Argmax, EndpointsAndTies) {
  const auto up = fit_fn([](double t) { return t; }, linspace(-1, 1, 7));
  EXPECT_NEAR(argmax(up), 1.0, 1e-12);
  const auto flat = fit_fn([](double) { return 0.5; }, linspace(-1, 1, 7));
  EXPECT_DOUBLE_EQ(argmax(flat), -1.0);
  EXPECT_TRUE(is_flat(flat));
  EXPECT_FALSE(is_flat(up));
}

TEST(Argmax, AgreesWithDenseGridAndStaysInRange) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> t = linspace(-1, 1, 19), y;
    for (double v : t) y.push_back(rng.normal());
    const auto c = fit_curve(t, y);
    const double am = argmax(c);
    ASSERT_GE(am, -1.0);
    ASSERT_LE(am, 1.0);
    double best = -INFINITY;
    for (int i = 0; i <= 1000; ++i) best = std::max(best, c(-1.0 + 2.0 * i / 1000));
    EXPECT_GE(c(am), best - 1e-9) << trial;
  }
}

TEST(SweepGrid, NineteenPointsSymmetricInLog) {
  for (auto stage : {SweepStage::kD2VsD3, SweepStage::kMixedVsD1}) {
    const auto g = build_sweep_grid(stage);
    ASSERT_EQ(g.size(), 19u);
  }
  const auto g1 = build_sweep_grid(SweepStage::kD2VsD3);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], -g1[g1.size() - 1 - i], 1e-15);
  const auto r2 = sweep_ratios(SweepStage::kMixedVsD1);
  EXPECT_DOUBLE_EQ(r2.front(), 0.1);
  EXPECT_DOUBLE_EQ(r2[9], 1.0);
  EXPECT_DOUBLE_EQ(r2.back(), 10.0);
}

TEST(Counts, SplitAndCompose) {
  const auto [d2, d3] = split_mixed(1000, 2.42);
  EXPECT_EQ(d2 + d3, 1000u);
  EXPECT_LE(std::abs(static_cast<double>(d2) - 1000 * 2.42 / 3.42), 1.0);
  const auto r = compose_ratio(2.42, 3.54);
  EXPECT_DOUBLE_EQ(r.d1, 1.0);
  EXPECT_NEAR(r.d2, 3.54 * 2.42 / 3.42, 1e-12);
  EXPECT_NEAR(r.d3, 3.54 / 3.42, 1e-12);
  EXPECT_EQ(stage1_counts(2.0, 1000, 1000), (PoolCounts{0, 1000, 500}));
  EXPECT_EQ(stage1_counts(0.5, 1000, 1000), (PoolCounts{0, 500, 1000}));
}

struct ConstantOracle : Oracle {
  OracleResponse r{0.5, 0.5, 1.0, 4.66};
  OracleResponse evaluate(const OracleRequest&) const override { return r; }
  nlohmann::ordered_json describe() const override { return {{"kind", "constant"}}; }
};

class MixoptTest : public test::TempDirTest {};

TEST_F(MixoptTest, SweepAveragesRepeats) {
  SurfaceConfig sc;
  sc.noise_sigma = 0.02;
  SyntheticOracle oracle(sc);
  const auto pools = test::small_pools();
  std::vector<SweepTask> tasks;
  for (double g : sweep_ratios(SweepStage::kMixedVsD1)) tasks.push_back({g, stage2_counts(g, 2.42, 200)});
  SweepConfig cfg{9, 3, 2, 0.5, AxisMode::kLog10, dir()};
  const auto a = run_sweep(oracle, SweepStage::kMixedVsD1, tasks, pools, cfg);
  const auto b = run_sweep(oracle, SweepStage::kMixedVsD1, tasks, pools, cfg);
  ASSERT_EQ(a.points.size(), 19u);
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].repeats, 3);
    EXPECT_EQ(a.points[i].performance, b.points[i].performance);
    EXPECT_GT(a.points[i].performance_variance, 0.0);
  }
  SyntheticOracle quiet{SurfaceConfig{}};
  const auto q = run_sweep(quiet, SweepStage::kMixedVsD1, tasks, pools, cfg);
  for (const auto& p : q.points) EXPECT_LT(p.performance_variance, 1e-24);
}

TEST_F(MixoptTest, RecoversPlantedOptimaNoiseFree) {
  SyntheticOracle oracle{SurfaceConfig{}};
  const auto pools = test::full_pools();
  CoarseSearchConfig cfg;
  cfg.work_dir = dir();
  const auto r = coarse_search(oracle, pools, cfg);
  EXPECT_NEAR(std::log10(r.d2_to_d3), std::log10(2.42), 1e-6);
  EXPECT_NEAR(std::log10(r.mixed_to_d1), std::log10(3.54), 1e-6);
  EXPECT_NEAR(r.ratio.d2, 2.50, 0.05 * 2.50);
  EXPECT_NEAR(r.ratio.d3, 1.04, 0.05 * 1.04);
  EXPECT_EQ(r.status, "complete");
  EXPECT_GT(r.lambda_loss, 0.0);
}

TEST_F(MixoptTest, QuarticSurfaceAndScaleInvariance) {
  SurfaceConfig sc;
  sc.interpreting.curvature = 0.1;
  sc.interpreting.quartic = 0.05;
  sc.scoring.curvature = 0.1;
  sc.scoring.quartic = 0.04;
  SyntheticOracle oracle(sc);
  CoarseSearchConfig cfg;
  cfg.work_dir = dir();
  const auto small = coarse_search(oracle, test::scaled_pools(8000, 75000), cfg);
  const auto big = coarse_search(oracle, test::full_pools(), cfg);
  EXPECT_NEAR(std::log10(big.d2_to_d3), std::log10(2.42), 1e-6);
  EXPECT_NEAR(std::log10(big.mixed_to_d1), std::log10(3.54), 1e-6);
  EXPECT_NEAR(std::log10(small.d2_to_d3), std::log10(big.d2_to_d3), 1e-6);
  EXPECT_NEAR(std::log10(small.mixed_to_d1), std::log10(big.mixed_to_d1), 1e-5);
}

TEST_F(MixoptTest, LambdaFromConfirmationLosses) {
  ConstantOracle oracle;
  CoarseSearchConfig cfg;
  cfg.work_dir = dir();
  const auto r = coarse_search(oracle, test::small_pools(), cfg);
  EXPECT_NEAR(r.lambda_loss, 1.0 / 4.66, 1e-15);
  EXPECT_NEAR(r.lambda_loss, 0.2146, 5e-5);
  EXPECT_NEAR(r.d2_to_d3, 0.1, 1e-12);
  EXPECT_NEAR(r.mixed_to_d1, 0.1, 1e-12);
  const auto flat = std::count_if(r.warnings.begin(), r.warnings.end(),
                                  [](const std::string& w) { return w.find("flat") != std::string::npos; });
  EXPECT_EQ(flat, 2);
}

TEST_F(MixoptTest, PersistsByteIdenticalResult) {
  SurfaceConfig sc;
  sc.noise_sigma = 0.01;
  SyntheticOracle oracle(sc);
  CoarseSearchConfig cfg;
  cfg.work_dir = dir() / "w";
  cfg.seed = 31;
  cfg.record_path = dir() / "a.json";
  coarse_search(oracle, test::small_pools(), cfg);
  cfg.record_path = dir() / "b.json";
  coarse_search(oracle, test::small_pools(), cfg);
  EXPECT_EQ(test::slurp(dir() / "a.json"), test::slurp(dir() / "b.json"));
  const auto j = nlohmann::json::parse(test::slurp(dir() / "a.json"));
  EXPECT_EQ(j["stage1"]["points"].size(), 19u);
  const auto s = coarse_summary_from_json(j);
  EXPECT_GT(s.lambda_loss, 0.0);
}

struct FailingOracle : Oracle {
  OracleResponse evaluate(const OracleRequest& req) const override {
    if (req.manifest_path.find("stage2") != std::string::npos) throw OracleExecutionError("boom", 1, "log");
    return {0.5, 0.5, 1, 1};
  }
  nlohmann::ordered_json describe() const override { return {{"kind", "failing"}}; }
};

TEST_F(MixoptTest, FailurePersistsPartialResult) {
  FailingOracle oracle;
  CoarseSearchConfig cfg;
  cfg.work_dir = dir();
  cfg.record_path = dir() / "partial.json";
  EXPECT_THROW(coarse_search(oracle, test::small_pools(), cfg), OracleExecutionError);
  const auto j = nlohmann::json::parse(test::slurp(dir() / "partial.json"));
  EXPECT_EQ(j["status"], "failed_stage2");
  EXPECT_EQ(j["stage1"]["points"].size(), 19u);
  EXPECT_THROW(coarse_summary_from_json(j), DataError);
}

}  // namespace
}  // namespace qsit
