// Copyright 2026 The ppaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ppaudit/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "ppaudit/status.hpp"

namespace ppaudit {
namespace {

ExperimentSpec FairSpec() {
  ExperimentSpec spec;
  spec.name = "fair";
  spec.audit.alpha = 0.2;
  spec.audit.delta = 0.05;
  spec.audit.epsilon = 1.0;
  spec.audit.attributes = *MakeAttributes({"a1", "a2"});
  spec.audit.domain = *ScoreDomain::Discrete(10);
  spec.population = {60000, {"a1", "a2"}, {0.5, 0.5}, {0.5, 0.5}, 0.0};
  spec.n_per_group = *PlannedSampleSize(spec.audit, true);
  spec.trials = 400;
  spec.seed = 1;
  return spec;
}

ExperimentSpec BiasedSpec() {
  ExperimentSpec spec = FairSpec();
  spec.name = "biased";
  spec.estimator.spread = 0.25;
  spec.estimator.score_noise_sd = 0.5;
  spec.estimator.bias.kind = BiasModel::Kind::kAdditive;
  spec.estimator.bias.per_group = {0, 2};
  return spec;
}

double Margin(double delta, int trials, double sigmas) {
  return delta + sigmas * std::sqrt(delta * (1 - delta) / trials);
}

TEST(RunTrial, NoNoiseHugeSampleIsNearZero) {
  ExperimentSpec spec = FairSpec();
  spec.audit.epsilon = 1e9;
  spec.n_per_group = 14000;
  auto experiment = *PrepareExperiment(spec);
  auto report = RunTrial(experiment, 3);
  ASSERT_TRUE(report.ok()) << report.status();
  EXPECT_LT(report->efg, 0.03);
  EXPECT_TRUE(report->passed);
}

TEST(RunTrial, StrongShiftAtPlannedSizeIsFlagged) {
  auto experiment = *PrepareExperiment(BiasedSpec());
  for (uint64_t seed = 0; seed < 20; ++seed) EXPECT_FALSE(RunTrial(experiment, seed)->passed);
}

TEST(RunTrial, SeedFixesTheReport) {
  auto experiment = *PrepareExperiment(FairSpec());
  auto a = *RunTrial(experiment, 17);
  auto b = *RunTrial(experiment, 17);
  EXPECT_EQ(a.efg, b.efg);
  EXPECT_EQ(a.argmax, b.argmax);
}

TEST(RunExperiment, FairPrivateFailureRateWithinDelta) {
  ExperimentSpec spec = FairSpec();
  spec.trials = 2000;
  auto result = RunExperiment(spec);
  ASSERT_TRUE(result.ok()) << result.status();
  ASSERT_TRUE(result->failure_rate.has_value());
  EXPECT_FALSE(result->power.has_value());
  EXPECT_EQ(result->n_per_group, 1419);
  EXPECT_LE(*result->failure_rate, Margin(0.05, 2000, 2));
}

TEST(RunExperiment, FairNonprivateFailureRateWithinDelta) {
  ExperimentSpec spec = FairSpec();
  spec.trials = 2000;
  spec.use_privacy = false;
  spec.n_per_group = *PlannedSampleSize(spec.audit, false);
  EXPECT_EQ(spec.n_per_group, 335);
  auto result = RunExperiment(spec);
  ASSERT_TRUE(result.ok()) << result.status();
  EXPECT_LE(*result->failure_rate, Margin(0.05, 2000, 2));
}

TEST(RunExperiment, FarBelowThePlanTheTestIsUnstable) {
  ExperimentSpec spec = FairSpec();
  spec.n_per_group = 50;
  auto small = *RunExperiment(spec);
  auto planned = *RunExperiment(FairSpec());
  EXPECT_GT(*small.failure_rate, 0.05);
  EXPECT_GT(*small.failure_rate, *planned.failure_rate);
}

TEST(RunExperiment, BiasedPowerIsHigh) {
  auto result = RunExperiment(BiasedSpec());
  ASSERT_TRUE(result.ok());
  EXPECT_FALSE(result->fair_config);
  EXPECT_GE(result->true_gap, 2 * 0.2);
  ASSERT_TRUE(result->power.has_value());
  EXPECT_GE(*result->power, 0.95);
}

TEST(RunExperiment, DeterministicAndExchangeable) {
  ExperimentSpec spec = FairSpec();
  spec.n_per_group = 80;
  spec.trials = 200;
  auto experiment = *PrepareExperiment(spec);
  std::vector<uint64_t> seeds;
  for (int i = 0; i < spec.trials; ++i) seeds.push_back(TrialSeed(spec.seed, i));
  auto a = *RunExperimentWithSeeds(experiment, seeds);
  std::shuffle(seeds.begin(), seeds.end(), std::mt19937_64(5));
  experiment.spec.threads = 3;
  auto b = *RunExperimentWithSeeds(experiment, seeds);
  EXPECT_EQ(a.flag_rate, b.flag_rate);
  EXPECT_EQ(a.efg.mean, b.efg.mean);
  EXPECT_EQ(a.efg.p50, b.efg.p50);
  EXPECT_EQ(a.efg.p95, b.efg.p95);
}

TEST(RunExperiment, MeanEfgFallsAsEpsilonGrows) {
  double previous = 1e9;
  for (double eps : {0.15, 0.5, 2.0, 8.0}) {
    ExperimentSpec spec = FairSpec();
    spec.audit.epsilon = eps;
    spec.n_per_group = 200;
    spec.trials = 300;
    const double mean = RunExperiment(spec)->efg.mean;
    EXPECT_LE(mean, previous) << "epsilon " << eps;
    previous = mean;
  }
}

TEST(RunExperiment, FewTrialsWarn) {
  ExperimentSpec spec = FairSpec();
  spec.trials = 20;
  auto result = *RunExperiment(spec);
  ASSERT_EQ(result.warnings.size(), 1u);
  EXPECT_NE(result.warnings[0].find("InsufficientTrials"), std::string::npos);
}

TEST(ExperimentSpec, Validation) {
  ExperimentSpec spec = FairSpec();
  spec.trials = 0;
  EXPECT_FALSE(spec.Validate().ok());
  spec = FairSpec();
  spec.n_per_group = 0;
  EXPECT_FALSE(spec.Validate().ok());
  spec = FairSpec();
  spec.population.labels = {"a2", "a1"};
  EXPECT_FALSE(spec.Validate().ok());
  spec = FairSpec();
  spec.name = "a,b";
  EXPECT_FALSE(spec.Validate().ok());
}

TEST(TradeoffCurve, EpsilonGridKeepsThePlanFixed) {
  ExperimentSpec spec = FairSpec();
  spec.trials = 300;
  auto rows = TradeoffCurve(TradeoffAxis::kEpsilon, {0.11, 0.5, 1, 5}, spec);
  ASSERT_TRUE(rows.ok()) << rows.status();
  for (const auto& row : *rows) {
    EXPECT_EQ(row.n_min, 1419);
    EXPECT_EQ(row.n_per_group, 1419);
    EXPECT_LE(row.failure_rate, Margin(0.05, 300, 3));
  }
}

TEST(TradeoffCurve, FailureRateFallsWithSampleSize) {
  ExperimentSpec spec = FairSpec();
  spec.audit.alpha = 0.1;
  spec.audit.epsilon = 1.0;
  spec.trials = 300;
  const int64_t n_min = *PlannedSampleSize(spec.audit, true);
  spec.n_per_group = n_min;
  std::vector<double> grid = {std::floor(n_min / 4.0), std::floor(n_min / 2.0),
                              static_cast<double>(n_min)};
  spec.population.size = 4 * n_min * 2 * 2;
  auto rows = TradeoffCurve(TradeoffAxis::kNPerGroup, grid, spec);
  ASSERT_TRUE(rows.ok()) << rows.status();
  for (size_t i = 1; i < rows->size(); ++i) {
    EXPECT_LE((*rows)[i].failure_rate, (*rows)[i - 1].failure_rate);
    EXPECT_LT((*rows)[i].mean_efg, (*rows)[i - 1].mean_efg);
  }
}

TEST(TradeoffCurve, EmptyGridIsAnError) {
  EXPECT_FALSE(TradeoffCurve(TradeoffAxis::kAlpha, {}, FairSpec()).ok());
}

TEST(Csv, ExperimentAndTradeoffLayouts) {
  ExperimentResult r;
  r.name = "x";
  r.trials = 10;
  r.n_per_group = 5;
  r.failure_rate = 0.1;
  r.flag_rate = 0.1;
  r.efg = {0.25, 0.5, 0.75};
  std::ostringstream out;
  WriteExperimentCsv(out, {r});
  EXPECT_EQ(out.str(),
            "name,trials,n_per_group,use_privacy,true_gap,failure_rate,power,flag_rate,"
            "efg_mean,efg_p50,efg_p95\n"
            "x,10,5,true,0,0.1,,0.1,0.25,0.5,0.75\n");
  std::ostringstream tradeoff;
  WriteTradeoffCsv(tradeoff, {{TradeoffAxis::kEpsilon, 0.5, 100, 100, 0.0, 0.125}});
  EXPECT_EQ(tradeoff.str(),
            "parameter,value,n_min,n_per_group,failure_rate,mean_efg\n"
            "epsilon,0.5,100,100,0,0.125\n");
}

}  // namespace
}  // namespace ppaudit
