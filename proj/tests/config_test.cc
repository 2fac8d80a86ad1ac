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

#include "ppaudit/config.hpp"

#include <filesystem>
#include <string>

#include "gtest/gtest.h"
#include "ppaudit/status.hpp"

namespace ppaudit::config {
namespace {

const std::filesystem::path kConfigs = PPAUDIT_CONFIG_DIR;

constexpr char kMinimal[] = R"(name: t
seed: 3
trials: 10
n_per_group: 100
audit:
  alpha: 0.2
  delta: 0.05
  epsilon: 1.0
  groups: [x, y]
  domain: {kind: discrete, bins: 4}
population:
  size: 1000
)";

TEST(ExperimentConfig, ShippedFairDefault) {
  auto config = LoadExperimentConfig(kConfigs / "fair_default.yaml");
  ASSERT_TRUE(config.ok()) << config.status();
  EXPECT_TRUE(config->n_from_planner);
  EXPECT_TRUE(config->seed_from_file);
  EXPECT_EQ(config->spec.seed, 20230131u);
  EXPECT_EQ(config->spec.trials, 2000);
  EXPECT_EQ(config->spec.n_per_group, 1419);
  EXPECT_EQ(config->spec.audit.domain.size(), 10u);
  EXPECT_FALSE(config->sweep.has_value());
}

TEST(ExperimentConfig, ShippedBiasedShift2) {
  auto config = LoadExperimentConfig(kConfigs / "biased_shift2.yaml");
  ASSERT_TRUE(config.ok()) << config.status();
  EXPECT_EQ(config->spec.estimator.bias.kind, BiasModel::Kind::kAdditive);
  EXPECT_EQ(config->spec.estimator.bias.per_group, (std::vector<double>{0, 2}));
  EXPECT_NEAR(TrueFairnessGap(config->spec.estimator, 2, config->spec.audit.domain),
              0.4253425668775668, 1e-9);
}

TEST(ExperimentConfig, ShippedTradeoff) {
  auto config = LoadExperimentConfig(kConfigs / "epsilon_tradeoff.yaml");
  ASSERT_TRUE(config.ok()) << config.status();
  ASSERT_TRUE(config->sweep.has_value());
  EXPECT_EQ(config->sweep->axis, TradeoffAxis::kEpsilon);
  EXPECT_EQ(config->sweep->values.size(), 6u);
}

TEST(ExperimentConfig, Defaults) {
  auto config = ParseExperimentConfig(kMinimal, "t.yaml");
  ASSERT_TRUE(config.ok()) << config.status();
  EXPECT_FALSE(config->n_from_planner);
  EXPECT_EQ(config->spec.n_per_group, 100);
  EXPECT_EQ(config->spec.population.group_mix, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(config->spec.population.labels, (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(config->spec.estimator.bias.kind, BiasModel::Kind::kNone);
}

TEST(ExperimentConfig, PlannerValue) {
  std::string text = kMinimal;
  text.replace(text.find("n_per_group: 100"), 16, "n_per_group: planner");
  auto config = ParseExperimentConfig(text, "t.yaml");
  ASSERT_TRUE(config.ok()) << config.status();
  EXPECT_TRUE(config->n_from_planner);
  // |A| = 2, |Y| = 4.
  EXPECT_EQ(config->spec.n_per_group, *PlannedSampleSize(config->spec.audit, true));
}

void ExpectConfigError(const std::string& text, absl::string_view needle) {
  auto config = ParseExperimentConfig(text, "bad.yaml");
  ASSERT_FALSE(config.ok()) << text;
  EXPECT_EQ(ErrorKindOf(config.status()), ErrorKind::kConfig);
  EXPECT_NE(config.status().message().find(needle), absl::string_view::npos)
      << config.status().message();
}

TEST(ExperimentConfig, UnknownKeysNameTheLine) {
  ExpectConfigError(std::string(kMinimal) + "tirals: 5\n", "bad.yaml:13: unknown key 'tirals'");
  std::string nested = kMinimal;
  nested.replace(nested.find("  alpha"), 7, "  alhpa");
  ExpectConfigError(nested, "bad.yaml:6: unknown key 'alhpa' in audit");
}

TEST(ExperimentConfig, Rejections) {
  std::string text = kMinimal;
  ExpectConfigError(text.replace(text.find("epsilon: 1.0"), 12, "epsilon: 0.05"),
                    "epsilon must exceed alpha/2");
  text = kMinimal;
  ExpectConfigError(text.replace(text.find("trials: 10"), 10, "trials: many"),
                    "bad.yaml:3: 'trials' has the wrong type");
  text = kMinimal;
  ExpectConfigError(text.replace(text.find("[x, y]"), 6, "[x]"), "");
  ExpectConfigError("audit: [\n", "bad.yaml:");
  ExpectConfigError("- 1\n- 2\n", "must be a mapping");
  ExpectConfigError(std::string(kMinimal) + "sweep: {parameter: epsilon, values: []}\n",
                    "sweep values must not be empty");
  ExpectConfigError(std::string(kMinimal) + "sweep: {parameter: gamma, values: [1]}\n", "");
  ExpectConfigError(std::string(kMinimal) + "estimator: {bias: {model: additive, per_group: [1]}}\n",
                    "");
}

TEST(ExperimentConfig, MissingFile) {
  auto config = LoadExperimentConfig(kConfigs / "no_such_file.yaml");
  EXPECT_EQ(ErrorKindOf(config.status()), ErrorKind::kConfig);
}

TEST(ServerConfig, ShippedConfigsResolveRelativePaths) {
  for (const char* name : {"serve_fair.yaml", "serve_biased.yaml"}) {
    auto config = LoadServerConfig(kConfigs / name);
    ASSERT_TRUE(config.ok()) << name << ": " << config.status();
    EXPECT_EQ(config->population_path, kConfigs / "../run/population.tsv");
    EXPECT_TRUE(config->platform.ledger_dir.is_absolute());
    EXPECT_EQ(config->platform.budget_per_auditor, 3.0);
    EXPECT_EQ(config->population_seed, 1234u);
    ASSERT_TRUE(config->generate.has_value());
    EXPECT_EQ(config->generate->size, 50000);
  }
  EXPECT_EQ(LoadServerConfig(kConfigs / "serve_biased.yaml")->listen.port, 7071);
}

TEST(ServerConfig, RejectsUnknownKeysAndBadValues) {
  const std::string base = "domain: {bins: 4}\npopulation: {path: p.tsv}\n";
  EXPECT_TRUE(ParseServerConfig(base, "s.yaml", "/tmp").ok());
  EXPECT_EQ(ParseServerConfig(base, "s.yaml", "/tmp")->population_path,
            std::filesystem::path("/tmp/p.tsv"));
  EXPECT_FALSE(ParseServerConfig(base + "port: 1\n", "s.yaml", "/tmp").ok());
  EXPECT_FALSE(ParseServerConfig(base + "budget_per_auditor: 0\n", "s.yaml", "/tmp").ok());
  EXPECT_FALSE(ParseServerConfig(base + "listen: nowhere\n", "s.yaml", "/tmp").ok());
  EXPECT_FALSE(ParseServerConfig("domain: {bins: 4}\n", "s.yaml", "/tmp").ok());
}

TEST(ServerConfig, GeneratesThenReusesThePopulation) {
  const auto dir = std::filesystem::temp_directory_path() / "ppaudit_config_test_pop";
  std::filesystem::remove_all(dir);
  const std::string text =
      "domain: {bins: 4}\n"
      "population: {path: pop.tsv, seed: 5, generate: {size: 300, groups: [a, b]}}\n";
  auto config = *ParseServerConfig(text, "s.yaml", dir);
  auto first = LoadOrGeneratePopulation(config);
  ASSERT_TRUE(first.ok()) << first.status();
  ASSERT_TRUE(std::filesystem::exists(dir / "pop.tsv"));
  auto second = LoadOrGeneratePopulation(config);
  ASSERT_TRUE(second.ok()) << second.status();
  ASSERT_EQ(first->size(), second->size());
  for (size_t i = 0; i < first->size(); ++i) {
    EXPECT_EQ(first->users()[i].user_id, second->users()[i].user_id);
    EXPECT_EQ(first->users()[i].qualified, second->users()[i].qualified);
  }
  std::filesystem::remove_all(dir);

  auto no_generate = *ParseServerConfig("domain: {bins: 4}\npopulation: {path: missing.tsv}\n",
                                        "s.yaml", dir);
  EXPECT_EQ(ErrorKindOf(LoadOrGeneratePopulation(no_generate).status()), ErrorKind::kConfig);
}

}  // namespace
}  // namespace ppaudit::config
