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

#include "ppaudit/audit_core.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "ppaudit/status.hpp"

namespace ppaudit {
namespace {

using ::testing::DoubleNear;
using ::testing::ElementsAre;
using ::testing::Pointwise;

AttributeId A(int i) { return {i == 0 ? "a1" : i == 1 ? "a2" : "a" + std::to_string(i + 1), i}; }

GroupDistribution Dist(int i, std::vector<double> p, int64_t n = 100) {
  return {A(i), std::move(p), n};
}

ScoreDomain Bins(int n) { return *ScoreDomain::Discrete(n); }

AuditSpec TwoGroupSpec(double alpha, int bins) {
  AuditSpec spec;
  spec.alpha = alpha;
  spec.delta = 0.05;
  spec.epsilon = 1.0;
  spec.attributes = *MakeAttributes({"a1", "a2"});
  spec.domain = Bins(bins);
  return spec;
}

TEST(EmpiricalDistribution, DividesCountsByN) {
  auto p = EmpiricalDistribution(ScoreHistogram::FromCounts(A(0), {30, 70}));
  ASSERT_TRUE(p.ok());
  EXPECT_THAT(*p, ElementsAre(0.3, 0.7));
}

TEST(EmpiricalDistribution, AllMassInOneBin) {
  auto p = EmpiricalDistribution(ScoreHistogram::FromCounts(A(0), {0, 0, 5}));
  ASSERT_TRUE(p.ok());
  EXPECT_THAT(*p, ElementsAre(0.0, 0.0, 1.0));
}

TEST(EmpiricalDistribution, EmptyGroupIsAnError) {
  auto p = EmpiricalDistribution(ScoreHistogram::FromCounts(A(0), {0, 0}));
  EXPECT_EQ(ErrorKindOf(p.status()), ErrorKind::kZeroQualifiedGroup);
}

TEST(EmpiricalDistribution, SumsToOne) {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<int64_t> counts(1 + gen() % 20);
    for (auto& c : counts) c = static_cast<int64_t>(gen() % 1000);
    counts[0] += 1;
    auto p = *EmpiricalDistribution(ScoreHistogram::FromCounts(A(0), counts));
    double sum = 0;
    for (double x : p) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-15 * counts.size());
  }
}

TEST(NoisyDistribution, DividesByDeclaredN) {
  auto p = NoisyDistribution({A(0), {29.2, 71.1}, 100, 1.0});
  ASSERT_TRUE(p.ok());
  EXPECT_THAT(*p, Pointwise(DoubleNear(1e-15), std::vector<double>{0.292, 0.711}));
}

TEST(NoisyDistribution, NegativeCountsPassThrough) {
  auto p = NoisyDistribution({A(0), {-1.5, 101.5}, 100, 1.0});
  ASSERT_TRUE(p.ok());
  EXPECT_THAT(*p, ElementsAre(-0.015, 1.015));
}

TEST(NoisyDistribution, ZeroNoiseMatchesEmpirical) {
  auto exact = *EmpiricalDistribution(ScoreHistogram::FromCounts(A(0), {3, 9, 12}));
  auto noisy = *NoisyDistribution({A(0), {3, 9, 12}, 24, 1.0});
  EXPECT_EQ(exact, noisy);
}

TEST(NoisyDistribution, ZeroDeclaredIsAnError) {
  EXPECT_EQ(ErrorKindOf(NoisyDistribution({A(0), {1, 2}, 0, 1.0}).status()),
            ErrorKind::kZeroQualifiedGroup);
}

TEST(Efg, TwoGroupExample) {
  auto r = Efg({Dist(0, {0.3, 0.7}), Dist(1, {0.5, 0.5})}, Bins(2), 0.2);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r->efg, 0.2, 1e-15);
  EXPECT_TRUE(r->passed);
  EXPECT_EQ(r->argmax, (GapLocation{0, 1, 0}));  // tie between bins broken low
  EXPECT_EQ(r->per_group_n.at("a1"), 100);
}

TEST(Efg, IdenticalGroupsGiveZero) {
  auto r = Efg({Dist(0, {0.1, 0.9}), Dist(1, {0.1, 0.9}), Dist(2, {0.1, 0.9})}, Bins(2), 0.0);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->efg, 0.0);
  EXPECT_TRUE(r->passed);
}

TEST(Efg, DisjointGroupsGiveOne) {
  auto r = Efg({Dist(0, {1, 0}), Dist(1, {0, 1})}, Bins(2), 0.5);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->efg, 1.0);
  EXPECT_EQ(r->argmax.bin, 0u);
  EXPECT_FALSE(r->passed);
}

TEST(Efg, ShapeErrors) {
  EXPECT_EQ(ErrorKindOf(Efg({Dist(0, {0.5, 0.5})}, Bins(2), 0.1).status()),
            ErrorKind::kTooFewGroups);
  EXPECT_EQ(ErrorKindOf(Efg({Dist(0, {0.5, 0.5}), Dist(1, {1.0})}, Bins(2), 0.1).status()),
            ErrorKind::kGroupCountMismatch);
}

TEST(Efg, ArgmaxTieBreaksOnLowestPair) {
  // Every pair touching group 1 reaches 0.5 in both bins; (0,1) at bin 0 wins.
  auto r = Efg({Dist(0, {0.25, 0.75}), Dist(1, {0.75, 0.25}), Dist(2, {0.25, 0.75})}, Bins(2),
               0.1);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->argmax, (GapLocation{0, 1, 0}));
}

TEST(Efg, PermutationInvariantAndLipschitz) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 200; ++rep) {
    const int groups = 2 + static_cast<int>(gen() % 3);
    const int bins = 1 + static_cast<int>(gen() % 6);
    std::vector<GroupDistribution> g;
    for (int i = 0; i < groups; ++i) {
      std::vector<double> p(bins);
      double s = 0;
      for (auto& x : p) s += (x = u(gen));
      for (auto& x : p) x /= s;
      g.push_back(Dist(i, p));
    }
    const double base = Efg(g, Bins(bins), 0.2)->efg;
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, 1.0);
    auto shuffled = g;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    EXPECT_EQ(Efg(shuffled, Bins(bins), 0.2)->efg, base);

    const double eta = 0.05 * u(gen);
    auto perturbed = g;
    for (auto& x : perturbed[0].probabilities) x += (u(gen) * 2 - 1) * eta;
    EXPECT_LE(std::fabs(Efg(perturbed, Bins(bins), 0.2)->efg - base), eta + 1e-15);

    const double cdf = EfgCdf(g, Bins(bins), 0.2)->efg;
    EXPECT_LE(cdf, (bins - 1) * base + 1e-12);
  }
}

TEST(EfgCdf, IdenticalGroupsGiveZero) {
  EXPECT_EQ(EfgCdf({Dist(0, {0.5, 0.5}), Dist(1, {0.5, 0.5})}, Bins(2), 0.1)->efg, 0.0);
}

TEST(EfgCdf, ComparesInteriorThresholdsOnly) {
  EXPECT_THAT(ComplementaryCdf({0.3, 0.7}), ElementsAre(0.7));
  auto r = EfgCdf({Dist(0, {0.3, 0.7}), Dist(1, {0.5, 0.5})}, Bins(2), 0.25);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r->efg, 0.2, 1e-15);
  EXPECT_EQ(r->statistic, FairnessReport::Statistic::kComplementaryCdf);
}

TEST(EfgCdf, SingleBinDomainIsAlwaysZero) {
  EXPECT_EQ(EfgCdf({Dist(0, {1.0}), Dist(1, {1.0})}, Bins(1), 0.1)->efg, 0.0);
}

TEST(EvaluateAudit, ZeroNoiseComposition) {
  AuditSpec spec = TwoGroupSpec(0.25, 2);
  std::vector<NoisyHistogram> noisy = {{A(0), {30, 70}, 100, 1.0}, {A(1), {50, 50}, 100, 1.0}};
  auto r = EvaluateAudit(spec, noisy);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r->efg, 0.2, 1e-15);
  EXPECT_TRUE(r->passed);
  EXPECT_EQ(r->mode, FairnessReport::Mode::kNoisy);

  spec.alpha = 0.19;
  EXPECT_FALSE(EvaluateAudit(spec, noisy)->passed);
}

TEST(EvaluateAudit, OrderOfHistogramsDoesNotMatter) {
  AuditSpec spec = TwoGroupSpec(0.25, 2);
  auto forward = EvaluateAudit(spec, {{A(0), {30, 70}, 100, 1.0}, {A(1), {50, 50}, 100, 1.0}});
  auto backward = EvaluateAudit(spec, {{A(1), {50, 50}, 100, 1.0}, {A(0), {30, 70}, 100, 1.0}});
  EXPECT_EQ(forward->efg, backward->efg);
  EXPECT_EQ(forward->argmax, backward->argmax);
}

TEST(EvaluateAudit, MissingOrDuplicatedGroupIsRejected) {
  AuditSpec spec = TwoGroupSpec(0.25, 2);
  EXPECT_EQ(ErrorKindOf(EvaluateAudit(spec, {{A(0), {30, 70}, 100, 1.0}}).status()),
            ErrorKind::kTooFewGroups);
  EXPECT_EQ(ErrorKindOf(EvaluateAudit(spec, {{A(0), {30, 70}, 100, 1.0},
                                             {A(0), {30, 70}, 100, 1.0}})
                            .status()),
            ErrorKind::kGroupCountMismatch);
}

TEST(EvaluateAudit, ContinuousDomainUsesComplementaryCdf) {
  AuditSpec spec = TwoGroupSpec(0.25, 2);
  spec.domain = *ScoreDomain::Continuous({0.0, 0.5, 1.0});
  auto r = EvaluateAudit(spec, {{A(0), {30, 70}, 100, 1.0}, {A(1), {50, 50}, 100, 1.0}});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->statistic, FairnessReport::Statistic::kComplementaryCdf);
}

TEST(EvaluateExact, MatchesNoisyModeWithoutNoise) {
  AuditSpec spec = TwoGroupSpec(0.25, 3);
  auto exact = EvaluateExact(spec, {ScoreHistogram::FromCounts(A(0), {1, 2, 3}),
                                    ScoreHistogram::FromCounts(A(1), {3, 2, 1})});
  auto noisy = EvaluateAudit(spec, {{A(0), {1, 2, 3}, 6, 1.0}, {A(1), {3, 2, 1}, 6, 1.0}});
  EXPECT_EQ(exact->efg, noisy->efg);
  EXPECT_EQ(exact->mode, FairnessReport::Mode::kExact);
}

TEST(AuditSpec, Validation) {
  AuditSpec spec = TwoGroupSpec(0.2, 10);
  EXPECT_TRUE(spec.Validate().ok());
  spec.epsilon = 0;
  EXPECT_EQ(ErrorKindOf(spec.Validate()), ErrorKind::kInvalidEpsilon);
  spec.epsilon = 0.1;
  EXPECT_EQ(ErrorKindOf(spec.Validate()), ErrorKind::kEpsilonTooSmall);
  spec.epsilon = 1;
  spec.attributes.pop_back();
  EXPECT_EQ(ErrorKindOf(spec.Validate()), ErrorKind::kTooFewGroups);
}

TEST(ScoreDomain, BinningClipsAtTheEnds) {
  auto d = *ScoreDomain::EqualWidth(0.0, 1.0, 4);
  EXPECT_EQ(d.BinOf(-3.0), 0u);
  EXPECT_EQ(d.BinOf(0.3), 1u);
  EXPECT_EQ(d.BinOf(0.5), 2u);
  EXPECT_EQ(d.BinOf(1.0), 3u);
  EXPECT_EQ(d.BinOf(7.0), 3u);
  EXPECT_FALSE(ScoreDomain::Continuous({0.0, 0.0, 1.0}).ok());
  EXPECT_FALSE(ScoreDomain::Discrete(0).ok());
}

}  // namespace
}  // namespace ppaudit
