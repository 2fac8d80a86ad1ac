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

#include "ppaudit/sample_planner.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "ppaudit/status.hpp"

namespace ppaudit {
namespace {

// Reference values evaluated independently in double precision:
//   50 ln 8000, 200 ln 12000, 4 (ln 3 + ln 4000) / (ln 2 + ln 4000), 4 ln 3 / ln 2.
constexpr double kRawNonprivate = 449.35984103309863;
constexpr double kRawPrivate = 1878.5323857540272;
constexpr double kFactorAt4000 = 4.180463437576433;
constexpr double kUpperBound = 6.339850002884625;

TEST(NMinNonprivate, WorkedExample) {
  auto plan = NMinNonprivate(0.2, 0.05, 2, 100);
  ASSERT_TRUE(plan.ok());
  EXPECT_EQ(plan->n_min_per_group, 450);
  EXPECT_NEAR(plan->raw_bound, kRawNonprivate, 1e-9);
}

TEST(NMinNonprivate, DegenerateAlphaOne) {
  auto plan = NMinNonprivate(1.0, 0.05, 2, 1);
  ASSERT_TRUE(plan.ok());
  EXPECT_EQ(plan->n_min_per_group, 9);
  EXPECT_NEAR(plan->raw_bound, 8.764053269347762, 1e-12);
}

TEST(NMinNonprivate, HalvingAlphaQuadruplesTheBound) {
  const double wide = NMinNonprivate(0.2, 0.05, 3, 7)->raw_bound;
  const double narrow = NMinNonprivate(0.1, 0.05, 3, 7)->raw_bound;
  EXPECT_NEAR(narrow / wide, 4.0, 1e-12);
}

TEST(NMinNonprivate, RejectsOutOfRange) {
  EXPECT_EQ(ErrorKindOf(NMinNonprivate(0.0, 0.05, 2, 10).status()),
            ErrorKind::kInvalidParameter);
  EXPECT_EQ(ErrorKindOf(NMinNonprivate(0.2, 1.0, 2, 10).status()),
            ErrorKind::kInvalidParameter);
  EXPECT_EQ(ErrorKindOf(NMinNonprivate(0.2, 0.05, 1, 10).status()),
            ErrorKind::kInvalidParameter);
  EXPECT_EQ(ErrorKindOf(NMinNonprivate(0.2, 0.05, 2, 0).status()),
            ErrorKind::kInvalidParameter);
}

TEST(NMinPrivate, WorkedExample) {
  auto plan = NMinPrivate(0.2, 0.05, 1.0, 2, 100);
  ASSERT_TRUE(plan.ok());
  EXPECT_EQ(plan->n_min_per_group, 1879);
  EXPECT_NEAR(plan->raw_bound, kRawPrivate, 1e-9);
  EXPECT_NEAR(plan->factor_vs_nonprivate, 1879.0 / 450.0, 1e-15);
  EXPECT_NEAR(plan->factor_vs_nonprivate, 4.1756, 1e-4);
  EXPECT_NEAR(plan->sdp_factor, kFactorAt4000, 1e-12);
  EXPECT_DOUBLE_EQ(plan->upper_bound_factor, kUpperBound);
}

TEST(NMinPrivate, EpsilonAtOrBelowHalfAlphaIsRejected) {
  EXPECT_EQ(ErrorKindOf(NMinPrivate(0.2, 0.05, 0.09, 2, 100).status()),
            ErrorKind::kEpsilonTooSmall);
  EXPECT_EQ(ErrorKindOf(NMinPrivate(0.2, 0.05, 0.1, 2, 100).status()),
            ErrorKind::kEpsilonTooSmall);
}

TEST(NMinPrivate, IndependentOfEpsilonAboveTheThreshold) {
  const int64_t n = NMinPrivate(0.2, 0.05, 0.1000001, 4, 20)->n_min_per_group;
  for (double eps : {0.11, 0.5, 1.0, 5.0, 1e6}) {
    EXPECT_EQ(NMinPrivate(0.2, 0.05, eps, 4, 20)->n_min_per_group, n);
  }
}

TEST(SdpFactor, BoundAttainedAtPZero) {
  EXPECT_DOUBLE_EQ(SdpFactorAt(0.0), kUpperBound);
  EXPECT_DOUBLE_EQ(SdpUpperBound(), kUpperBound);
  EXPECT_NEAR(*SdpFactor(0.2, 0.05, 2, 100), kFactorAt4000, 1e-12);
}

TEST(SdpFactor, DecreasesTowardFour) {
  double previous = SdpFactorAt(0.0);
  for (double p = 0.5; p < 1e6; p *= 2) {
    const double f = SdpFactorAt(p);
    EXPECT_LT(f, previous);
    EXPECT_GT(f, 4.0);
    previous = f;
  }
  EXPECT_NEAR(SdpFactorAt(1e12), 4.0, 1e-9);
}

TEST(SdpFactor, EqualsRatioOfRawBounds) {
  for (double alpha : {0.01, 0.2, 0.5}) {
    for (double delta : {0.001, 0.05, 0.2}) {
      for (int64_t a : {2, 5, 10}) {
        for (int64_t y : {1, 10, 1000}) {
          const double ratio = NMinPrivate(alpha, delta, 1.0, a, y)->raw_bound /
                               NMinNonprivate(alpha, delta, a, y)->raw_bound;
          EXPECT_NEAR(ratio, *SdpFactor(alpha, delta, a, y), 1e-12);
        }
      }
    }
  }
}

TEST(Planner, MonotoneInEveryParameter) {
  for (auto n : {+[](double al, double de, int64_t a, int64_t y) {
                   return NMinNonprivate(al, de, a, y)->n_min_per_group;
                 },
                 +[](double al, double de, int64_t a, int64_t y) {
                   return NMinPrivate(al, de, 1.0, a, y)->n_min_per_group;
                 }}) {
    EXPECT_GE(n(0.1, 0.05, 2, 10), n(0.2, 0.05, 2, 10));
    EXPECT_GE(n(0.2, 0.01, 2, 10), n(0.2, 0.05, 2, 10));
    EXPECT_LE(n(0.2, 0.05, 2, 10), n(0.2, 0.05, 3, 10));
    EXPECT_LE(n(0.2, 0.05, 2, 10), n(0.2, 0.05, 2, 11));
  }
}

TEST(Planner, CeilingFactorTracksContinuousFactor) {
  for (double delta : {0.01, 0.05, 0.1}) {
    for (int64_t y : {2, 10, 100}) {
      auto plan = *NMinPrivate(0.2, delta, 1.0, 2, y);
      const int64_t np = NMinNonprivate(0.2, delta, 2, y)->n_min_per_group;
      EXPECT_LT(std::fabs(plan.factor_vs_nonprivate - plan.sdp_factor) / plan.sdp_factor,
                1.0 / std::min<int64_t>(np, 100));
    }
  }
}

TEST(FactorSweep, DeltaCurveStaysNearFour) {
  std::vector<double> grid;
  for (int i = 1; i <= 20; ++i) grid.push_back(i / 100.0);
  auto rows = FactorSweep(SweepParameter::kDelta, grid, PlanRequest{});
  ASSERT_TRUE(rows.ok());
  for (const auto& row : *rows) {
    EXPECT_GT(row.factor, 4.0);
    EXPECT_LT(row.factor, 4.35);
  }
}

TEST(FactorSweep, BinsCurveDecreasesAndAlphaCurveIsFlat) {
  auto bins = *FactorSweep(SweepParameter::kBins, DefaultSweepGrid(SweepParameter::kBins),
                           PlanRequest{});
  for (size_t i = 1; i < bins.size(); ++i) EXPECT_LT(bins[i].factor, bins[i - 1].factor);
  auto alpha = *FactorSweep(SweepParameter::kAlpha, DefaultSweepGrid(SweepParameter::kAlpha),
                            PlanRequest{});
  for (const auto& row : alpha) EXPECT_NEAR(row.factor, alpha.front().factor, 1e-12);
}

TEST(FactorSweep, RejectsBadGrids) {
  EXPECT_FALSE(FactorSweep(SweepParameter::kBins, {}, PlanRequest{}).ok());
  EXPECT_FALSE(FactorSweep(SweepParameter::kGroups, {2.5}, PlanRequest{}).ok());
  EXPECT_FALSE(FactorSweep(SweepParameter::kDelta, {1.5}, PlanRequest{}).ok());
}

TEST(FactorSweep, CsvLayout) {
  auto rows = *FactorSweep(SweepParameter::kGroups, {2, 3}, PlanRequest{});
  std::ostringstream out;
  WriteSweepCsv(out, rows);
  EXPECT_EQ(out.str(),
            "parameter,value,factor,n_private,n_nonprivate\n"
            "groups,2,4.180463437576433,1879,450\n"
            "groups,3,4.17267314045072,1960,470\n");
}

TEST(SweepParameter, NamesRoundTrip) {
  for (auto p : {SweepParameter::kAlpha, SweepParameter::kDelta, SweepParameter::kGroups,
                 SweepParameter::kBins}) {
    EXPECT_EQ(*ParseSweepParameter(SweepParameterName(p)), p);
  }
  EXPECT_FALSE(ParseSweepParameter("epsilon").ok());
}

}  // namespace
}  // namespace ppaudit
