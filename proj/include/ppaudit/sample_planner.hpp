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

// Closed-form minimum sample sizes per group for the equality-of-opportunity
// audit, with and without an epsilon-DP histogram release, and the privacy
// overhead factor between them.
//
//   non-private:  n >= (2 / alpha^2) ln(2 |A| |Y| / delta)
//   private:      n >= (8 / alpha^2) ln(3 |A| |Y| / delta),  epsilon > alpha/2
//   factor:       f(P) = 4 (ln 3 + P) / (ln 2 + P),  P = ln(|A| |Y| / delta)
//
// f is decreasing in P >= 0, so f(P) <= f(0) = 4 ln 3 / ln 2 and f -> 4.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "absl/strings/string_view.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "ppaudit/numeric_format.hpp"
#include "ppaudit/status.hpp"

namespace ppaudit {

inline double SdpUpperBound() { return 4.0 * std::log(3.0) / std::numbers::ln2; }

struct PlanRequest {
  double alpha = 0.2;
  double delta = 0.05;
  double epsilon = 1.0;
  int64_t num_attributes = 2;
  int64_t num_bins = 100;
  bool private_release = true;
};

struct PlanResult {
  int64_t n_min_per_group = 0;  // ceil(raw_bound)
  double raw_bound = 0.0;
  // Ratio of ceilinged private to non-private counts (1 for a non-private
  // plan), e.g. 1879 / 450.
  double factor_vs_nonprivate = 1.0;
  double sdp_factor = 1.0;  // continuous ratio of the raw bounds
  double upper_bound_factor = SdpUpperBound();
};

namespace internal {

inline absl::Status CheckPlanRanges(double alpha, double delta, int64_t num_attributes,
                                    int64_t num_bins) {
  // alpha = 1 is admitted as the degenerate widest tolerance.
  if (!(alpha > 0 && alpha <= 1)) {
    return MakeError(ErrorKind::kInvalidParameter,
                     absl::StrCat("alpha must lie in (0, 1], got ", alpha));
  }
  if (!(delta > 0 && delta < 1)) {
    return MakeError(ErrorKind::kInvalidParameter,
                     absl::StrCat("delta must lie in (0, 1), got ", delta));
  }
  if (num_attributes < 2) {
    return MakeError(ErrorKind::kInvalidParameter,
                     absl::StrCat("need |A| >= 2 groups, got ", num_attributes));
  }
  if (num_bins < 1) {
    return MakeError(ErrorKind::kInvalidParameter,
                     absl::StrCat("need |Y| >= 1 bins, got ", num_bins));
  }
  return absl::OkStatus();
}

inline double NonprivateRaw(double alpha, double delta, int64_t a, int64_t y) {
  return 2.0 / (alpha * alpha) *
         std::log(2.0 * static_cast<double>(a) * static_cast<double>(y) / delta);
}

inline double PrivateRaw(double alpha, double delta, int64_t a, int64_t y) {
  return 8.0 / (alpha * alpha) *
         std::log(3.0 * static_cast<double>(a) * static_cast<double>(y) / delta);
}

inline int64_t CeilCount(double raw) { return static_cast<int64_t>(std::ceil(raw)); }

}  // namespace internal

// f(P) = 4 (ln 3 + P) / (ln 2 + P) for P >= 0.
inline double SdpFactorAt(double p) {
  return 4.0 * (std::log(3.0) + p) / (std::numbers::ln2 + p);
}

inline absl::StatusOr<double> SdpFactor(double alpha, double delta, int64_t num_attributes,
                                        int64_t num_bins) {
  PPAUDIT_RETURN_IF_ERROR(internal::CheckPlanRanges(alpha, delta, num_attributes, num_bins));
  const double p = std::log(static_cast<double>(num_attributes) *
                            static_cast<double>(num_bins) / delta);
  return SdpFactorAt(p);
}

inline absl::StatusOr<PlanResult> NMinNonprivate(double alpha, double delta,
                                                 int64_t num_attributes, int64_t num_bins) {
  PPAUDIT_RETURN_IF_ERROR(internal::CheckPlanRanges(alpha, delta, num_attributes, num_bins));
  PlanResult result;
  result.raw_bound = internal::NonprivateRaw(alpha, delta, num_attributes, num_bins);
  result.n_min_per_group = internal::CeilCount(result.raw_bound);
  return result;
}

// The bound does not depend on epsilon once epsilon > alpha/2.
inline absl::StatusOr<PlanResult> NMinPrivate(double alpha, double delta, double epsilon,
                                              int64_t num_attributes, int64_t num_bins) {
  PPAUDIT_RETURN_IF_ERROR(internal::CheckPlanRanges(alpha, delta, num_attributes, num_bins));
  if (!std::isfinite(epsilon) || !(epsilon > alpha / 2)) {
    return MakeError(ErrorKind::kEpsilonTooSmall,
                     absl::StrCat("the private bound assumes epsilon > alpha/2 = ", alpha / 2,
                                  ", got epsilon = ", epsilon));
  }
  PlanResult result;
  result.raw_bound = internal::PrivateRaw(alpha, delta, num_attributes, num_bins);
  result.n_min_per_group = internal::CeilCount(result.raw_bound);
  const int64_t nonprivate =
      internal::CeilCount(internal::NonprivateRaw(alpha, delta, num_attributes, num_bins));
  result.factor_vs_nonprivate =
      static_cast<double>(result.n_min_per_group) / static_cast<double>(nonprivate);
  PPAUDIT_ASSIGN_OR_RETURN(result.sdp_factor,
                           SdpFactor(alpha, delta, num_attributes, num_bins));
  return result;
}

inline absl::StatusOr<PlanResult> Plan(const PlanRequest& request) {
  if (request.private_release) {
    return NMinPrivate(request.alpha, request.delta, request.epsilon, request.num_attributes,
                       request.num_bins);
  }
  return NMinNonprivate(request.alpha, request.delta, request.num_attributes,
                        request.num_bins);
}

enum class SweepParameter { kAlpha, kDelta, kGroups, kBins };

inline absl::string_view SweepParameterName(SweepParameter p) {
  switch (p) {
    case SweepParameter::kAlpha: return "alpha";
    case SweepParameter::kDelta: return "delta";
    case SweepParameter::kGroups: return "groups";
    case SweepParameter::kBins: return "bins";
  }
  return "";
}

inline absl::StatusOr<SweepParameter> ParseSweepParameter(absl::string_view name) {
  for (auto p : {SweepParameter::kAlpha, SweepParameter::kDelta, SweepParameter::kGroups,
                 SweepParameter::kBins}) {
    if (SweepParameterName(p) == name) return p;
  }
  return MakeError(ErrorKind::kInvalidParameter,
                   absl::StrCat("unknown sweep '", name, "' (alpha|delta|groups|bins)"));
}

// Grids spanning the ranges of the overhead-factor figure.
inline std::vector<double> DefaultSweepGrid(SweepParameter p) {
  std::vector<double> grid;
  switch (p) {
    case SweepParameter::kAlpha:
      for (int i = 1; i <= 50; ++i) grid.push_back(i / 100.0);
      break;
    case SweepParameter::kDelta:
      grid = {0.001, 0.002, 0.005};
      for (int i = 1; i <= 20; ++i) grid.push_back(i / 100.0);
      break;
    case SweepParameter::kGroups:
      for (int i = 2; i <= 10; ++i) grid.push_back(i);
      break;
    case SweepParameter::kBins:
      grid = {2, 3, 5, 10, 20, 50, 100, 200, 500, 1000};
      break;
  }
  return grid;
}

struct SweepRow {
  SweepParameter parameter;
  double value = 0.0;
  double factor = 0.0;
  int64_t n_private = 0;
  int64_t n_nonprivate = 0;
};

// One curve of the overhead figure: every grid value substituted into
// `fixed`. The factor is flat along alpha, which cancels from the ratio.
inline absl::StatusOr<std::vector<SweepRow>> FactorSweep(SweepParameter parameter,
                                                         const std::vector<double>& grid,
                                                         const PlanRequest& fixed) {
  if (grid.empty()) return MakeError(ErrorKind::kInvalidParameter, "empty sweep grid");
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double value : grid) {
    PlanRequest request = fixed;
    switch (parameter) {
      case SweepParameter::kAlpha: request.alpha = value; break;
      case SweepParameter::kDelta: request.delta = value; break;
      case SweepParameter::kGroups:
      case SweepParameter::kBins: {
        if (value != std::floor(value)) {
          return MakeError(ErrorKind::kInvalidParameter,
                           absl::StrCat(SweepParameterName(parameter),
                                        " must be an integer, got ", value));
        }
        auto count = static_cast<int64_t>(value);
        (parameter == SweepParameter::kGroups ? request.num_attributes : request.num_bins) =
            count;
        break;
      }
    }
    // The curve is defined by the bound itself, so epsilon is pinned just
    // above alpha/2 whenever the fixed value would violate the assumption.
    if (!(request.epsilon > request.alpha / 2)) request.epsilon = request.alpha;
    PPAUDIT_ASSIGN_OR_RETURN(PlanResult priv,
                             NMinPrivate(request.alpha, request.delta, request.epsilon,
                                         request.num_attributes, request.num_bins));
    PPAUDIT_ASSIGN_OR_RETURN(PlanResult nonpriv,
                             NMinNonprivate(request.alpha, request.delta,
                                            request.num_attributes, request.num_bins));
    rows.push_back({parameter, value, priv.sdp_factor, priv.n_min_per_group,
                    nonpriv.n_min_per_group});
  }
  return rows;
}

inline constexpr absl::string_view kSweepCsvHeader =
    "parameter,value,factor,n_private,n_nonprivate";

inline void WriteSweepCsv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSweepCsvHeader << "\n";
  for (const auto& row : rows) {
    out << SweepParameterName(row.parameter) << "," << FormatDouble(row.value) << ","
        << FormatDouble(row.factor) << "," << row.n_private << "," << row.n_nonprivate << "\n";
  }
}

}  // namespace ppaudit
