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

// Auditor-side fairness mathematics: per-group score distributions, the
// empirical fairness gap (EFG) under equality of opportunity, and the
// alpha-fairness decision. Every histogram handled here is already
// conditioned on qualification: the auditor uploads qualified users only.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "ppaudit/status.hpp"

namespace ppaudit {

struct AttributeId {
  std::string label;
  int index = 0;

  friend bool operator==(const AttributeId&, const AttributeId&) = default;
};

// Builds dense attribute ids 0..n-1 from unique labels.
inline absl::StatusOr<std::vector<AttributeId>> MakeAttributes(
    const std::vector<std::string>& labels) {
  std::vector<AttributeId> out;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) {
      return MakeError(ErrorKind::kInvalidParameter, "empty attribute label");
    }
    for (size_t j = 0; j < i; ++j) {
      if (labels[j] == labels[i]) {
        return MakeError(ErrorKind::kInvalidParameter,
                         absl::StrCat("duplicate attribute label '", labels[i], "'"));
      }
    }
    out.push_back({labels[i], static_cast<int>(i)});
  }
  return out;
}

// The set Y of relevance scores. A discrete domain is |Y| labelled bins that
// partition the estimator's unit score range evenly; a continuous domain is
// an ordered list of edges and scores are binned against them.
class ScoreDomain {
 public:
  enum class Kind { kDiscrete, kContinuous };

  ScoreDomain() : ScoreDomain(Kind::kDiscrete, {"1"}, {0.0, 1.0}) {}

  static absl::StatusOr<ScoreDomain> Discrete(int num_bins) {
    if (num_bins < 1) {
      return MakeError(ErrorKind::kInvalidParameter, "score domain needs |Y| >= 1");
    }
    std::vector<std::string> labels;
    for (int i = 1; i <= num_bins; ++i) labels.push_back(std::to_string(i));
    return Discrete(std::move(labels));
  }

  static absl::StatusOr<ScoreDomain> Discrete(std::vector<std::string> labels) {
    if (labels.empty()) {
      return MakeError(ErrorKind::kInvalidParameter, "score domain needs |Y| >= 1");
    }
    std::vector<double> edges(labels.size() + 1);
    for (size_t k = 0; k < edges.size(); ++k) {
      edges[k] = static_cast<double>(k) / static_cast<double>(labels.size());
    }
    return ScoreDomain(Kind::kDiscrete, std::move(labels), std::move(edges));
  }

  static absl::StatusOr<ScoreDomain> Continuous(std::vector<double> edges) {
    if (edges.size() < 2) {
      return MakeError(ErrorKind::kInvalidParameter,
                       "continuous domain needs at least two edges");
    }
    for (size_t k = 0; k < edges.size(); ++k) {
      if (!std::isfinite(edges[k])) {
        return MakeError(ErrorKind::kInvalidParameter, "bin edges must be finite");
      }
      if (k > 0 && !(edges[k] > edges[k - 1])) {
        return MakeError(ErrorKind::kInvalidParameter,
                         "bin edges must be strictly increasing");
      }
    }
    std::vector<std::string> labels;
    for (size_t k = 0; k + 1 < edges.size(); ++k) {
      labels.push_back(absl::StrCat("[", edges[k], ",", edges[k + 1], ")"));
    }
    return ScoreDomain(Kind::kContinuous, std::move(labels), std::move(edges));
  }

  // Equal-width continuous bins over [lo, hi].
  static absl::StatusOr<ScoreDomain> EqualWidth(double lo, double hi, int num_bins) {
    if (num_bins < 1 || !(hi > lo)) {
      return MakeError(ErrorKind::kInvalidParameter,
                       "equal-width domain needs hi > lo and |Y| >= 1");
    }
    std::vector<double> edges(num_bins + 1);
    for (int k = 0; k <= num_bins; ++k) {
      edges[k] = lo + (hi - lo) * static_cast<double>(k) / num_bins;
    }
    edges.back() = hi;
    return Continuous(std::move(edges));
  }

  Kind kind() const { return kind_; }
  size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<double>& edges() const { return edges_; }
  double lower() const { return edges_.front(); }
  double upper() const { return edges_.back(); }

  // Bin of a score value; values outside the range clip to the end bins.
  size_t BinOf(double value) const {
    auto it = std::upper_bound(edges_.begin() + 1, edges_.end() - 1, value);
    return static_cast<size_t>(it - (edges_.begin() + 1));
  }

  // Edge k rescaled onto [0, 1].
  double UnitEdge(size_t k) const {
    if (k == 0) return 0.0;
    if (k + 1 >= edges_.size()) return 1.0;
    return (edges_[k] - lower()) / (upper() - lower());
  }

 private:
  ScoreDomain(Kind kind, std::vector<std::string> labels, std::vector<double> edges)
      : kind_(kind), labels_(std::move(labels)), edges_(std::move(edges)) {}

  Kind kind_;
  std::vector<std::string> labels_;
  std::vector<double> edges_;
};

// The auditor's knobs.
struct AuditSpec {
  double alpha = 0.2;
  double delta = 0.05;
  double epsilon = 1.0;
  std::vector<AttributeId> attributes;
  ScoreDomain domain;

  absl::Status Validate() const {
    if (!(alpha > 0 && alpha < 1)) {
      return MakeError(ErrorKind::kInvalidParameter, "alpha must lie in (0, 1)");
    }
    if (!(delta > 0 && delta < 1)) {
      return MakeError(ErrorKind::kInvalidParameter, "delta must lie in (0, 1)");
    }
    if (!(epsilon > 0) || !std::isfinite(epsilon)) {
      return MakeError(ErrorKind::kInvalidEpsilon, "epsilon must be positive");
    }
    if (!(epsilon > alpha / 2)) {
      return MakeError(ErrorKind::kEpsilonTooSmall,
                       absl::StrCat("epsilon must exceed alpha/2 = ", alpha / 2));
    }
    if (attributes.size() < 2) {
      return MakeError(ErrorKind::kTooFewGroups, "an audit needs |A| >= 2");
    }
    for (size_t i = 0; i < attributes.size(); ++i) {
      if (attributes[i].index != static_cast<int>(i)) {
        return MakeError(ErrorKind::kInvalidParameter,
                         "attribute indices must be dense 0..|A|-1");
      }
    }
    return absl::OkStatus();
  }
};

struct ScoreHistogram {
  AttributeId group;
  std::vector<int64_t> counts;
  int64_t n = 0;

  static ScoreHistogram FromCounts(AttributeId group, std::vector<int64_t> counts) {
    int64_t total = std::accumulate(counts.begin(), counts.end(), int64_t{0});
    return {std::move(group), std::move(counts), total};
  }
};

struct NoisyHistogram {
  AttributeId group;
  std::vector<double> noisy_counts;  // may be negative; never clamped
  int64_t n_declared = 0;
  double epsilon_spent = 0.0;
};

// Per-group probability vector over Y with its sample count n_{a,q}.
struct GroupDistribution {
  AttributeId group;
  std::vector<double> probabilities;
  int64_t n = 0;
};

struct GapLocation {
  size_t group1 = 0;
  size_t group2 = 0;
  size_t bin = 0;

  friend bool operator==(const GapLocation&, const GapLocation&) = default;
};

struct FairnessReport {
  enum class Mode { kExact, kNoisy };
  enum class Statistic { kBins, kComplementaryCdf };

  double efg = 0.0;
  double alpha = 0.0;
  GapLocation argmax;
  bool passed = true;
  Mode mode = Mode::kExact;
  Statistic statistic = Statistic::kBins;
  std::vector<std::string> group_labels;
  std::map<std::string, int64_t> per_group_n;
};

inline absl::StatusOr<std::vector<double>> EmpiricalDistribution(
    const ScoreHistogram& histogram) {
  if (histogram.n <= 0) {
    return MakeError(ErrorKind::kZeroQualifiedGroup,
                     absl::StrCat("group '", histogram.group.label,
                                  "' has no qualified members"));
  }
  std::vector<double> out(histogram.counts.size());
  const double n = static_cast<double>(histogram.n);
  for (size_t y = 0; y < out.size(); ++y) {
    out[y] = static_cast<double>(histogram.counts[y]) / n;
  }
  return out;
}

// P* = noisy count / n_{a,q}. No renormalization: the estimator stays the
// plain P-bar + r/n whose error the sample planner bounds.
inline absl::StatusOr<std::vector<double>> NoisyDistribution(
    const NoisyHistogram& histogram) {
  if (histogram.n_declared <= 0) {
    return MakeError(ErrorKind::kZeroQualifiedGroup,
                     absl::StrCat("group '", histogram.group.label,
                                  "' declares zero qualified members"));
  }
  std::vector<double> out(histogram.noisy_counts.size());
  const double n = static_cast<double>(histogram.n_declared);
  for (size_t y = 0; y < out.size(); ++y) out[y] = histogram.noisy_counts[y] / n;
  return out;
}

namespace internal {

// max over pairs i < j and bins y of |v_i[y] - v_j[y]|, lexicographic ties.
template <typename Vectors>
std::pair<double, GapLocation> MaxPairwiseGap(const Vectors& vectors) {
  double best = 0.0;
  GapLocation where;
  for (size_t i = 0; i < vectors.size(); ++i) {
    for (size_t j = i + 1; j < vectors.size(); ++j) {
      for (size_t y = 0; y < vectors[i].size(); ++y) {
        double gap = std::fabs(vectors[i][y] - vectors[j][y]);
        if (gap > best) {
          best = gap;
          where = {i, j, y};
        }
      }
    }
  }
  return {best, where};
}

inline absl::Status CheckShapes(const std::vector<GroupDistribution>& groups,
                                const ScoreDomain& domain) {
  if (groups.size() < 2) {
    return MakeError(ErrorKind::kTooFewGroups,
                     absl::StrCat("need at least 2 groups, got ", groups.size()));
  }
  for (const auto& g : groups) {
    if (g.probabilities.size() != domain.size()) {
      return MakeError(ErrorKind::kGroupCountMismatch,
                       absl::StrCat("group '", g.group.label, "' has ",
                                    g.probabilities.size(), " bins, domain has ",
                                    domain.size()));
    }
  }
  return absl::OkStatus();
}

inline FairnessReport MakeReport(const std::vector<GroupDistribution>& groups,
                                 double efg, GapLocation where, double alpha,
                                 FairnessReport::Statistic statistic) {
  FairnessReport report;
  report.efg = efg;
  report.alpha = alpha;
  report.argmax = where;
  report.passed = efg <= alpha;
  report.statistic = statistic;
  for (const auto& g : groups) {
    report.group_labels.push_back(g.group.label);
    report.per_group_n[g.group.label] = g.n;
  }
  return report;
}

}  // namespace internal

// EFG = max_{a1,a2,y} |P_{a1,y} - P_{a2,y}|; passed iff EFG <= alpha.
inline absl::StatusOr<FairnessReport> Efg(const std::vector<GroupDistribution>& groups,
                                          const ScoreDomain& domain, double alpha) {
  PPAUDIT_RETURN_IF_ERROR(internal::CheckShapes(groups, domain));
  struct View {
    const std::vector<GroupDistribution>& g;
    size_t size() const { return g.size(); }
    const std::vector<double>& operator[](size_t i) const { return g[i].probabilities; }
  };
  auto [gap, where] = internal::MaxPairwiseGap(View{groups});
  return internal::MakeReport(groups, gap, where, alpha,
                              FairnessReport::Statistic::kBins);
}

// Complementary CDF Q_{a,y} = sum_{y' > y} P_{a,y'} at each interior
// threshold y = 0..|Y|-2.
inline std::vector<double> ComplementaryCdf(const std::vector<double>& probabilities) {
  if (probabilities.size() < 2) return {};
  std::vector<double> out(probabilities.size() - 1);
  double tail = 0.0;
  for (size_t y = probabilities.size() - 1; y >= 1; --y) {
    tail += probabilities[y];
    out[y - 1] = tail;
  }
  return out;
}

// Max gap between complementary CDFs; argmax.bin is the threshold index.
inline absl::StatusOr<FairnessReport> EfgCdf(const std::vector<GroupDistribution>& groups,
                                             const ScoreDomain& domain, double alpha) {
  PPAUDIT_RETURN_IF_ERROR(internal::CheckShapes(groups, domain));
  std::vector<std::vector<double>> tails;
  tails.reserve(groups.size());
  for (const auto& g : groups) tails.push_back(ComplementaryCdf(g.probabilities));
  auto [gap, where] = internal::MaxPairwiseGap(tails);
  return internal::MakeReport(groups, gap, where, alpha,
                              FairnessReport::Statistic::kComplementaryCdf);
}

namespace internal {

template <typename Histogram>
absl::StatusOr<std::vector<const Histogram*>> OrderByAttribute(
    const AuditSpec& spec, const std::vector<Histogram>& histograms) {
  PPAUDIT_RETURN_IF_ERROR(spec.Validate());
  if (histograms.size() < 2) {
    return MakeError(ErrorKind::kTooFewGroups,
                     absl::StrCat("need at least 2 group histograms, got ",
                                  histograms.size()));
  }
  if (histograms.size() != spec.attributes.size()) {
    return MakeError(ErrorKind::kGroupCountMismatch,
                     absl::StrCat("expected one histogram per attribute (",
                                  spec.attributes.size(), "), got ",
                                  histograms.size()));
  }
  std::vector<const Histogram*> ordered(spec.attributes.size(), nullptr);
  for (const auto& h : histograms) {
    auto it = std::find(spec.attributes.begin(), spec.attributes.end(), h.group);
    if (it == spec.attributes.end()) {
      return MakeError(ErrorKind::kGroupCountMismatch,
                       absl::StrCat("histogram for unknown group '", h.group.label, "'"));
    }
    auto& slot = ordered[it - spec.attributes.begin()];
    if (slot != nullptr) {
      return MakeError(ErrorKind::kGroupCountMismatch,
                       absl::StrCat("two histograms for group '", h.group.label, "'"));
    }
    slot = &h;
  }
  return ordered;
}

inline absl::StatusOr<FairnessReport> Decide(const AuditSpec& spec,
                                             const std::vector<GroupDistribution>& groups,
                                             FairnessReport::Mode mode) {
  absl::StatusOr<FairnessReport> report =
      spec.domain.kind() == ScoreDomain::Kind::kContinuous
          ? EfgCdf(groups, spec.domain, spec.alpha)
          : Efg(groups, spec.domain, spec.alpha);
  if (report.ok()) report->mode = mode;
  return report;
}

}  // namespace internal

// Step 4 of the audit: noisy distributions per group, then the EFG test
// (complementary-CDF form for continuous domains). Whether each n_declared
// reaches the planner minimum is reported by the caller, not enforced here.
inline absl::StatusOr<FairnessReport> EvaluateAudit(
    const AuditSpec& spec, const std::vector<NoisyHistogram>& noisy) {
  PPAUDIT_ASSIGN_OR_RETURN(auto ordered, internal::OrderByAttribute(spec, noisy));
  std::vector<GroupDistribution> groups;
  for (const NoisyHistogram* h : ordered) {
    PPAUDIT_ASSIGN_OR_RETURN(auto probabilities, NoisyDistribution(*h));
    groups.push_back({h->group, std::move(probabilities), h->n_declared});
  }
  return internal::Decide(spec, groups, FairnessReport::Mode::kNoisy);
}

// Non-private counterpart over raw histograms.
inline absl::StatusOr<FairnessReport> EvaluateExact(
    const AuditSpec& spec, const std::vector<ScoreHistogram>& histograms) {
  PPAUDIT_ASSIGN_OR_RETURN(auto ordered, internal::OrderByAttribute(spec, histograms));
  std::vector<GroupDistribution> groups;
  for (const ScoreHistogram* h : ordered) {
    PPAUDIT_ASSIGN_OR_RETURN(auto probabilities, EmpiricalDistribution(*h));
    groups.push_back({h->group, std::move(probabilities), h->n});
  }
  return internal::Decide(spec, groups, FairnessReport::Mode::kExact);
}

}  // namespace ppaudit
