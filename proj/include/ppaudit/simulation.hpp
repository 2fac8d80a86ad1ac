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

// Monte Carlo validation of the audit: empirical failure rate of the EFG test
// at a planned sample size, detection power under injected bias, and
// privacy/utility trade-off curves. Trials run in parallel on independent
// seed streams; aggregation is a deterministic reduction in trial order.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "absl/strings/string_view.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "ppaudit/audit_core.hpp"
#include "ppaudit/dp_mechanism.hpp"
#include "ppaudit/numeric_format.hpp"
#include "ppaudit/random.hpp"
#include "ppaudit/sample_planner.hpp"
#include "ppaudit/status.hpp"
#include "ppaudit/synthetic_platform.hpp"

namespace ppaudit {

struct ExperimentSpec {
  std::string name = "experiment";
  AuditSpec audit;
  EstimatorConfig estimator;
  PopulationSpec population;
  int64_t n_per_group = 0;
  int64_t trials = 0;
  uint64_t seed = 0;
  bool use_privacy = true;
  unsigned threads = 0;  // 0: hardware concurrency

  absl::Status Validate() const {
    PPAUDIT_RETURN_IF_ERROR(audit.Validate());
    PPAUDIT_RETURN_IF_ERROR(estimator.Validate(audit.attributes.size()));
    if (name.empty() || name.find_first_of(",\"\r\n") != std::string::npos) {
      return MakeError(ErrorKind::kInvalidParameter,
                       "experiment name must be non-empty and free of commas, quotes, newlines");
    }
    if (trials < 1) return MakeError(ErrorKind::kInvalidParameter, "trials must be >= 1");
    if (n_per_group < 1) {
      return MakeError(ErrorKind::kInvalidParameter, "n_per_group must be >= 1");
    }
    if (population.labels.size() != audit.attributes.size()) {
      return MakeError(ErrorKind::kInvalidParameter,
                       "population and audit must declare the same groups");
    }
    for (size_t i = 0; i < audit.attributes.size(); ++i) {
      if (population.labels[i] != audit.attributes[i].label) {
        return MakeError(ErrorKind::kInvalidParameter,
                         "population and audit must declare the same groups in order");
      }
    }
    return absl::OkStatus();
  }
};

struct EfgSummary {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

struct ExperimentResult {
  std::string name;
  int64_t trials = 0;
  int64_t n_per_group = 0;
  bool use_privacy = true;
  double true_gap = 0.0;
  bool fair_config = true;
  double flag_rate = 0.0;               // fraction of trials with EFG > alpha
  std::optional<double> failure_rate;   // fair configurations only
  std::optional<double> power;          // biased configurations only
  EfgSummary efg;
  std::chrono::duration<double> wall_clock{0};
  std::vector<std::string> warnings;
};

// Population built once per experiment; trials only read it.
struct PreparedExperiment {
  ExperimentSpec spec;
  Population population;
};

inline absl::StatusOr<PreparedExperiment> PrepareExperiment(const ExperimentSpec& spec) {
  PPAUDIT_RETURN_IF_ERROR(spec.Validate());
  PPAUDIT_ASSIGN_OR_RETURN(Population population,
                           GeneratePopulation(spec.population, DeriveSeed(spec.seed, "population")));
  return PreparedExperiment{spec, std::move(population)};
}

inline uint64_t TrialSeed(uint64_t experiment_seed, int64_t trial) {
  return DeriveSeed(experiment_seed, "trial", {static_cast<uint64_t>(trial)});
}

// The raw per-group histograms of one trial (platform side, before release).
inline absl::StatusOr<std::vector<ScoreHistogram>> ScoreTrialHistograms(
    const PreparedExperiment& experiment, uint64_t trial_seed) {
  const ExperimentSpec& spec = experiment.spec;
  std::vector<ScoreHistogram> histograms;
  for (const AttributeId& group : spec.audit.attributes) {
    const auto g = static_cast<uint64_t>(group.index);
    PPAUDIT_ASSIGN_OR_RETURN(
        auto audience, SampleAudience(experiment.population, group, /*qualified_only=*/true,
                                      spec.n_per_group, DeriveSeed(trial_seed, "audience", {g})));
    Rng score_rng(DeriveSeed(trial_seed, "score", {g}));
    PPAUDIT_ASSIGN_OR_RETURN(auto histogram,
                             ScoreAudience(spec.estimator, audience, spec.audit.domain, score_rng));
    histograms.push_back(std::move(histogram));
  }
  return histograms;
}

// sample_audience -> score_audience -> (privatize) -> evaluate, every group.
inline absl::StatusOr<FairnessReport> RunTrial(const PreparedExperiment& experiment,
                                               uint64_t trial_seed) {
  const ExperimentSpec& spec = experiment.spec;
  PPAUDIT_ASSIGN_OR_RETURN(auto histograms, ScoreTrialHistograms(experiment, trial_seed));
  if (!spec.use_privacy) return EvaluateExact(spec.audit, histograms);
  std::vector<NoisyHistogram> released;
  for (const auto& histogram : histograms) {
    PPAUDIT_ASSIGN_OR_RETURN(
        auto noiser,
        LaplaceNoiser::ForEpsilon(spec.audit.epsilon,
                                  DeriveSeed(trial_seed, "noise",
                                             {static_cast<uint64_t>(histogram.group.index)})));
    PPAUDIT_ASSIGN_OR_RETURN(auto noisy,
                             PrivatizeHistogram(histogram, spec.audit.epsilon, noiser));
    released.push_back(std::move(noisy));
  }
  return EvaluateAudit(spec.audit, released);
}

namespace internal {

// Nearest-rank percentile of sorted data.
inline double Percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<size_t>(rank, 1, sorted.size()) - 1];
}

}  // namespace internal

// Runs one trial per seed. Results depend only on the multiset of seeds.
inline absl::StatusOr<ExperimentResult> RunExperimentWithSeeds(
    const PreparedExperiment& experiment, const std::vector<uint64_t>& trial_seeds) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentSpec& spec = experiment.spec;
  const size_t count = trial_seeds.size();
  if (count == 0) return MakeError(ErrorKind::kInvalidParameter, "no trials to run");

  std::vector<double> efgs(count, 0.0);
  std::vector<char> flagged(count, 0);
  std::vector<absl::Status> errors(count);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      auto report = RunTrial(experiment, trial_seeds[i]);
      if (!report.ok()) {
        errors[i] = report.status();
        continue;
      }
      efgs[i] = report->efg;
      flagged[i] = report->passed ? 0 : 1;
    }
  };
  unsigned threads = spec.threads != 0 ? spec.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(std::min<size_t>(count, 64)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& status : errors) PPAUDIT_RETURN_IF_ERROR(status);

  ExperimentResult result;
  result.name = spec.name;
  result.trials = static_cast<int64_t>(count);
  result.n_per_group = spec.n_per_group;
  result.use_privacy = spec.use_privacy;
  result.true_gap =
      TrueFairnessGap(spec.estimator, spec.audit.attributes.size(), spec.audit.domain);
  result.fair_config = result.true_gap <= 1e-12;
  const auto hits = std::count(flagged.begin(), flagged.end(), 1);
  result.flag_rate = static_cast<double>(hits) / static_cast<double>(count);
  if (result.fair_config) {
    result.failure_rate = result.flag_rate;
  } else {
    result.power = result.flag_rate;
  }
  std::sort(efgs.begin(), efgs.end());
  result.efg.mean = std::accumulate(efgs.begin(), efgs.end(), 0.0) / static_cast<double>(count);
  result.efg.p50 = internal::Percentile(efgs, 0.50);
  result.efg.p95 = internal::Percentile(efgs, 0.95);
  if (count < 100) {
    result.warnings.push_back(absl::StrCat("InsufficientTrials: ", count,
                                           " trials give coarse rate estimates (want >= 100)"));
  }
  result.wall_clock = std::chrono::steady_clock::now() - start;
  return result;
}

inline absl::StatusOr<ExperimentResult> RunExperiment(const ExperimentSpec& spec) {
  PPAUDIT_ASSIGN_OR_RETURN(PreparedExperiment experiment, PrepareExperiment(spec));
  std::vector<uint64_t> seeds(static_cast<size_t>(spec.trials));
  for (int64_t i = 0; i < spec.trials; ++i) seeds[i] = TrialSeed(spec.seed, i);
  return RunExperimentWithSeeds(experiment, seeds);
}

inline constexpr absl::string_view kExperimentCsvHeader =
    "name,trials,n_per_group,use_privacy,true_gap,failure_rate,power,flag_rate,efg_mean,"
    "efg_p50,efg_p95";

inline void WriteExperimentCsv(std::ostream& out, const std::vector<ExperimentResult>& results) {
  out << kExperimentCsvHeader << "\n";
  auto optional = [](const std::optional<double>& v) {
    return v.has_value() ? FormatDouble(*v) : std::string();
  };
  for (const auto& r : results) {
    out << r.name << "," << r.trials << "," << r.n_per_group << ","
        << (r.use_privacy ? "true" : "false") << "," << FormatDouble(r.true_gap) << ","
        << optional(r.failure_rate) << "," << optional(r.power) << ","
        << FormatDouble(r.flag_rate) << "," << FormatDouble(r.efg.mean) << ","
        << FormatDouble(r.efg.p50) << "," << FormatDouble(r.efg.p95) << "\n";
  }
}

// Planner minimum for the spec's own parameters.
inline absl::StatusOr<int64_t> PlannedSampleSize(const AuditSpec& audit, bool use_privacy) {
  const auto groups = static_cast<int64_t>(audit.attributes.size());
  const auto bins = static_cast<int64_t>(audit.domain.size());
  absl::StatusOr<PlanResult> plan =
      use_privacy ? NMinPrivate(audit.alpha, audit.delta, audit.epsilon, groups, bins)
                  : NMinNonprivate(audit.alpha, audit.delta, groups, bins);
  if (!plan.ok()) return plan.status();
  return plan->n_min_per_group;
}

enum class TradeoffAxis { kEpsilon, kAlpha, kNPerGroup };

inline absl::string_view TradeoffAxisName(TradeoffAxis axis) {
  switch (axis) {
    case TradeoffAxis::kEpsilon: return "epsilon";
    case TradeoffAxis::kAlpha: return "alpha";
    case TradeoffAxis::kNPerGroup: return "n_per_group";
  }
  return "";
}

inline absl::StatusOr<TradeoffAxis> ParseTradeoffAxis(absl::string_view name) {
  for (auto axis : {TradeoffAxis::kEpsilon, TradeoffAxis::kAlpha, TradeoffAxis::kNPerGroup}) {
    if (TradeoffAxisName(axis) == name) return axis;
  }
  return MakeError(ErrorKind::kConfig,
                   absl::StrCat("unknown trade-off axis '", name, "' (epsilon|alpha|n_per_group)"));
}

struct TradeoffRow {
  TradeoffAxis axis;
  double value = 0.0;
  int64_t n_min = 0;
  int64_t n_per_group = 0;
  double failure_rate = 0.0;  // fraction of trials with EFG > alpha
  double mean_efg = 0.0;
};

// Pairs the planner's prediction with measured behaviour at each grid value.
// Along epsilon and alpha the audit runs at the planned n; along n_per_group
// the grid value is the sample size and n_min is the base plan.
inline absl::StatusOr<std::vector<TradeoffRow>> TradeoffCurve(TradeoffAxis axis,
                                                              const std::vector<double>& grid,
                                                              const ExperimentSpec& base) {
  if (grid.empty()) return MakeError(ErrorKind::kInvalidParameter, "empty trade-off grid");
  PPAUDIT_ASSIGN_OR_RETURN(PreparedExperiment experiment, PrepareExperiment(base));
  std::vector<TradeoffRow> rows;
  for (double value : grid) {
    ExperimentSpec& spec = experiment.spec;
    spec = base;
    if (axis == TradeoffAxis::kEpsilon) spec.audit.epsilon = value;
    if (axis == TradeoffAxis::kAlpha) spec.audit.alpha = value;
    PPAUDIT_ASSIGN_OR_RETURN(int64_t n_min, PlannedSampleSize(spec.audit, spec.use_privacy));
    if (axis == TradeoffAxis::kNPerGroup) {
      if (!(value >= 1) || value != std::floor(value)) {
        return MakeError(ErrorKind::kInvalidParameter,
                         absl::StrCat("n_per_group grid values must be positive integers, got ",
                                      value));
      }
      spec.n_per_group = static_cast<int64_t>(value);
    } else {
      spec.n_per_group = n_min;
    }
    PPAUDIT_RETURN_IF_ERROR(spec.Validate());
    std::vector<uint64_t> seeds(static_cast<size_t>(spec.trials));
    for (int64_t i = 0; i < spec.trials; ++i) seeds[i] = TrialSeed(spec.seed, i);
    PPAUDIT_ASSIGN_OR_RETURN(ExperimentResult result, RunExperimentWithSeeds(experiment, seeds));
    rows.push_back({axis, value, n_min, spec.n_per_group, result.flag_rate, result.efg.mean});
  }
  return rows;
}

inline constexpr absl::string_view kTradeoffCsvHeader =
    "parameter,value,n_min,n_per_group,failure_rate,mean_efg";

inline void WriteTradeoffCsv(std::ostream& out, const std::vector<TradeoffRow>& rows) {
  out << kTradeoffCsvHeader << "\n";
  for (const auto& r : rows) {
    out << TradeoffAxisName(r.axis) << "," << FormatDouble(r.value) << "," << r.n_min << ","
        << r.n_per_group << "," << FormatDouble(r.failure_rate) << ","
        << FormatDouble(r.mean_efg) << "\n";
  }
}

}  // namespace ppaudit
