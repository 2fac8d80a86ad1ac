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

// Desk-scale stand-in for the platform: a seeded synthetic population, a
// relevance estimator with pluggable per-group bias, audience sampling and
// the score -> histogram step that precedes privatization.
//
// Estimator internals. Each user carries a latent trait z ~ N(0, 1). Scoring
// draws fresh noise e ~ N(0, score_noise_sd^2) and maps
//   u = sigmoid(location + spread * (z + e))
// onto the domain's score range, then bins it. That bin is the unbiased score
// T(x). The bias model then acts on the bin index:
//   additive         R = T + b_a
//   multiplicative   R + 1 = (T + 1) * b_a       (scores counted from 1)
//   random additive  R = T + B_a,  B_a a discrete random variable
// each rounded to the nearest bin and clipped to the end bins.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "absl/strings/string_view.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "ppaudit/audit_core.hpp"
#include "ppaudit/numeric_format.hpp"
#include "ppaudit/random.hpp"
#include "ppaudit/status.hpp"

namespace ppaudit {

struct UserRecord {
  std::string user_id;
  AttributeId attribute;
  bool qualified = false;
  double latent_trait = 0.0;
};

// Discrete distribution of a random bias offset (in bins).
struct DiscreteOffsets {
  std::vector<double> values;
  std::vector<double> probabilities;

  double Mean() const {
    double m = 0;
    for (size_t i = 0; i < values.size(); ++i) m += values[i] * probabilities[i];
    return m;
  }
};

struct BiasModel {
  enum class Kind { kNone, kAdditive, kMultiplicative, kRandomAdditive };

  Kind kind = Kind::kNone;
  // Additive shift in bins or multiplier, indexed by attribute index.
  std::vector<double> per_group;
  // Offset distribution per attribute index (kRandomAdditive only).
  std::vector<DiscreteOffsets> random_per_group;
};

inline absl::string_view BiasKindName(BiasModel::Kind kind) {
  switch (kind) {
    case BiasModel::Kind::kNone: return "none";
    case BiasModel::Kind::kAdditive: return "additive";
    case BiasModel::Kind::kMultiplicative: return "multiplicative";
    case BiasModel::Kind::kRandomAdditive: return "random_additive";
  }
  return "";
}

inline absl::StatusOr<BiasModel::Kind> ParseBiasKind(absl::string_view name) {
  for (auto kind : {BiasModel::Kind::kNone, BiasModel::Kind::kAdditive,
                    BiasModel::Kind::kMultiplicative, BiasModel::Kind::kRandomAdditive}) {
    if (BiasKindName(kind) == name) return kind;
  }
  return MakeError(ErrorKind::kConfig, absl::StrCat("unknown bias model '", name, "'"));
}

struct EstimatorConfig {
  double location = 0.0;
  double spread = 1.0;
  double score_noise_sd = 1.0;
  BiasModel bias;

  absl::Status Validate(size_t num_groups) const {
    if (!std::isfinite(location) || !(spread > 0) || !std::isfinite(spread) ||
        !(score_noise_sd >= 0) || !std::isfinite(score_noise_sd)) {
      return MakeError(ErrorKind::kInvalidParameter,
                       "estimator needs finite location, spread > 0, noise sd >= 0");
    }
    switch (bias.kind) {
      case BiasModel::Kind::kNone:
        return absl::OkStatus();
      case BiasModel::Kind::kAdditive:
      case BiasModel::Kind::kMultiplicative:
        if (bias.per_group.size() != num_groups) {
          return MakeError(ErrorKind::kInvalidParameter,
                           absl::StrCat("bias needs one parameter per group (", num_groups,
                                        "), got ", bias.per_group.size()));
        }
        for (double b : bias.per_group) {
          if (!std::isfinite(b)) {
            return MakeError(ErrorKind::kInvalidParameter, "bias parameters must be finite");
          }
          if (bias.kind == BiasModel::Kind::kMultiplicative && !(b > 0)) {
            return MakeError(ErrorKind::kInvalidParameter, "multiplicative bias must be > 0");
          }
        }
        return absl::OkStatus();
      case BiasModel::Kind::kRandomAdditive:
        if (bias.random_per_group.size() != num_groups) {
          return MakeError(ErrorKind::kInvalidParameter,
                           "random bias needs one offset distribution per group");
        }
        for (const auto& d : bias.random_per_group) {
          if (d.values.empty() || d.values.size() != d.probabilities.size()) {
            return MakeError(ErrorKind::kInvalidParameter,
                             "offset distribution needs matching values and probabilities");
          }
          double total = 0;
          for (size_t i = 0; i < d.values.size(); ++i) {
            if (!std::isfinite(d.values[i]) || !(d.probabilities[i] >= 0)) {
              return MakeError(ErrorKind::kInvalidParameter, "invalid offset distribution");
            }
            total += d.probabilities[i];
          }
          if (std::fabs(total - 1.0) > 1e-9) {
            return MakeError(ErrorKind::kInvalidParameter,
                             "offset probabilities must sum to 1");
          }
        }
        return absl::OkStatus();
    }
    return absl::OkStatus();
  }
};

// ---------------------------------------------------------------------------
// Population

class Population {
 public:
  Population() = default;
  Population(std::vector<AttributeId> attributes, std::vector<UserRecord> users, uint64_t seed)
      : attributes_(std::move(attributes)), users_(std::move(users)), seed_(seed) {
    Index();
  }

  const std::vector<AttributeId>& attributes() const { return attributes_; }
  const std::vector<UserRecord>& users() const { return users_; }
  uint64_t seed() const { return seed_; }
  size_t size() const { return users_.size(); }

  // Indices of users in `group`, all of them or only the qualified ones.
  const std::vector<uint32_t>& Stratum(int group, bool qualified_only) const {
    static const std::vector<uint32_t> kEmpty;
    if (group < 0 || static_cast<size_t>(group) >= attributes_.size()) return kEmpty;
    return qualified_only ? qualified_[group] : members_[group];
  }

  const UserRecord* Find(absl::string_view user_id) const {
    auto it = by_id_.find(std::string(user_id));
    return it == by_id_.end() ? nullptr : &users_[it->second];
  }

 private:
  void Index() {
    members_.assign(attributes_.size(), {});
    qualified_.assign(attributes_.size(), {});
    by_id_.reserve(users_.size());
    for (uint32_t i = 0; i < users_.size(); ++i) {
      const auto& u = users_[i];
      members_[u.attribute.index].push_back(i);
      if (u.qualified) qualified_[u.attribute.index].push_back(i);
      by_id_.emplace(u.user_id, i);
    }
  }

  std::vector<AttributeId> attributes_;
  std::vector<UserRecord> users_;
  uint64_t seed_ = 0;
  std::vector<std::vector<uint32_t>> members_;
  std::vector<std::vector<uint32_t>> qualified_;
  std::unordered_map<std::string, uint32_t> by_id_;
};

struct PopulationSpec {
  int64_t size = 0;
  std::vector<std::string> labels;
  std::vector<double> group_mix;
  std::vector<double> qualification_rate;
  // Couples qualification to the latent trait: P(q = 1) =
  // sigmoid(logit(rate) + coupling * z). Zero keeps them independent.
  double qualification_coupling = 0.0;
};

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double Logit(double p) { return std::log(p / (1.0 - p)); }

// Users drawn independently: attribute ~ group_mix, qualified ~
// Bernoulli(rate[attribute]), latent trait ~ N(0, 1).
inline absl::StatusOr<Population> GeneratePopulation(const PopulationSpec& spec,
                                                     uint64_t seed) {
  if (spec.size <= 0 || spec.size > int64_t{1} << 31) {
    return MakeError(ErrorKind::kInvalidParameter, "population size must be in [1, 2^31]");
  }
  PPAUDIT_ASSIGN_OR_RETURN(auto attributes, MakeAttributes(spec.labels));
  if (attributes.empty() || spec.group_mix.size() != attributes.size() ||
      spec.qualification_rate.size() != attributes.size()) {
    return MakeError(ErrorKind::kInvalidMix,
                     "group mix and qualification rates need one entry per attribute");
  }
  double total = 0;
  for (size_t i = 0; i < attributes.size(); ++i) {
    if (!(spec.group_mix[i] >= 0) || !(spec.qualification_rate[i] >= 0) ||
        !(spec.qualification_rate[i] <= 1)) {
      return MakeError(ErrorKind::kInvalidMix, "proportions must lie in [0, 1]");
    }
    total += spec.group_mix[i];
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    return MakeError(ErrorKind::kInvalidMix,
                     absl::StrCat("group mix must sum to 1, got ", total));
  }
  if (!std::isfinite(spec.qualification_coupling)) {
    return MakeError(ErrorKind::kInvalidMix, "qualification coupling must be finite");
  }

  Rng rng(seed);
  std::vector<UserRecord> users;
  users.reserve(static_cast<size_t>(spec.size));
  for (int64_t i = 0; i < spec.size; ++i) {
    double u = rng.Uniform();
    size_t group = 0;
    double cumulative = spec.group_mix[0];
    while (group + 1 < attributes.size() && u >= cumulative) {
      cumulative += spec.group_mix[++group];
    }
    const double trait = rng.Normal();
    double rate = spec.qualification_rate[group];
    if (spec.qualification_coupling != 0.0 && rate > 0.0 && rate < 1.0) {
      rate = Sigmoid(Logit(rate) + spec.qualification_coupling * trait);
    }
    const bool qualified = rng.Bernoulli(rate);
    users.push_back({absl::StrCat("u", i), attributes[group], qualified, trait});
  }
  return Population(std::move(attributes), std::move(users), seed);
}

// Uniform sample without replacement from one stratum (partial Fisher-Yates).
inline absl::StatusOr<std::vector<UserRecord>> SampleAudience(const Population& population,
                                                              const AttributeId& group,
                                                              bool qualified_only, int64_t n,
                                                              uint64_t seed) {
  if (n < 0) return MakeError(ErrorKind::kInvalidParameter, "audience size must be >= 0");
  const auto& stratum = population.Stratum(group.index, qualified_only);
  if (static_cast<size_t>(n) > stratum.size()) {
    return MakeError(ErrorKind::kInsufficientPopulation,
                     absl::StrCat("group '", group.label, "' has ", stratum.size(),
                                  qualified_only ? " qualified" : "",
                                  " users available, requested ", n));
  }
  std::vector<uint32_t> pool(stratum);
  Rng rng(seed);
  std::vector<UserRecord> audience;
  audience.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    size_t j = static_cast<size_t>(i) + rng.Below(pool.size() - static_cast<size_t>(i));
    std::swap(pool[i], pool[j]);
    audience.push_back(population.users()[pool[i]]);
  }
  return audience;
}

// ---------------------------------------------------------------------------
// Scoring

namespace internal {

inline size_t ClipBin(double index, size_t num_bins) {
  const double rounded = std::round(index);
  if (rounded <= 0) return 0;
  if (rounded >= static_cast<double>(num_bins - 1)) return num_bins - 1;
  return static_cast<size_t>(rounded);
}

inline size_t SampleOffsetIndex(const DiscreteOffsets& offsets, Rng& rng) {
  double u = rng.Uniform();
  double cumulative = 0;
  for (size_t i = 0; i + 1 < offsets.probabilities.size(); ++i) {
    cumulative += offsets.probabilities[i];
    if (u < cumulative) return i;
  }
  return offsets.probabilities.size() - 1;
}

}  // namespace internal

// Unbiased bin T(x) for one user.
inline size_t BaseScore(const EstimatorConfig& config, const UserRecord& user,
                        const ScoreDomain& domain, Rng& rng) {
  const double noise = config.score_noise_sd > 0 ? config.score_noise_sd * rng.Normal() : 0.0;
  const double unit = Sigmoid(config.location + config.spread * (user.latent_trait + noise));
  return domain.BinOf(domain.lower() + (domain.upper() - domain.lower()) * unit);
}

// Applies the group's bias transform to an unbiased bin.
inline size_t ApplyBias(const BiasModel& bias, int group, size_t base_bin, size_t num_bins,
                        Rng& rng) {
  const double t = static_cast<double>(base_bin);
  switch (bias.kind) {
    case BiasModel::Kind::kNone:
      return base_bin;
    case BiasModel::Kind::kAdditive:
      return internal::ClipBin(t + bias.per_group[group], num_bins);
    case BiasModel::Kind::kMultiplicative:
      return internal::ClipBin((t + 1.0) * bias.per_group[group] - 1.0, num_bins);
    case BiasModel::Kind::kRandomAdditive: {
      const auto& offsets = bias.random_per_group[group];
      return internal::ClipBin(t + offsets.values[internal::SampleOffsetIndex(offsets, rng)],
                               num_bins);
    }
  }
  return base_bin;
}

inline size_t Score(const EstimatorConfig& config, const UserRecord& user,
                    const ScoreDomain& domain, Rng& rng) {
  return ApplyBias(config.bias, user.attribute.index, BaseScore(config, user, domain, rng),
                   domain.size(), rng);
}

inline absl::StatusOr<ScoreHistogram> ScoreAudience(const EstimatorConfig& config,
                                                    const std::vector<UserRecord>& audience,
                                                    const ScoreDomain& domain, Rng& rng) {
  if (audience.empty()) return MakeError(ErrorKind::kEmptyAudience, "audience is empty");
  const AttributeId& group = audience.front().attribute;
  for (const auto& user : audience) {
    if (!(user.attribute == group)) {
      return MakeError(ErrorKind::kMixedGroupAudience,
                       absl::StrCat("audience mixes groups '", group.label, "' and '",
                                    user.attribute.label, "'"));
    }
  }
  std::vector<int64_t> counts(domain.size(), 0);
  for (const auto& user : audience) ++counts[Score(config, user, domain, rng)];
  return ScoreHistogram::FromCounts(group, std::move(counts));
}

// Closed-form distribution of T(x) over the domain for a user whose trait
// is N(0, 1): bin k has probability Phi(c_{k+1}) - Phi(c_k) with
// c_k = (logit(unit edge k) - location) / (spread * sqrt(1 + noise_sd^2)).
inline std::vector<double> BaseScorePmf(const EstimatorConfig& config,
                                        const ScoreDomain& domain) {
  const double scale =
      config.spread * std::sqrt(1.0 + config.score_noise_sd * config.score_noise_sd);
  auto cdf_at_edge = [&](size_t k) {
    if (k == 0) return 0.0;
    if (k >= domain.size()) return 1.0;
    const double c = (Logit(domain.UnitEdge(k)) - config.location) / scale;
    return 0.5 * std::erfc(-c / std::numbers::sqrt2);
  };
  std::vector<double> pmf(domain.size());
  for (size_t k = 0; k < pmf.size(); ++k) pmf[k] = cdf_at_edge(k + 1) - cdf_at_edge(k);
  return pmf;
}

// Distribution of R(x) for `group`: the base pmf pushed through the bias map.
// Valid when qualification is independent of the latent trait.
inline std::vector<double> ScorePmf(const EstimatorConfig& config, int group,
                                    const ScoreDomain& domain) {
  const std::vector<double> base = BaseScorePmf(config, domain);
  const size_t bins = domain.size();
  std::vector<double> out(bins, 0.0);
  for (size_t t = 0; t < bins; ++t) {
    const double td = static_cast<double>(t);
    switch (config.bias.kind) {
      case BiasModel::Kind::kNone:
        out[t] += base[t];
        break;
      case BiasModel::Kind::kAdditive:
        out[internal::ClipBin(td + config.bias.per_group[group], bins)] += base[t];
        break;
      case BiasModel::Kind::kMultiplicative:
        out[internal::ClipBin((td + 1.0) * config.bias.per_group[group] - 1.0, bins)] +=
            base[t];
        break;
      case BiasModel::Kind::kRandomAdditive: {
        const auto& offsets = config.bias.random_per_group[group];
        for (size_t i = 0; i < offsets.values.size(); ++i) {
          out[internal::ClipBin(td + offsets.values[i], bins)] +=
              base[t] * offsets.probabilities[i];
        }
        break;
      }
    }
  }
  return out;
}

// True fairness gap FG = max_{a1,a2,y} |P_{a1,y} - P_{a2,y}| of the configured
// estimator (bins, or complementary CDFs for a continuous domain).
inline double TrueFairnessGap(const EstimatorConfig& config, size_t num_groups,
                              const ScoreDomain& domain) {
  std::vector<std::vector<double>> rows;
  for (size_t g = 0; g < num_groups; ++g) {
    auto pmf = ScorePmf(config, static_cast<int>(g), domain);
    rows.push_back(domain.kind() == ScoreDomain::Kind::kContinuous ? ComplementaryCdf(pmf)
                                                                   : pmf);
  }
  return internal::MaxPairwiseGap(rows).first;
}

// ---------------------------------------------------------------------------
// Population files: a "#attributes" line, a column header, then one
// tab-separated record per user.

inline constexpr absl::string_view kPopulationHeader =
    "user_id\tattribute\tqualified\tlatent_trait";

inline void WritePopulation(std::ostream& out, const Population& population) {
  out << "#attributes";
  for (const auto& a : population.attributes()) out << "\t" << a.label;
  out << "\n#seed\t" << population.seed() << "\n" << kPopulationHeader << "\n";
  for (const auto& u : population.users()) {
    out << u.user_id << "\t" << u.attribute.label << "\t" << (u.qualified ? 1 : 0) << "\t"
        << FormatDouble(u.latent_trait) << "\n";
  }
}

inline absl::StatusOr<Population> ReadPopulation(std::istream& in) {
  std::vector<AttributeId> attributes;
  std::unordered_map<std::string, AttributeId> by_label;
  std::vector<UserRecord> users;
  std::unordered_map<std::string, int> seen_ids;
  uint64_t seed = 0;
  std::string line;
  int line_number = 0;
  auto fail = [&](absl::string_view why) {
    return MakeError(ErrorKind::kConfig, absl::StrCat("population line ", line_number, ": ", why));
  };
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = absl::StrSplit(line, '\t');
    if (fields[0] == "#attributes") {
      std::vector<std::string> labels(fields.begin() + 1, fields.end());
      auto made = MakeAttributes(labels);
      if (!made.ok()) return fail(made.status().message());
      attributes = *made;
      for (const auto& a : attributes) by_label[a.label] = a;
      continue;
    }
    if (fields[0] == "#seed") {
      if (fields.size() != 2) return fail("malformed #seed line");
      auto [end, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), seed);
      if (ec != std::errc()) return fail("malformed seed");
      continue;
    }
    if (line == kPopulationHeader || fields[0].starts_with("#")) continue;
    if (attributes.empty()) return fail("record before #attributes line");
    if (fields.size() != 4) return fail(absl::StrCat("expected 4 fields, got ", fields.size()));
    auto group = by_label.find(fields[1]);
    if (group == by_label.end()) return fail(absl::StrCat("unknown attribute '", fields[1], "'"));
    if (fields[2] != "0" && fields[2] != "1") return fail("qualified must be 0 or 1");
    auto trait = ParseDouble(fields[3]);
    if (!trait || !std::isfinite(*trait)) return fail("latent trait must be a finite number");
    if (fields[0].empty() || !seen_ids.emplace(fields[0], line_number).second) {
      return fail(absl::StrCat("duplicate or empty user id '", fields[0], "'"));
    }
    users.push_back({fields[0], group->second, fields[2] == "1", *trait});
  }
  if (attributes.empty()) return MakeError(ErrorKind::kConfig, "population has no #attributes line");
  return Population(std::move(attributes), std::move(users), seed);
}

}  // namespace ppaudit
