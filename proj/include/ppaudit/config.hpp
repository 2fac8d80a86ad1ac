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

// YAML configuration for experiments and the platform service. Schemas are
// documented in README.md; unknown keys are rejected and every error names
// the offending line.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "absl/strings/string_view.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "ppaudit/audit_core.hpp"
#include "ppaudit/protocol/net.hpp"
#include "ppaudit/protocol/platform.hpp"
#include "ppaudit/simulation.hpp"
#include "ppaudit/status.hpp"
#include "ppaudit/synthetic_platform.hpp"
#include "yaml-cpp/yaml.h"

namespace ppaudit::config {

namespace internal {

inline absl::Status ErrorAt(const YAML::Node& node, absl::string_view source,
                            absl::string_view why) {
  const YAML::Mark mark = node.Mark();
  if (mark.is_null()) return MakeError(ErrorKind::kConfig, absl::StrCat(source, ": ", why));
  return MakeError(ErrorKind::kConfig,
                   absl::StrCat(source, ":", mark.line + 1, ": ", why));
}

// Thin typed accessor bound to one source file name.
class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  const std::string& source() const { return source_; }

  absl::Status Error(const YAML::Node& node, absl::string_view why) const {
    return ErrorAt(node, source_, why);
  }

  absl::Status RequireMap(const YAML::Node& node, absl::string_view what,
                          std::initializer_list<absl::string_view> allowed) const {
    if (!node.IsMap()) return Error(node, absl::StrCat(what, " must be a mapping"));
    std::set<absl::string_view> keys(allowed);
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      if (!keys.contains(key)) {
        return Error(kv.first, absl::StrCat("unknown key '", key, "' in ", what));
      }
    }
    return absl::OkStatus();
  }

  template <typename T>
  absl::StatusOr<T> Get(const YAML::Node& parent, const char* key) const {
    const YAML::Node node = parent[key];
    if (!node) return Error(parent, absl::StrCat("missing key '", key, "'"));
    return As<T>(node, key);
  }

  template <typename T>
  absl::StatusOr<T> GetOr(const YAML::Node& parent, const char* key, T fallback) const {
    const YAML::Node node = parent[key];
    if (!node) return fallback;
    return As<T>(node, key);
  }

  template <typename T>
  absl::StatusOr<T> As(const YAML::Node& node, absl::string_view what) const {
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      return Error(node, absl::StrCat("'", what, "' has the wrong type"));
    }
  }

 private:
  std::string source_;
};

inline absl::StatusOr<YAML::Node> LoadYaml(absl::string_view text, absl::string_view source) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    return MakeError(ErrorKind::kConfig,
                     absl::StrCat(source, ":", e.mark.line + 1, ": ", e.msg));
  }
}

inline absl::StatusOr<std::string> ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return MakeError(ErrorKind::kConfig, absl::StrCat("cannot open ", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline absl::StatusOr<ScoreDomain> ParseDomain(const Reader& r, const YAML::Node& node) {
  PPAUDIT_RETURN_IF_ERROR(r.RequireMap(node, "domain", {"kind", "bins", "edges", "lo", "hi"}));
  PPAUDIT_ASSIGN_OR_RETURN(std::string kind, r.GetOr<std::string>(node, "kind", "discrete"));
  absl::StatusOr<ScoreDomain> domain;
  if (kind == "discrete") {
    PPAUDIT_ASSIGN_OR_RETURN(int bins, r.Get<int>(node, "bins"));
    domain = ScoreDomain::Discrete(bins);
  } else if (kind == "continuous") {
    if (node["edges"]) {
      PPAUDIT_ASSIGN_OR_RETURN(auto edges, r.Get<std::vector<double>>(node, "edges"));
      domain = ScoreDomain::Continuous(std::move(edges));
    } else {
      PPAUDIT_ASSIGN_OR_RETURN(double lo, r.GetOr<double>(node, "lo", 0.0));
      PPAUDIT_ASSIGN_OR_RETURN(double hi, r.GetOr<double>(node, "hi", 1.0));
      PPAUDIT_ASSIGN_OR_RETURN(int bins, r.Get<int>(node, "bins"));
      domain = ScoreDomain::EqualWidth(lo, hi, bins);
    }
  } else {
    return r.Error(node, absl::StrCat("domain kind must be discrete or continuous, got '",
                                      kind, "'"));
  }
  if (!domain.ok()) return r.Error(node, domain.status().message());
  return domain;
}

inline absl::StatusOr<EstimatorConfig> ParseEstimator(const Reader& r, const YAML::Node& node) {
  EstimatorConfig config;
  if (!node) return config;
  PPAUDIT_RETURN_IF_ERROR(
      r.RequireMap(node, "estimator", {"location", "spread", "score_noise_sd", "bias"}));
  PPAUDIT_ASSIGN_OR_RETURN(config.location, r.GetOr<double>(node, "location", 0.0));
  PPAUDIT_ASSIGN_OR_RETURN(config.spread, r.GetOr<double>(node, "spread", 1.0));
  PPAUDIT_ASSIGN_OR_RETURN(config.score_noise_sd, r.GetOr<double>(node, "score_noise_sd", 1.0));
  const YAML::Node bias = node["bias"];
  if (!bias) return config;
  PPAUDIT_RETURN_IF_ERROR(r.RequireMap(bias, "bias", {"model", "per_group", "offsets"}));
  PPAUDIT_ASSIGN_OR_RETURN(std::string model, r.Get<std::string>(bias, "model"));
  auto kind = ParseBiasKind(model);
  if (!kind.ok()) return r.Error(bias, kind.status().message());
  config.bias.kind = *kind;
  if (bias["per_group"]) {
    PPAUDIT_ASSIGN_OR_RETURN(config.bias.per_group,
                             r.Get<std::vector<double>>(bias, "per_group"));
  }
  if (const YAML::Node offsets = bias["offsets"]) {
    if (!offsets.IsSequence()) return r.Error(offsets, "'offsets' must be a list");
    for (const auto& entry : offsets) {
      PPAUDIT_RETURN_IF_ERROR(r.RequireMap(entry, "offsets entry", {"values", "probabilities"}));
      DiscreteOffsets d;
      PPAUDIT_ASSIGN_OR_RETURN(d.values, r.Get<std::vector<double>>(entry, "values"));
      PPAUDIT_ASSIGN_OR_RETURN(d.probabilities,
                               r.Get<std::vector<double>>(entry, "probabilities"));
      config.bias.random_per_group.push_back(std::move(d));
    }
  }
  return config;
}

inline absl::StatusOr<PopulationSpec> ParsePopulationSpec(const Reader& r, const YAML::Node& node,
                                                          std::vector<std::string> labels) {
  PPAUDIT_RETURN_IF_ERROR(r.RequireMap(
      node, "population",
      {"size", "groups", "mix", "qualification_rate", "qualification_coupling"}));
  PopulationSpec spec;
  PPAUDIT_ASSIGN_OR_RETURN(spec.size, r.Get<int64_t>(node, "size"));
  if (node["groups"]) {
    PPAUDIT_ASSIGN_OR_RETURN(spec.labels, r.Get<std::vector<std::string>>(node, "groups"));
  } else {
    spec.labels = std::move(labels);
  }
  const std::vector<double> even(spec.labels.size(),
                                 spec.labels.empty() ? 0.0 : 1.0 / spec.labels.size());
  PPAUDIT_ASSIGN_OR_RETURN(spec.group_mix, r.GetOr<std::vector<double>>(node, "mix", even));
  PPAUDIT_ASSIGN_OR_RETURN(
      spec.qualification_rate,
      r.GetOr<std::vector<double>>(node, "qualification_rate",
                                   std::vector<double>(spec.labels.size(), 0.5)));
  PPAUDIT_ASSIGN_OR_RETURN(spec.qualification_coupling,
                           r.GetOr<double>(node, "qualification_coupling", 0.0));
  return spec;
}

}  // namespace internal

struct SweepConfig {
  TradeoffAxis axis = TradeoffAxis::kEpsilon;
  std::vector<double> values;
};

struct ExperimentConfig {
  ExperimentSpec spec;
  bool n_from_planner = false;
  bool seed_from_file = false;
  std::optional<SweepConfig> sweep;
};

// Experiment schema:
//   name, seed, trials, use_privacy, threads,
//   n_per_group: <int> | planner
//   audit:      {alpha, delta, epsilon, groups: [..], domain: {kind, bins|edges|lo,hi,bins}}
//   population: {size, mix: [..], qualification_rate: [..], qualification_coupling}
//   estimator:  {location, spread, score_noise_sd,
//                bias: {model, per_group: [..], offsets: [{values, probabilities}, ..]}}
//   sweep:      {parameter: epsilon|alpha|n_per_group, values: [..]}   (optional)
inline absl::StatusOr<ExperimentConfig> ParseExperimentConfig(absl::string_view text,
                                                              absl::string_view source) {
  internal::Reader r{std::string(source)};
  PPAUDIT_ASSIGN_OR_RETURN(YAML::Node root, internal::LoadYaml(text, source));
  PPAUDIT_RETURN_IF_ERROR(r.RequireMap(root, "experiment config",
                                       {"name", "seed", "trials", "use_privacy", "threads",
                                        "n_per_group", "audit", "population", "estimator",
                                        "sweep"}));
  ExperimentConfig config;
  ExperimentSpec& spec = config.spec;
  PPAUDIT_ASSIGN_OR_RETURN(spec.name, r.GetOr<std::string>(root, "name", "experiment"));
  config.seed_from_file = static_cast<bool>(root["seed"]);
  PPAUDIT_ASSIGN_OR_RETURN(spec.seed, r.GetOr<uint64_t>(root, "seed", 0));
  PPAUDIT_ASSIGN_OR_RETURN(spec.trials, r.GetOr<int64_t>(root, "trials", 1000));
  PPAUDIT_ASSIGN_OR_RETURN(spec.use_privacy, r.GetOr<bool>(root, "use_privacy", true));
  PPAUDIT_ASSIGN_OR_RETURN(spec.threads, r.GetOr<unsigned>(root, "threads", 0));

  const YAML::Node audit = root["audit"];
  if (!audit) return r.Error(root, "missing 'audit' section");
  PPAUDIT_RETURN_IF_ERROR(
      r.RequireMap(audit, "audit", {"alpha", "delta", "epsilon", "groups", "domain"}));
  PPAUDIT_ASSIGN_OR_RETURN(spec.audit.alpha, r.Get<double>(audit, "alpha"));
  PPAUDIT_ASSIGN_OR_RETURN(spec.audit.delta, r.Get<double>(audit, "delta"));
  PPAUDIT_ASSIGN_OR_RETURN(spec.audit.epsilon, r.Get<double>(audit, "epsilon"));
  PPAUDIT_ASSIGN_OR_RETURN(auto labels, r.Get<std::vector<std::string>>(audit, "groups"));
  auto attributes = MakeAttributes(labels);
  if (!attributes.ok()) return r.Error(audit["groups"], attributes.status().message());
  spec.audit.attributes = *attributes;
  if (!audit["domain"]) return r.Error(audit, "missing key 'domain'");
  PPAUDIT_ASSIGN_OR_RETURN(spec.audit.domain, internal::ParseDomain(r, audit["domain"]));
  if (auto status = spec.audit.Validate(); !status.ok()) return r.Error(audit, status.message());

  if (!root["population"]) return r.Error(root, "missing 'population' section");
  PPAUDIT_ASSIGN_OR_RETURN(spec.population,
                           internal::ParsePopulationSpec(r, root["population"], labels));
  PPAUDIT_ASSIGN_OR_RETURN(spec.estimator, internal::ParseEstimator(r, root["estimator"]));
  if (auto status = spec.estimator.Validate(labels.size()); !status.ok()) {
    return r.Error(root["estimator"], status.message());
  }

  const YAML::Node n = root["n_per_group"];
  if (!n || (n.IsScalar() && n.Scalar() == "planner")) {
    config.n_from_planner = true;
    auto planned = PlannedSampleSize(spec.audit, spec.use_privacy);
    if (!planned.ok()) return r.Error(n ? n : root, planned.status().message());
    spec.n_per_group = *planned;
  } else {
    PPAUDIT_ASSIGN_OR_RETURN(spec.n_per_group, r.As<int64_t>(n, "n_per_group"));
  }

  if (const YAML::Node sweep = root["sweep"]) {
    PPAUDIT_RETURN_IF_ERROR(r.RequireMap(sweep, "sweep", {"parameter", "values"}));
    PPAUDIT_ASSIGN_OR_RETURN(std::string parameter, r.Get<std::string>(sweep, "parameter"));
    auto axis = ParseTradeoffAxis(parameter);
    if (!axis.ok()) return r.Error(sweep, axis.status().message());
    SweepConfig s{*axis, {}};
    PPAUDIT_ASSIGN_OR_RETURN(s.values, r.Get<std::vector<double>>(sweep, "values"));
    if (s.values.empty()) return r.Error(sweep, "sweep values must not be empty");
    config.sweep = std::move(s);
  }
  if (auto status = spec.Validate(); !status.ok()) return r.Error(root, status.message());
  return config;
}

inline absl::StatusOr<ExperimentConfig> LoadExperimentConfig(const std::filesystem::path& path) {
  PPAUDIT_ASSIGN_OR_RETURN(std::string text, internal::ReadFile(path));
  return ParseExperimentConfig(text, path.string());
}

struct ServerConfig {
  protocol::PlatformConfig platform;
  protocol::Endpoint listen{"127.0.0.1", 7070};
  std::filesystem::path population_path;
  std::optional<PopulationSpec> generate;  // used when population_path is absent
  uint64_t population_seed = 0;
};

// Server schema:
//   listen: host:port, seed, budget_per_auditor, ledger_dir, request_log,
//   domain: {..}, estimator: {..},
//   population: {path, generate: {size, groups, mix, qualification_rate}, seed}
// Relative paths resolve against the config file's directory.
inline absl::StatusOr<ServerConfig> ParseServerConfig(absl::string_view text,
                                                      absl::string_view source,
                                                      const std::filesystem::path& base_dir) {
  internal::Reader r{std::string(source)};
  PPAUDIT_ASSIGN_OR_RETURN(YAML::Node root, internal::LoadYaml(text, source));
  PPAUDIT_RETURN_IF_ERROR(r.RequireMap(root, "server config",
                                       {"listen", "seed", "budget_per_auditor", "ledger_dir",
                                        "request_log", "domain", "estimator", "population"}));
  ServerConfig config;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() ? base_dir / path : path;
  };
  PPAUDIT_ASSIGN_OR_RETURN(std::string listen,
                           r.GetOr<std::string>(root, "listen", "127.0.0.1:7070"));
  auto endpoint = protocol::ParseEndpoint(listen);
  if (!endpoint.ok()) return r.Error(root["listen"], endpoint.status().message());
  config.listen = *endpoint;
  PPAUDIT_ASSIGN_OR_RETURN(config.platform.seed, r.GetOr<uint64_t>(root, "seed", 0));
  PPAUDIT_ASSIGN_OR_RETURN(config.platform.budget_per_auditor,
                           r.GetOr<double>(root, "budget_per_auditor", 1.0));
  if (!(config.platform.budget_per_auditor > 0)) {
    return r.Error(root["budget_per_auditor"], "budget_per_auditor must be positive");
  }
  if (root["ledger_dir"]) {
    PPAUDIT_ASSIGN_OR_RETURN(std::string dir, r.Get<std::string>(root, "ledger_dir"));
    config.platform.ledger_dir = resolve(dir);
  }
  if (root["request_log"]) {
    PPAUDIT_ASSIGN_OR_RETURN(std::string log, r.Get<std::string>(root, "request_log"));
    config.platform.request_log = resolve(log);
  }
  if (!root["domain"]) return r.Error(root, "missing 'domain' section");
  PPAUDIT_ASSIGN_OR_RETURN(config.platform.domain, internal::ParseDomain(r, root["domain"]));
  PPAUDIT_ASSIGN_OR_RETURN(config.platform.estimator,
                           internal::ParseEstimator(r, root["estimator"]));

  const YAML::Node population = root["population"];
  if (!population) return r.Error(root, "missing 'population' section");
  PPAUDIT_RETURN_IF_ERROR(r.RequireMap(population, "population", {"path", "generate", "seed"}));
  PPAUDIT_ASSIGN_OR_RETURN(std::string path, r.Get<std::string>(population, "path"));
  config.population_path = resolve(path);
  PPAUDIT_ASSIGN_OR_RETURN(config.population_seed, r.GetOr<uint64_t>(population, "seed", 0));
  if (const YAML::Node generate = population["generate"]) {
    PPAUDIT_ASSIGN_OR_RETURN(auto spec, internal::ParsePopulationSpec(r, generate, {}));
    config.generate = std::move(spec);
  }
  return config;
}

inline absl::StatusOr<ServerConfig> LoadServerConfig(const std::filesystem::path& path) {
  PPAUDIT_ASSIGN_OR_RETURN(std::string text, internal::ReadFile(path));
  return ParseServerConfig(text, path.string(), path.parent_path());
}

// Reads the population file, generating and writing it first when it does
// not exist and the config says how.
inline absl::StatusOr<Population> LoadOrGeneratePopulation(const ServerConfig& config) {
  if (std::filesystem::exists(config.population_path)) {
    std::ifstream in(config.population_path);
    return ReadPopulation(in);
  }
  if (!config.generate.has_value()) {
    return MakeError(ErrorKind::kConfig,
                     absl::StrCat("population file ", config.population_path.string(),
                                  " does not exist and no 'generate' section is given"));
  }
  PPAUDIT_ASSIGN_OR_RETURN(Population population,
                           GeneratePopulation(*config.generate, config.population_seed));
  if (config.population_path.has_parent_path()) {
    std::filesystem::create_directories(config.population_path.parent_path());
  }
  std::ofstream out(config.population_path, std::ios::binary);
  WritePopulation(out, population);
  if (!out) {
    return MakeError(ErrorKind::kConfig,
                     absl::StrCat("cannot write ", config.population_path.string()));
  }
  return population;
}

}  // namespace ppaudit::config
