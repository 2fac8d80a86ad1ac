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

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "absl/strings/string_view.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "ppaudit/audit_core.hpp"
#include "ppaudit/dp_mechanism.hpp"
#include "ppaudit/protocol/messages.hpp"
#include "ppaudit/random.hpp"
#include "ppaudit/status.hpp"
#include "ppaudit/synthetic_platform.hpp"

namespace ppaudit::protocol {

struct PlatformConfig {
  EstimatorConfig estimator;
  ScoreDomain domain;
  double budget_per_auditor = 1.0;
  uint64_t seed = 0;
  std::filesystem::path ledger_dir;   // empty: in-memory ledgers
  std::filesystem::path request_log;  // empty: no audit trail
};

// The platform side of the audit, independent of transport. Upload matches
// identifiers exactly against the population; Query scores the matched users,
// charges the auditor's ledger and releases only the Laplace-noised
// histogram. Noise and scoring streams are derived from (seed, auditor,
// handle, per-handle query number), so two platforms built from the same
// config and population answer the same request sequence identically.
class Platform {
 public:
  static absl::StatusOr<std::unique_ptr<Platform>> Create(PlatformConfig config,
                                                          Population population) {
    PPAUDIT_RETURN_IF_ERROR(config.estimator.Validate(population.attributes().size()));
    PPAUDIT_ASSIGN_OR_RETURN(auto ledgers,
                             LedgerStore::Open(config.ledger_dir, config.budget_per_auditor));
    return std::unique_ptr<Platform>(
        new Platform(std::move(config), std::move(population), std::move(ledgers)));
  }

  absl::StatusOr<UploadAudienceResponse> Upload(const UploadAudienceRequest& request) {
    if (!IsSafeIdentifier(request.auditor_id)) {
      return MakeError(ErrorKind::kInvalidParameter,
                       absl::StrCat("invalid auditor id '", request.auditor_id, "'"));
    }
    if (!IsSafeIdentifier(request.audience_handle)) {
      return MakeError(ErrorKind::kInvalidParameter,
                       absl::StrCat("invalid audience handle '", request.audience_handle, "'"));
    }
    bool known_group = false;
    for (const auto& a : population_.attributes()) known_group |= a.label == request.group;
    if (!known_group) {
      return MakeError(ErrorKind::kInvalidParameter,
                       absl::StrCat("unknown group '", request.group, "'"));
    }
    std::unordered_set<std::string_view> seen;
    Audience audience;
    audience.group = request.group;
    for (const auto& id : request.user_ids) {
      if (!seen.insert(id).second) {
        return MakeError(ErrorKind::kInvalidParameter,
                         absl::StrCat("duplicate user id '", id, "' in upload"));
      }
      if (const UserRecord* user = population_.Find(id)) audience.members.push_back(user);
    }
    UploadAudienceResponse response{request.audience_handle,
                                    static_cast<int64_t>(request.user_ids.size()),
                                    static_cast<int64_t>(audience.members.size())};
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] =
        audiences_.try_emplace({request.auditor_id, request.audience_handle}, std::move(audience));
    if (!inserted) {
      return MakeError(ErrorKind::kDuplicateAudience,
                       absl::StrCat("handle '", request.audience_handle,
                                    "' already used by this auditor"));
    }
    return response;
  }

  absl::StatusOr<QueryRelevanceResponse> Query(const QueryRelevanceRequest& request) {
    if (!(request.epsilon > 0) || !std::isfinite(request.epsilon)) {
      return MakeError(ErrorKind::kInvalidEpsilon,
                       absl::StrCat("epsilon must be positive, got ", request.epsilon));
    }
    std::vector<UserRecord> members;
    std::string group;
    uint64_t query_number = 0;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = audiences_.find({request.auditor_id, request.audience_handle});
      if (it == audiences_.end()) {
        return MakeError(ErrorKind::kUnknownAudience,
                         absl::StrCat("no audience '", request.audience_handle,
                                      "' for auditor '", request.auditor_id, "'"));
      }
      group = it->second.group;
      members.reserve(it->second.members.size());
      for (const UserRecord* user : it->second.members) members.push_back(*user);
      query_number = it->second.queries++;
    }
    // Shape checks happen before the charge so a doomed query costs nothing.
    if (members.empty()) {
      return MakeError(ErrorKind::kEmptyAudience,
                       absl::StrCat("audience '", request.audience_handle, "' matched no users"));
    }
    for (const auto& user : members) {
      if (!(user.attribute == members.front().attribute)) {
        return MakeError(ErrorKind::kMixedGroupAudience,
                         absl::StrCat("audience '", request.audience_handle,
                                      "' spans several groups"));
      }
    }
    // One charge per query message. Groups are disjoint, so this is
    // conservative relative to parallel composition.
    PPAUDIT_ASSIGN_OR_RETURN(
        LedgerEntry charge,
        ledgers_->Charge(request.auditor_id,
                         absl::StrCat(request.audience_handle, "#", query_number),
                         request.epsilon));

    const uint64_t stream = DeriveSeed(DeriveSeed(config_.seed, request.auditor_id),
                                       request.audience_handle, {query_number});
    Rng score_rng(DeriveSeed(stream, "score"));
    PPAUDIT_ASSIGN_OR_RETURN(ScoreHistogram raw,
                             ScoreAudience(config_.estimator, members, config_.domain, score_rng));
    PPAUDIT_ASSIGN_OR_RETURN(LaplaceNoiser noiser,
                             LaplaceNoiser::ForEpsilon(request.epsilon, DeriveSeed(stream, "noise")));
    PPAUDIT_ASSIGN_OR_RETURN(NoisyHistogram noisy,
                             PrivatizeHistogram(raw, request.epsilon, noiser));

    QueryRelevanceResponse response;
    response.audience_handle = request.audience_handle;
    response.group = group;
    response.noisy_counts = std::move(noisy.noisy_counts);
    response.n_declared = noisy.n_declared;
    response.epsilon_spent = noisy.epsilon_spent;
    response.remaining_budget = config_.budget_per_auditor - charge.running_total;
    return response;
  }

  // Full wire handling of one request line; returns the response line
  // (without trailing newline). Never throws; malformed input yields an
  // error message.
  std::string HandleLine(absl::string_view line) {
    Json response = Dispatch(line);
    std::string out = response.dump(-1, ' ', false, Json::error_handler_t::replace);
    Log(line, out);
    return out;
  }

  const Population& population() const { return population_; }
  const PlatformConfig& config() const { return config_; }
  LedgerStore& ledgers() { return *ledgers_; }

 private:
  struct Audience {
    std::string group;
    std::vector<const UserRecord*> members;
    uint64_t queries = 0;
  };

  Platform(PlatformConfig config, Population population, std::unique_ptr<LedgerStore> ledgers)
      : config_(std::move(config)),
        population_(std::move(population)),
        ledgers_(std::move(ledgers)) {}

  Json Dispatch(absl::string_view line) {
    auto envelope = ParseEnvelope(line);
    if (!envelope.ok()) return ErrorToJson(envelope.status());
    const std::string type = TypeOf(*envelope);
    if (type == kUploadAudience) {
      auto request = ParseUploadAudienceRequest(*envelope);
      if (!request.ok()) return ErrorToJson(request.status());
      auto response = Upload(*request);
      return response.ok() ? ToJson(*response) : ErrorToJson(response.status());
    }
    if (type == kQueryRelevance) {
      auto request = ParseQueryRelevanceRequest(*envelope);
      if (!request.ok()) return ErrorToJson(request.status());
      auto response = Query(*request);
      return response.ok() ? ToJson(*response) : ErrorToJson(response.status());
    }
    if (type == kPlatformSample) {
      return ErrorToJson(MakeError(ErrorKind::kUnsupportedMessage,
                                   "platform-assisted sampling is reserved but not offered"));
    }
    return ErrorToJson(
        MakeError(ErrorKind::kUnsupportedMessage, absl::StrCat("unknown message type '", type, "'")));
  }

  void Log(absl::string_view request, absl::string_view response) {
    if (config_.request_log.empty()) return;
    Json entry{{"ts_ms", NowMillis()}};
    Json parsed = Json::parse(request, nullptr, false);
    if (parsed.is_discarded()) {
      entry["request_raw"] = std::string(request);
    } else {
      entry["request"] = std::move(parsed);
    }
    entry["response"] = Json::parse(response, nullptr, false);
    std::lock_guard<std::mutex> lock(log_mu_);
    std::ofstream out(config_.request_log, std::ios::app | std::ios::binary);
    out << entry.dump(-1, ' ', false, Json::error_handler_t::replace) << "\n";
  }

  PlatformConfig config_;
  Population population_;
  std::unique_ptr<LedgerStore> ledgers_;
  std::mutex mu_;
  std::map<std::pair<std::string, std::string>, Audience> audiences_;
  std::mutex log_mu_;
};

}  // namespace ppaudit::protocol
