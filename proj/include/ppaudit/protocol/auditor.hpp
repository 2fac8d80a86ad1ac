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

#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "ppaudit/audit_core.hpp"
#include "ppaudit/protocol/messages.hpp"
#include "ppaudit/protocol/net.hpp"
#include "ppaudit/random.hpp"
#include "ppaudit/sample_planner.hpp"
#include "ppaudit/status.hpp"
#include "ppaudit/synthetic_platform.hpp"

namespace ppaudit::protocol {

// Anything that answers the two audit requests: a Platform in process, or a
// Client talking to a remote one.
template <typename C>
concept AuditChannel = requires(C& c, const UploadAudienceRequest& upload,
                                const QueryRelevanceRequest& query) {
  { c.Upload(upload) } -> std::same_as<absl::StatusOr<UploadAudienceResponse>>;
  { c.Query(query) } -> std::same_as<absl::StatusOr<QueryRelevanceResponse>>;
};

struct GroupAudience {
  AttributeId group;
  std::vector<std::string> user_ids;  // qualified members only
};

struct AuditRequest {
  std::string auditor_id = "auditor";
  std::string audit_id = "audit";  // prefixes the per-group audience handles
  ContentDescriptor content{"job-ad", ""};
  std::vector<GroupAudience> audiences;
};

struct AuditOutcome {
  FairnessReport report;
  std::vector<UploadAudienceResponse> uploads;
  std::vector<NoisyHistogram> released;
  double remaining_budget = 0.0;
  int64_t planned_n = 0;           // private planner minimum for the spec
  bool meets_plan = false;         // every n_declared >= planned_n
};

// Steps 1 and 4 of the audit from the auditor's side: upload one audience
// per group, query each at spec.epsilon, then test the noisy releases.
template <AuditChannel Channel>
absl::StatusOr<AuditOutcome> DriveAudit(Channel& channel, const AuditSpec& spec,
                                        const AuditRequest& request) {
  // Validation precedes any traffic, so an invalid epsilon draws no noise.
  PPAUDIT_RETURN_IF_ERROR(spec.Validate());
  if (request.audiences.size() != spec.attributes.size()) {
    return MakeError(ErrorKind::kGroupCountMismatch,
                     absl::StrCat("need one audience per attribute (", spec.attributes.size(),
                                  "), got ", request.audiences.size()));
  }
  AuditOutcome outcome;
  std::vector<std::string> handles;
  for (const auto& audience : request.audiences) {
    std::string handle = absl::StrCat(request.audit_id, "-", audience.group.label);
    PPAUDIT_ASSIGN_OR_RETURN(
        UploadAudienceResponse uploaded,
        channel.Upload({request.auditor_id, handle, audience.group.label, audience.user_ids}));
    outcome.uploads.push_back(uploaded);
    handles.push_back(std::move(handle));
  }
  for (size_t g = 0; g < request.audiences.size(); ++g) {
    PPAUDIT_ASSIGN_OR_RETURN(
        QueryRelevanceResponse answer,
        channel.Query({request.auditor_id, request.content, handles[g], spec.epsilon}));
    outcome.released.push_back({request.audiences[g].group, std::move(answer.noisy_counts),
                                answer.n_declared, answer.epsilon_spent});
    outcome.remaining_budget = answer.remaining_budget;
  }
  PPAUDIT_ASSIGN_OR_RETURN(outcome.report, EvaluateAudit(spec, outcome.released));
  PPAUDIT_ASSIGN_OR_RETURN(
      PlanResult plan,
      NMinPrivate(spec.alpha, spec.delta, spec.epsilon,
                  static_cast<int64_t>(spec.attributes.size()),
                  static_cast<int64_t>(spec.domain.size())));
  outcome.planned_n = plan.n_min_per_group;
  outcome.meets_plan = true;
  for (const auto& h : outcome.released) {
    outcome.meets_plan = outcome.meets_plan && h.n_declared >= outcome.planned_n;
  }
  return outcome;
}

inline absl::StatusOr<AuditOutcome> ClientAudit(const Endpoint& endpoint, const AuditSpec& spec,
                                                const AuditRequest& request) {
  PPAUDIT_RETURN_IF_ERROR(spec.Validate());
  PPAUDIT_ASSIGN_OR_RETURN(Client client, Client::Connect(endpoint));
  return DriveAudit(client, spec, request);
}

// The auditor's recruitment step: n qualified users per group drawn from the
// auditor's own roster. Only identifiers leave this function.
inline absl::StatusOr<std::vector<GroupAudience>> RecruitAudiences(const Population& roster,
                                                                   const AuditSpec& spec,
                                                                   int64_t n, uint64_t seed) {
  std::vector<GroupAudience> out;
  for (const AttributeId& group : spec.attributes) {
    const AttributeId* in_roster = nullptr;
    for (const auto& a : roster.attributes()) {
      if (a.label == group.label) in_roster = &a;
    }
    if (in_roster == nullptr) {
      return MakeError(ErrorKind::kInsufficientPopulation,
                       absl::StrCat("roster has no group '", group.label, "'"));
    }
    PPAUDIT_ASSIGN_OR_RETURN(
        auto users, SampleAudience(roster, *in_roster, /*qualified_only=*/true, n,
                                   DeriveSeed(seed, "audience",
                                              {static_cast<uint64_t>(group.index)})));
    GroupAudience audience{group, {}};
    audience.user_ids.reserve(users.size());
    for (auto& u : users) audience.user_ids.push_back(std::move(u.user_id));
    out.push_back(std::move(audience));
  }
  return out;
}

}  // namespace ppaudit::protocol
