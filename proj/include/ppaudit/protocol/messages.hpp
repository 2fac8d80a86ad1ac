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

// Wire schema of the audit protocol, version 1. Every message is one JSON
// object on one line with a "version" and a "type" field.
//
//   upload_audience          auditor -> platform
//     auditor_id, audience_handle, group, user_ids[]
//   upload_audience_result   platform -> auditor
//     audience_handle, accepted, matched
//   query_relevance          auditor -> platform
//     auditor_id, audience_handle, epsilon, content{id, text}
//   query_relevance_result   platform -> auditor
//     audience_handle, group, noisy_counts[], n_declared, epsilon_spent,
//     remaining_budget
//   error                    platform -> auditor
//     error (kind name), message, [remaining_budget]
//   platform_sample          reserved; always answered with an
//                            UnsupportedMessage error
//
// Responses carry no raw bin counts, per-user scores or latent traits.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/strings/string_view.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "json.hpp"
#include "ppaudit/status.hpp"

namespace ppaudit::protocol {

inline constexpr int kProtocolVersion = 1;

inline constexpr absl::string_view kUploadAudience = "upload_audience";
inline constexpr absl::string_view kUploadAudienceResult = "upload_audience_result";
inline constexpr absl::string_view kQueryRelevance = "query_relevance";
inline constexpr absl::string_view kQueryRelevanceResult = "query_relevance_result";
inline constexpr absl::string_view kError = "error";
inline constexpr absl::string_view kPlatformSample = "platform_sample";

struct ContentDescriptor {
  std::string id;
  std::string text;
};

struct UploadAudienceRequest {
  std::string auditor_id;
  std::string audience_handle;
  std::string group;
  std::vector<std::string> user_ids;
};

struct UploadAudienceResponse {
  std::string audience_handle;
  int64_t accepted = 0;
  int64_t matched = 0;
};

struct QueryRelevanceRequest {
  std::string auditor_id;
  ContentDescriptor content;
  std::string audience_handle;
  double epsilon = 0.0;
};

// Structurally limited to the privatized release.
struct QueryRelevanceResponse {
  std::string audience_handle;
  std::string group;
  std::vector<double> noisy_counts;
  int64_t n_declared = 0;
  double epsilon_spent = 0.0;
  double remaining_budget = 0.0;
};

using Json = nlohmann::json;

inline Json Envelope(absl::string_view type) {
  return Json{{"version", kProtocolVersion}, {"type", std::string(type)}};
}

inline Json ToJson(const UploadAudienceRequest& m) {
  Json j = Envelope(kUploadAudience);
  j["auditor_id"] = m.auditor_id;
  j["audience_handle"] = m.audience_handle;
  j["group"] = m.group;
  j["user_ids"] = m.user_ids;
  return j;
}

inline Json ToJson(const UploadAudienceResponse& m) {
  Json j = Envelope(kUploadAudienceResult);
  j["audience_handle"] = m.audience_handle;
  j["accepted"] = m.accepted;
  j["matched"] = m.matched;
  return j;
}

inline Json ToJson(const QueryRelevanceRequest& m) {
  Json j = Envelope(kQueryRelevance);
  j["auditor_id"] = m.auditor_id;
  j["audience_handle"] = m.audience_handle;
  j["epsilon"] = m.epsilon;
  j["content"] = Json{{"id", m.content.id}, {"text", m.content.text}};
  return j;
}

inline Json ToJson(const QueryRelevanceResponse& m) {
  Json j = Envelope(kQueryRelevanceResult);
  j["audience_handle"] = m.audience_handle;
  j["group"] = m.group;
  j["noisy_counts"] = m.noisy_counts;
  j["n_declared"] = m.n_declared;
  j["epsilon_spent"] = m.epsilon_spent;
  j["remaining_budget"] = m.remaining_budget;
  return j;
}

inline Json ErrorToJson(const absl::Status& status) {
  Json j = Envelope(kError);
  ErrorKind kind = ErrorKindOf(status);
  if (kind == ErrorKind::kNone) kind = ErrorKind::kMalformedMessage;
  j["error"] = std::string(ErrorKindName(kind));
  j["message"] = std::string(status.message());
  if (auto remaining = RemainingBudgetOf(status)) j["remaining_budget"] = *remaining;
  return j;
}

namespace internal {

inline absl::Status Malformed(absl::string_view why) {
  return MakeError(ErrorKind::kMalformedMessage, why);
}

template <typename T>
absl::StatusOr<T> Field(const Json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) return Malformed(absl::StrCat("missing field '", name, "'"));
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    return Malformed(absl::StrCat("field '", name, "' has the wrong type"));
  }
}

// String member or "" when absent or not a string; never throws.
inline std::string StringOr(const Json& j, const char* name) {
  auto it = j.find(name);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

}  // namespace internal

// Parses one line into a JSON object and checks the envelope.
inline absl::StatusOr<Json> ParseEnvelope(absl::string_view line) {
  Json j = Json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return internal::Malformed("not a JSON object");
  PPAUDIT_ASSIGN_OR_RETURN(int version, internal::Field<int>(j, "version"));
  if (version != kProtocolVersion) {
    return MakeError(ErrorKind::kUnsupportedMessage,
                     absl::StrCat("unsupported protocol version ", version));
  }
  PPAUDIT_RETURN_IF_ERROR(internal::Field<std::string>(j, "type").status());
  return j;
}

inline std::string TypeOf(const Json& j) { return internal::StringOr(j, "type"); }

inline absl::StatusOr<UploadAudienceRequest> ParseUploadAudienceRequest(const Json& j) {
  UploadAudienceRequest m;
  PPAUDIT_ASSIGN_OR_RETURN(m.auditor_id, internal::Field<std::string>(j, "auditor_id"));
  PPAUDIT_ASSIGN_OR_RETURN(m.audience_handle, internal::Field<std::string>(j, "audience_handle"));
  PPAUDIT_ASSIGN_OR_RETURN(m.group, internal::Field<std::string>(j, "group"));
  PPAUDIT_ASSIGN_OR_RETURN(m.user_ids, internal::Field<std::vector<std::string>>(j, "user_ids"));
  return m;
}

inline absl::StatusOr<UploadAudienceResponse> ParseUploadAudienceResponse(const Json& j) {
  UploadAudienceResponse m;
  PPAUDIT_ASSIGN_OR_RETURN(m.audience_handle, internal::Field<std::string>(j, "audience_handle"));
  PPAUDIT_ASSIGN_OR_RETURN(m.accepted, internal::Field<int64_t>(j, "accepted"));
  PPAUDIT_ASSIGN_OR_RETURN(m.matched, internal::Field<int64_t>(j, "matched"));
  return m;
}

inline absl::StatusOr<QueryRelevanceRequest> ParseQueryRelevanceRequest(const Json& j) {
  QueryRelevanceRequest m;
  PPAUDIT_ASSIGN_OR_RETURN(m.auditor_id, internal::Field<std::string>(j, "auditor_id"));
  PPAUDIT_ASSIGN_OR_RETURN(m.audience_handle, internal::Field<std::string>(j, "audience_handle"));
  PPAUDIT_ASSIGN_OR_RETURN(m.epsilon, internal::Field<double>(j, "epsilon"));
  PPAUDIT_ASSIGN_OR_RETURN(Json content, internal::Field<Json>(j, "content"));
  if (!content.is_object()) return internal::Malformed("content must be an object");
  PPAUDIT_ASSIGN_OR_RETURN(m.content.id, internal::Field<std::string>(content, "id"));
  if (content.contains("text")) {
    PPAUDIT_ASSIGN_OR_RETURN(m.content.text, internal::Field<std::string>(content, "text"));
  }
  return m;
}

inline absl::StatusOr<QueryRelevanceResponse> ParseQueryRelevanceResponse(const Json& j) {
  QueryRelevanceResponse m;
  PPAUDIT_ASSIGN_OR_RETURN(m.audience_handle, internal::Field<std::string>(j, "audience_handle"));
  PPAUDIT_ASSIGN_OR_RETURN(m.group, internal::Field<std::string>(j, "group"));
  PPAUDIT_ASSIGN_OR_RETURN(m.noisy_counts, internal::Field<std::vector<double>>(j, "noisy_counts"));
  PPAUDIT_ASSIGN_OR_RETURN(m.n_declared, internal::Field<int64_t>(j, "n_declared"));
  PPAUDIT_ASSIGN_OR_RETURN(m.epsilon_spent, internal::Field<double>(j, "epsilon_spent"));
  PPAUDIT_ASSIGN_OR_RETURN(m.remaining_budget, internal::Field<double>(j, "remaining_budget"));
  return m;
}

// Rebuilds the typed status carried by an error message.
inline absl::Status ParseErrorResponse(const Json& j) {
  ErrorKind kind = ErrorKindFromName(internal::StringOr(j, "error"));
  if (kind == ErrorKind::kNone) kind = ErrorKind::kMalformedMessage;
  auto remaining = j.find("remaining_budget");
  if (kind == ErrorKind::kBudgetExhausted && remaining != j.end() && remaining->is_number()) {
    return BudgetExhaustedError(remaining->get<double>());
  }
  // Server messages already lead with the kind name.
  absl::Status status(CanonicalCode(kind), internal::StringOr(j, "message"));
  status.SetPayload(kErrorKindPayload, absl::Cord(ErrorKindName(kind)));
  return status;
}

}  // namespace ppaudit::protocol
