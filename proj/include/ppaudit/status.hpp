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

#include <optional>
#include <string>

#include "absl/strings/string_view.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/cord.h"
#include "absl/strings/str_cat.h"
#include "ppaudit/numeric_format.hpp"

namespace ppaudit {

// Typed failure reasons. Each one travels inside an absl::Status as a
// payload so callers can branch on the kind without parsing messages.
enum class ErrorKind {
  kNone,
  kZeroQualifiedGroup,
  kGroupCountMismatch,
  kTooFewGroups,
  kInvalidEpsilon,
  kBudgetExhausted,
  kInvalidParameter,
  kEpsilonTooSmall,
  kInvalidMix,
  kInsufficientPopulation,
  kEmptyAudience,
  kMixedGroupAudience,
  kUnknownAudience,
  kDuplicateAudience,
  kMalformedMessage,
  kUnsupportedMessage,
  kTransport,
  kConfig,
};

inline constexpr absl::string_view kErrorKindPayload = "ppaudit/error-kind";
inline constexpr absl::string_view kRemainingBudgetPayload =
    "ppaudit/remaining-budget";

inline absl::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNone: return "None";
    case ErrorKind::kZeroQualifiedGroup: return "ZeroQualifiedGroup";
    case ErrorKind::kGroupCountMismatch: return "GroupCountMismatch";
    case ErrorKind::kTooFewGroups: return "TooFewGroups";
    case ErrorKind::kInvalidEpsilon: return "InvalidEpsilon";
    case ErrorKind::kBudgetExhausted: return "BudgetExhausted";
    case ErrorKind::kInvalidParameter: return "InvalidParameter";
    case ErrorKind::kEpsilonTooSmall: return "EpsilonTooSmall";
    case ErrorKind::kInvalidMix: return "InvalidMix";
    case ErrorKind::kInsufficientPopulation: return "InsufficientPopulation";
    case ErrorKind::kEmptyAudience: return "EmptyAudience";
    case ErrorKind::kMixedGroupAudience: return "MixedGroupAudience";
    case ErrorKind::kUnknownAudience: return "UnknownAudience";
    case ErrorKind::kDuplicateAudience: return "DuplicateAudience";
    case ErrorKind::kMalformedMessage: return "MalformedMessage";
    case ErrorKind::kUnsupportedMessage: return "UnsupportedMessage";
    case ErrorKind::kTransport: return "Transport";
    case ErrorKind::kConfig: return "Config";
  }
  return "Unknown";
}

inline ErrorKind ErrorKindFromName(absl::string_view name) {
  for (int k = 0; k <= static_cast<int>(ErrorKind::kConfig); ++k) {
    auto kind = static_cast<ErrorKind>(k);
    if (ErrorKindName(kind) == name) return kind;
  }
  return ErrorKind::kNone;
}

inline absl::StatusCode CanonicalCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNone: return absl::StatusCode::kOk;
    case ErrorKind::kBudgetExhausted: return absl::StatusCode::kResourceExhausted;
    case ErrorKind::kInsufficientPopulation:
    case ErrorKind::kZeroQualifiedGroup:
      return absl::StatusCode::kFailedPrecondition;
    case ErrorKind::kUnknownAudience: return absl::StatusCode::kNotFound;
    case ErrorKind::kDuplicateAudience: return absl::StatusCode::kAlreadyExists;
    case ErrorKind::kUnsupportedMessage: return absl::StatusCode::kUnimplemented;
    case ErrorKind::kTransport: return absl::StatusCode::kUnavailable;
    default: return absl::StatusCode::kInvalidArgument;
  }
}

inline absl::Status MakeError(ErrorKind kind, absl::string_view message) {
  absl::Status status(CanonicalCode(kind),
                      absl::StrCat(ErrorKindName(kind), ": ", message));
  status.SetPayload(kErrorKindPayload, absl::Cord(ErrorKindName(kind)));
  return status;
}

inline absl::Status BudgetExhaustedError(double remaining) {
  absl::Status status =
      MakeError(ErrorKind::kBudgetExhausted,
                absl::StrCat("remaining budget ", FormatDouble(remaining)));
  status.SetPayload(kRemainingBudgetPayload, absl::Cord(FormatDouble(remaining)));
  return status;
}

inline ErrorKind ErrorKindOf(const absl::Status& status) {
  if (status.ok()) return ErrorKind::kNone;
  auto payload = status.GetPayload(kErrorKindPayload);
  if (!payload.has_value()) return ErrorKind::kNone;
  return ErrorKindFromName(std::string(*payload));
}

// Remaining budget carried by a BudgetExhausted status, if any.
inline std::optional<double> RemainingBudgetOf(const absl::Status& status) {
  auto payload = status.GetPayload(kRemainingBudgetPayload);
  if (!payload.has_value()) return std::nullopt;
  return ParseDouble(std::string(*payload));
}

}  // namespace ppaudit

#define PPAUDIT_RETURN_IF_ERROR(expr)        \
  do {                                       \
    ::absl::Status _status = (expr);         \
    if (!_status.ok()) return _status;       \
  } while (0)

#define PPAUDIT_CONCAT_INNER(a, b) a##b
#define PPAUDIT_CONCAT(a, b) PPAUDIT_CONCAT_INNER(a, b)
#define PPAUDIT_ASSIGN_OR_RETURN_IMPL(tmp, lhs, expr) \
  auto tmp = (expr);                                  \
  if (!tmp.ok()) return tmp.status();                 \
  lhs = std::move(tmp).value()
#define PPAUDIT_ASSIGN_OR_RETURN(lhs, expr) \
  PPAUDIT_ASSIGN_OR_RETURN_IMPL(PPAUDIT_CONCAT(_statusor_, __LINE__), lhs, expr)
