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

// Platform-side epsilon-differential privacy: Laplace noise on unit-sensitivity
// histogram bins and sequential-composition budget accounting.

#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "absl/strings/string_view.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "ppaudit/audit_core.hpp"
#include "ppaudit/numeric_format.hpp"
#include "ppaudit/random.hpp"
#include "ppaudit/status.hpp"

namespace ppaudit {

// Inverse CDF of Lap(0, scale) evaluated at u in (0, 1):
// -scale * sign(u - 1/2) * ln(1 - 2|u - 1/2|).
inline double LaplaceInverseCdf(double u, double scale) {
  const double centered = u - 0.5;
  if (centered == 0.0) return 0.0;
  return -scale * std::copysign(1.0, centered) * std::log1p(-2.0 * std::fabs(centered));
}

// A seeded stream of Lap(0, scale) draws. Single owner: the stream position
// is part of its state.
class LaplaceNoiser {
 public:
  static absl::StatusOr<LaplaceNoiser> Create(double scale, uint64_t seed) {
    if (!(scale > 0) || !std::isfinite(scale)) {
      return MakeError(ErrorKind::kInvalidParameter, "Laplace scale must be positive");
    }
    return LaplaceNoiser(scale, seed);
  }

  // Noiser calibrated for an epsilon-DP release of a sensitivity-1 query.
  static absl::StatusOr<LaplaceNoiser> ForEpsilon(double epsilon, uint64_t seed) {
    if (!(epsilon > 0) || !std::isfinite(epsilon)) {
      return MakeError(ErrorKind::kInvalidEpsilon,
                       absl::StrCat("epsilon must be positive, got ", epsilon));
    }
    return LaplaceNoiser(1.0 / epsilon, seed);
  }

  double Sample() { return LaplaceInverseCdf(rng_.Uniform(), scale_); }

  double scale() const { return scale_; }
  uint64_t seed() const { return seed_; }

 private:
  LaplaceNoiser(double scale, uint64_t seed) : scale_(scale), seed_(seed), rng_(seed) {}

  double scale_;
  uint64_t seed_;
  Rng rng_;
};

inline double SampleLaplace(LaplaceNoiser& noiser) { return noiser.Sample(); }

// Per-bin L-infinity sensitivity of a score histogram under add/remove-one
// neighbouring: one user lands in exactly one bin.
inline int HistogramSensitivity(const ScoreDomain& /*domain*/) { return 1; }

// Adds independent Lap(1/epsilon) noise to every bin. The raw counts stay
// here; only the noisy release and the (auditor-known) group size leave.
inline absl::StatusOr<NoisyHistogram> PrivatizeHistogram(const ScoreHistogram& histogram,
                                                         double epsilon,
                                                         LaplaceNoiser& noiser) {
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    return MakeError(ErrorKind::kInvalidEpsilon,
                     absl::StrCat("epsilon must be positive, got ", epsilon));
  }
  const double expected_scale = HistogramSensitivity(ScoreDomain()) / epsilon;
  if (std::fabs(noiser.scale() - expected_scale) > 1e-12 * expected_scale) {
    return MakeError(ErrorKind::kInvalidParameter,
                     absl::StrCat("noiser scale ", noiser.scale(),
                                  " does not match 1/epsilon = ", expected_scale));
  }
  NoisyHistogram out;
  out.group = histogram.group;
  out.n_declared = histogram.n;
  out.epsilon_spent = epsilon;
  out.noisy_counts.reserve(histogram.counts.size());
  for (int64_t count : histogram.counts) {
    out.noisy_counts.push_back(static_cast<double>(count) + noiser.Sample());
  }
  return out;
}

struct LedgerEntry {
  std::string query_id;
  double epsilon = 0.0;
  int64_t timestamp_ms = 0;
  double running_total = 0.0;
};

inline int64_t NowMillis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// Sequential-composition accountant for one auditor. spent never exceeds
// total_epsilon; a rejected charge leaves the ledger untouched.
class BudgetLedger {
 public:
  static absl::StatusOr<BudgetLedger> Create(std::string auditor_id, double total_epsilon) {
    if (!(total_epsilon > 0) || !std::isfinite(total_epsilon)) {
      return MakeError(ErrorKind::kInvalidParameter, "total budget must be positive");
    }
    return BudgetLedger(std::move(auditor_id), total_epsilon);
  }

  absl::StatusOr<LedgerEntry> Charge(absl::string_view query_id, double epsilon,
                                     int64_t timestamp_ms = NowMillis()) {
    if (!(epsilon > 0) || !std::isfinite(epsilon)) {
      return MakeError(ErrorKind::kInvalidEpsilon,
                       absl::StrCat("epsilon must be positive, got ", epsilon));
    }
    const double next = spent_ + epsilon;
    // The slack absorbs summation rounding (0.1 + 0.2 against a total of 0.3).
    if (next > total_ + kSlack * total_) return BudgetExhaustedError(remaining());
    spent_ = next;
    entries_.push_back({std::string(query_id), epsilon, timestamp_ms, spent_});
    return entries_.back();
  }

  const std::string& auditor_id() const { return auditor_id_; }
  static constexpr double kSlack = 1e-12;

  double total() const { return total_; }
  double spent() const { return spent_; }
  double remaining() const { return total_ - spent_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }

 private:
  BudgetLedger(std::string auditor_id, double total)
      : auditor_id_(std::move(auditor_id)), total_(total) {}

  std::string auditor_id_;
  double total_;
  double spent_ = 0.0;
  std::vector<LedgerEntry> entries_;
};

// Ledger record file: one line per charge,
//   query_id <TAB> epsilon <TAB> timestamp_ms <TAB> running_total
inline std::string FormatLedgerLine(const LedgerEntry& e) {
  return absl::StrCat(e.query_id, "\t", FormatDouble(e.epsilon), "\t", e.timestamp_ms,
                      "\t", FormatDouble(e.running_total), "\n");
}

inline absl::StatusOr<LedgerEntry> ParseLedgerLine(absl::string_view line) {
  std::vector<absl::string_view> fields = absl::StrSplit(line, '\t');
  if (fields.size() != 4) {
    return MakeError(ErrorKind::kConfig, absl::StrCat("ledger line has ", fields.size(),
                                                      " fields, expected 4"));
  }
  LedgerEntry e;
  e.query_id = std::string(fields[0]);
  auto eps = ParseDouble(fields[1]);
  auto total = ParseDouble(fields[3]);
  int64_t ts = 0;
  auto [end, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), ts);
  if (!eps || !total || ec != std::errc() || end != fields[2].data() + fields[2].size()) {
    return MakeError(ErrorKind::kConfig, "unparseable ledger line");
  }
  e.epsilon = *eps;
  e.timestamp_ms = ts;
  e.running_total = *total;
  return e;
}

inline bool IsSafeIdentifier(absl::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return id != "." && id != "..";
}

// Thread-safe set of per-auditor ledgers, optionally persisted as one
// append-only record file per auditor under `directory`. Charges are
// linearized by a single mutex and written through before they return, so a
// restarted store replays every epsilon already released.
class LedgerStore {
 public:
  static absl::StatusOr<std::unique_ptr<LedgerStore>> Open(std::filesystem::path directory,
                                                           double total_per_auditor) {
    if (!(total_per_auditor > 0) || !std::isfinite(total_per_auditor)) {
      return MakeError(ErrorKind::kInvalidParameter, "total budget must be positive");
    }
    if (!directory.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(directory, ec);
      if (ec) {
        return MakeError(ErrorKind::kConfig,
                         absl::StrCat("cannot create ledger directory ", directory.string(),
                                      ": ", ec.message()));
      }
    }
    return std::unique_ptr<LedgerStore>(new LedgerStore(std::move(directory), total_per_auditor));
  }

  absl::StatusOr<LedgerEntry> Charge(const std::string& auditor_id, absl::string_view query_id,
                                     double epsilon) {
    if (query_id.find_first_of("\t\n\r") != absl::string_view::npos) {
      return MakeError(ErrorKind::kInvalidParameter, "query id contains control characters");
    }
    std::lock_guard<std::mutex> lock(mu_);
    PPAUDIT_ASSIGN_OR_RETURN(BudgetLedger * ledger, LedgerFor(auditor_id));
    PPAUDIT_ASSIGN_OR_RETURN(LedgerEntry entry, ledger->Charge(query_id, epsilon));
    if (!directory_.empty()) {
      std::ofstream out(PathFor(auditor_id), std::ios::app | std::ios::binary);
      out << FormatLedgerLine(entry);
      out.flush();
      if (!out) return MakeError(ErrorKind::kConfig, "ledger write failed");
    }
    return entry;
  }

  absl::StatusOr<double> Remaining(const std::string& auditor_id) {
    std::lock_guard<std::mutex> lock(mu_);
    PPAUDIT_ASSIGN_OR_RETURN(BudgetLedger * ledger, LedgerFor(auditor_id));
    return ledger->remaining();
  }

  absl::StatusOr<BudgetLedger> Snapshot(const std::string& auditor_id) {
    std::lock_guard<std::mutex> lock(mu_);
    PPAUDIT_ASSIGN_OR_RETURN(BudgetLedger * ledger, LedgerFor(auditor_id));
    return *ledger;
  }

  double total_per_auditor() const { return total_; }

 private:
  LedgerStore(std::filesystem::path directory, double total)
      : directory_(std::move(directory)), total_(total) {}

  std::filesystem::path PathFor(const std::string& auditor_id) const {
    return directory_ / (auditor_id + ".ledger");
  }

  absl::StatusOr<BudgetLedger*> LedgerFor(const std::string& auditor_id) {
    auto it = ledgers_.find(auditor_id);
    if (it != ledgers_.end()) return &it->second;
    if (!IsSafeIdentifier(auditor_id)) {
      return MakeError(ErrorKind::kInvalidParameter,
                       absl::StrCat("invalid auditor id '", auditor_id, "'"));
    }
    PPAUDIT_ASSIGN_OR_RETURN(BudgetLedger ledger, BudgetLedger::Create(auditor_id, total_));
    if (!directory_.empty()) PPAUDIT_RETURN_IF_ERROR(Replay(PathFor(auditor_id), ledger));
    return &ledgers_.emplace(auditor_id, std::move(ledger)).first->second;
  }

  // Re-applies persisted charges. A torn final line (no trailing newline)
  // is cut off: its charge never completed, so no noise was released for it.
  absl::Status Replay(const std::filesystem::path& path, BudgetLedger& ledger) {
    if (!std::filesystem::exists(path)) return absl::OkStatus();
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string content = buffer.str();
    size_t complete = content.rfind('\n');
    complete = complete == std::string::npos ? 0 : complete + 1;
    if (complete != content.size()) {
      in.close();
      std::filesystem::resize_file(path, complete);
      content.resize(complete);
    }
    int line_number = 0;
    for (absl::string_view line : absl::StrSplit(content, '\n', absl::SkipEmpty())) {
      ++line_number;
      auto entry = ParseLedgerLine(line);
      if (!entry.ok()) {
        return MakeError(ErrorKind::kConfig, absl::StrCat(path.string(), ":", line_number, ": ",
                                                          entry.status().message()));
      }
      auto applied = ledger.Charge(entry->query_id, entry->epsilon, entry->timestamp_ms);
      if (!applied.ok()) {
        return MakeError(ErrorKind::kConfig,
                         absl::StrCat(path.string(), ":", line_number,
                                      ": persisted charges exceed the configured total"));
      }
    }
    return absl::OkStatus();
  }

  std::filesystem::path directory_;
  double total_;
  std::mutex mu_;
  std::map<std::string, BudgetLedger> ledgers_;
};

}  // namespace ppaudit
