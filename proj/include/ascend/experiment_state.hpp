// Copyright 2026 The Ascend Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "json.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ascend/evolution.hpp"
#include "ascend/search_space.hpp"

namespace ascend {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::int64_t kDefaultStickyTtlMs = 24LL * 60 * 60 * 1000;

struct AllocationConfig {
  std::int64_t sticky_ttl_ms = kDefaultStickyTtlMs;
  /// Count a returning visit within the sticky window as a new impression.
  bool count_sticky_returns = false;
  /// Advance the generation as soon as every maturity quota is filled.
  bool auto_advance = true;
};

struct ExperimentConfig {
  std::string experiment_id;
  std::string name;
  SearchSpace space;
  EvolutionConfig evolution;
  AllocationConfig allocation;
  /// The document the config was parsed from, echoed back verbatim.
  nlohmann::json document;
};

enum class ExperimentStatus { kDraft, kRunning, kStopped };

const char* to_string(ExperimentStatus status);

struct AssignmentRecord {
  std::string user_id;
  std::uint64_t candidate_id = 0;
  std::int64_t assigned_at = 0;
  std::int64_t expires_at = 0;
  bool converted = false;

  bool live_at(std::int64_t now) const { return now < expires_at; }
  friend bool operator==(const AssignmentRecord&, const AssignmentRecord&) = default;
};

/// Everything the experiment knows. A pure fold over its log records.
struct ExperimentState {
  std::shared_ptr<const ExperimentConfig> config;
  ExperimentStatus status = ExperimentStatus::kDraft;
  std::uint32_t generation = 0;
  /// The last generation has been judged; elites keep serving but nothing
  /// more is bred.
  bool evolution_complete = false;
  std::vector<Candidate> candidates;  // index == id
  std::unordered_map<std::string, AssignmentRecord> assignments;
  std::uint64_t total_impressions = 0;
  std::uint64_t total_conversions = 0;
  std::uint64_t unattributed_conversions = 0;
  std::uint64_t last_sequence = 0;
  std::int64_t created_at = 0;
  std::int64_t last_timestamp = 0;
  std::vector<GenerationReport> history;
  std::string stop_reason;

  const Candidate* find(std::uint64_t id) const {
    return id < candidates.size() ? &candidates[id] : nullptr;
  }
};

enum class RecordKind {
  kExperimentCreated,
  kStarted,
  kAssignment,
  kImpression,
  kConversion,
  kGenerationAdvanced,
  kStopped,
};

const char* to_string(RecordKind kind);
RecordKind record_kind_from_string(std::string_view s);

struct LogRecord {
  std::uint64_t sequence = 0;
  RecordKind kind = RecordKind::kExperimentCreated;
  std::int64_t timestamp = 0;
  nlohmann::json payload;
};

}  // namespace ascend
