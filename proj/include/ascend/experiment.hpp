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

// The experiment state machine. Every mutation is expressed as a LogRecord:
// a command decides what happens, hands the record to the sink, then folds it
// into the state with apply(). Replay runs apply() alone, so the live path
// and recovery share one set of transitions.

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ascend/allocator.hpp"
#include "ascend/experiment_state.hpp"

namespace ascend {

/// Command issued in a status that does not allow it.
class NotRunning : public std::runtime_error {
 public:
  NotRunning(ExperimentStatus status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  ExperimentStatus status() const { return status_; }

 private:
  ExperimentStatus status_;
};

/// advance() called before every maturity quota was filled.
class NotMature : public std::runtime_error {
 public:
  explicit NotMature(std::vector<allocator::Remaining> shortfall);
  const std::vector<allocator::Remaining>& shortfall() const { return shortfall_; }

 private:
  std::vector<allocator::Remaining> shortfall_;
};

/// A record that cannot be folded into the state it was applied to.
class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using RecordSink = std::function<void(const LogRecord&)>;

struct AssignResult {
  std::uint64_t candidate_id = 0;
  std::int64_t sticky_until = 0;
  bool new_assignment = false;
  bool impression_counted = false;
};

struct ConversionResult {
  bool attributed = false;
  std::optional<std::uint64_t> candidate_id;
  std::string reason;  // "attributed", "unattributed" or "duplicate"
};

/// Folds one record into `state`. Throws ReplayError on any inconsistency.
void apply(ExperimentState& state, const LogRecord& record);

/// Estimate for a candidate; empty when it has no impressions.
std::optional<stats::FitnessEstimate> estimate_of(const Candidate& candidate);

class Experiment {
 public:
  /// Creates a draft experiment and emits its experiment_created record.
  Experiment(const ExperimentConfig& config, std::int64_t now, RecordSink sink);

  /// Resumes from a replayed state.
  Experiment(ExperimentState state, RecordSink sink);

  /// draft -> running; computes and logs the initial population.
  void start(std::int64_t now);

  /// Routes a user to a design. `extra` fields are merged into the payload
  /// of any record written (e.g. an idempotency key).
  AssignResult assign(std::string_view user_id, std::int64_t now,
                      const nlohmann::json& extra = nlohmann::json::object());

  ConversionResult record_conversion(std::string_view user_id, std::int64_t now,
                                     const nlohmann::json& extra = nlohmann::json::object());

  /// Judges the current generation. Throws NotMature with the per-candidate
  /// shortfall when quotas are not yet filled.
  GenerationReport advance(std::int64_t now);

  void stop(std::int64_t now, const std::string& reason);

  const ExperimentState& state() const { return state_; }
  const ExperimentConfig& config() const { return *state_.config; }

  /// Replaces observed conversion rates in ranking and parent selection.
  /// The label is logged with each generation so replay knows whether it
  /// can re-derive the outcome.
  void set_fitness(FitnessFn fitness, std::string label);

  std::optional<std::uint64_t> best_id() const;

 private:
  void commit(RecordKind kind, std::int64_t now, nlohmann::json payload);
  void require_running(std::string_view action) const;
  void after_assignment(std::int64_t now);

  ExperimentState state_;
  RecordSink sink_;
  FitnessFn fitness_ = observed_fitness;
  std::string fitness_label_ = "observed";
};

}  // namespace ascend
