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

#include "ascend/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "ascend/codec.hpp"

namespace ascend {

using nlohmann::json;

const char* to_string(ExperimentStatus status) {
  switch (status) {
    case ExperimentStatus::kDraft:
      return "draft";
    case ExperimentStatus::kRunning:
      return "running";
    case ExperimentStatus::kStopped:
      return "stopped";
  }
  return "?";
}

namespace {

constexpr std::pair<RecordKind, const char*> kKindNames[] = {
    {RecordKind::kExperimentCreated, "experiment_created"},
    {RecordKind::kStarted, "started"},
    {RecordKind::kAssignment, "assignment"},
    {RecordKind::kImpression, "impression"},
    {RecordKind::kConversion, "conversion"},
    {RecordKind::kGenerationAdvanced, "generation_advanced"},
    {RecordKind::kStopped, "stopped"},
};

json rng_key(std::uint64_t seed, std::string_view stream, std::uint64_t counter) {
  return json{{"seed", seed}, {"stream", stream}, {"counter", counter}};
}

Candidate& candidate_at(ExperimentState& state, const json& id_field, const LogRecord& record) {
  const auto id = id_field.get<std::uint64_t>();
  if (id >= state.candidates.size()) {
    throw ReplayError(fmt::format("record {}: unknown candidate {}", record.sequence, id));
  }
  return state.candidates[id];
}

void count_impression(ExperimentState& state, Candidate& c, const LogRecord& record) {
  if (c.status == CandidateStatus::kDiscarded) {
    throw ReplayError(
        fmt::format("record {}: impression for discarded candidate {}", record.sequence, c.id));
  }
  ++c.impressions;
  ++c.generation_impressions;
  ++state.total_impressions;
}

void apply_generation(ExperimentState& state, const LogRecord& record) {
  const auto& p = record.payload;
  GenerationReport report = report_from_json(p.at("report"));
  if (report.generation != state.generation) {
    throw ReplayError(fmt::format("record {}: report for generation {} at generation {}",
                                  record.sequence, report.generation, state.generation));
  }
  if (p.value("fitness", std::string("observed")) == "observed") {
    // Outcome must be re-derivable from the pre-state and the checkpointed key.
    const bool final = p.at("final").get<bool>();
    auto plan = plan_advance(state.config->space, state.config->evolution, state.candidates,
                             state.generation, observed_fitness, !final);
    if (!(plan.report == report)) {
      throw ReplayError(fmt::format("record {}: generation outcome does not replay",
                                    record.sequence));
    }
  }
  // Validate everything before touching the state.
  for (auto id : report.discarded) {
    if (!candidate_at(state, json(id), record).is_active()) {
      throw ReplayError(fmt::format("record {}: discarding inactive {}", record.sequence, id));
    }
  }
  std::vector<Candidate> offspring;
  for (const auto& o : p.at("offspring")) {
    Candidate c = candidate_from_json(o);
    if (c.id != state.candidates.size() + offspring.size()) {
      throw ReplayError(fmt::format("record {}: offspring id {} out of order", record.sequence,
                                    c.id));
    }
    require_valid(state.config->space, c.genome);
    c.status = CandidateStatus::kActive;
    c.impressions = c.conversions = c.generation_impressions = 0;
    offspring.push_back(std::move(c));
  }
  const bool final = p.at("final").get<bool>();

  for (auto id : report.discarded) state.candidates[id].status = CandidateStatus::kDiscarded;
  for (auto& c : offspring) state.candidates.push_back(std::move(c));
  for (auto& c : state.candidates) {
    if (c.status != CandidateStatus::kDiscarded) c.generation_impressions = 0;
  }
  std::erase_if(state.assignments,
                [&](const auto& entry) { return !entry.second.live_at(record.timestamp); });
  ++state.generation;
  if (final) state.evolution_complete = true;
  state.history.push_back(std::move(report));
}

}  // namespace

const char* to_string(RecordKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

RecordKind record_kind_from_string(std::string_view s) {
  for (const auto& [k, name] : kKindNames) {
    if (s == name) return k;
  }
  throw ValidationError(fmt::format("unknown record kind '{}'", s));
}

NotMature::NotMature(std::vector<allocator::Remaining> shortfall)
    : std::runtime_error(fmt::format("{} candidate(s) have not reached maturity",
                                     shortfall.size())),
      shortfall_(std::move(shortfall)) {}

std::optional<stats::FitnessEstimate> estimate_of(const Candidate& candidate) {
  if (candidate.impressions == 0) return std::nullopt;
  return stats::estimate(candidate.conversions, candidate.impressions);
}

void apply(ExperimentState& state, const LogRecord& record) {
  if (record.sequence != state.last_sequence + 1) {
    throw ReplayError(fmt::format("sequence gap: expected {}, got {}", state.last_sequence + 1,
                                  record.sequence));
  }
  if (record.kind != RecordKind::kExperimentCreated && !state.config) {
    throw ReplayError(fmt::format("record {}: no experiment_created record", record.sequence));
  }
  const auto& p = record.payload;
  try {
    switch (record.kind) {
      case RecordKind::kExperimentCreated: {
        if (state.config) throw ReplayError("duplicate experiment_created record");
        state.config =
            std::make_shared<const ExperimentConfig>(parse_experiment_config(p.at("config")));
        state.created_at = record.timestamp;
        break;
      }
      case RecordKind::kStarted: {
        if (state.status != ExperimentStatus::kDraft) throw ReplayError("start outside draft");
        for (const auto& entry : p.at("population")) {
          Candidate c = candidate_from_json(entry);
          if (c.id != state.candidates.size()) throw ReplayError("population ids out of order");
          require_valid(state.config->space, c.genome);
          state.candidates.push_back(std::move(c));
        }
        if (state.candidates.empty() || !state.candidates.front().is_control()) {
          throw ReplayError("initial population lacks Control");
        }
        state.status = ExperimentStatus::kRunning;
        break;
      }
      case RecordKind::kAssignment: {
        if (state.status != ExperimentStatus::kRunning) throw ReplayError("assignment while not running");
        auto& c = candidate_at(state, p.at("candidate_id"), record);
        count_impression(state, c, record);
        AssignmentRecord rec;
        rec.user_id = p.at("user_id").get<std::string>();
        rec.candidate_id = c.id;
        rec.assigned_at = p.at("assigned_at").get<std::int64_t>();
        rec.expires_at = p.at("expires_at").get<std::int64_t>();
        state.assignments.insert_or_assign(rec.user_id, rec);
        break;
      }
      case RecordKind::kImpression: {
        if (state.status != ExperimentStatus::kRunning) throw ReplayError("impression while not running");
        count_impression(state, candidate_at(state, p.at("candidate_id"), record), record);
        break;
      }
      case RecordKind::kConversion: {
        if (!p.at("attributed").get<bool>()) {
          ++state.unattributed_conversions;
          break;
        }
        auto& c = candidate_at(state, p.at("candidate_id"), record);
        const auto user = p.at("user_id").get<std::string>();
        auto it = state.assignments.find(user);
        if (it == state.assignments.end() || it->second.candidate_id != c.id ||
            it->second.converted) {
          throw ReplayError(fmt::format("record {}: conversion without a matching assignment",
                                        record.sequence));
        }
        if (c.conversions + 1 > c.impressions) {
          throw ReplayError(fmt::format("record {}: conversions would exceed impressions",
                                        record.sequence));
        }
        it->second.converted = true;
        ++c.conversions;
        ++state.total_conversions;
        break;
      }
      case RecordKind::kGenerationAdvanced: {
        if (state.status != ExperimentStatus::kRunning || state.evolution_complete) {
          throw ReplayError("generation advance while not evolving");
        }
        apply_generation(state, record);
        break;
      }
      case RecordKind::kStopped: {
        if (state.status != ExperimentStatus::kRunning) throw ReplayError("stop while not running");
        state.status = ExperimentStatus::kStopped;
        state.stop_reason = p.at("reason").get<std::string>();
        break;
      }
    }
  } catch (const json::exception& e) {
    throw ReplayError(fmt::format("record {}: malformed payload: {}", record.sequence, e.what()));
  } catch (const ValidationError& e) {
    throw ReplayError(fmt::format("record {}: {}", record.sequence, e.what()));
  }
  state.last_sequence = record.sequence;
  state.last_timestamp = record.timestamp;
}

Experiment::Experiment(const ExperimentConfig& config, std::int64_t now, RecordSink sink)
    : sink_(std::move(sink)) {
  config.evolution.validate();
  commit(RecordKind::kExperimentCreated, now, json{{"config", canonical_document(config)}});
}

Experiment::Experiment(ExperimentState state, RecordSink sink)
    : state_(std::move(state)), sink_(std::move(sink)) {
  if (!state_.config) throw ReplayError("state has no experiment_created record");
}

void Experiment::commit(RecordKind kind, std::int64_t now, json payload) {
  LogRecord record;
  record.sequence = state_.last_sequence + 1;
  record.kind = kind;
  record.timestamp = now;
  record.payload = std::move(payload);
  // The record is durable before the state moves; a sink failure leaves the
  // state untouched.
  if (sink_) sink_(record);
  apply(state_, record);
}

void Experiment::require_running(std::string_view action) const {
  if (state_.status != ExperimentStatus::kRunning) {
    throw NotRunning(state_.status, fmt::format("cannot {}: experiment is {}", action,
                                                to_string(state_.status)));
  }
}

void Experiment::set_fitness(FitnessFn fitness, std::string label) {
  fitness_ = std::move(fitness);
  fitness_label_ = std::move(label);
}

void Experiment::start(std::int64_t now) {
  if (state_.status != ExperimentStatus::kDraft) {
    throw NotRunning(state_.status, fmt::format("cannot start: experiment is {}",
                                                to_string(state_.status)));
  }
  const auto& evo = config().evolution;
  Rng rng = make_rng(evo.rng_seed, Stream::kInitialize, 0);
  json population = json::array();
  for (const auto& c : initialize_population(config().space, evo, rng)) {
    population.push_back(to_json(c));
  }
  commit(RecordKind::kStarted, now,
         json{{"population", std::move(population)},
              {"rng", rng_key(evo.rng_seed, "initialize", 0)}});
}

AssignResult Experiment::assign(std::string_view user_id, std::int64_t now, const json& extra) {
  require_running("assign");
  AssignResult result;
  if (const AssignmentRecord* sticky = allocator::sticky_assignment(state_, user_id, now)) {
    result.candidate_id = sticky->candidate_id;
    result.sticky_until = sticky->expires_at;
    if (config().allocation.count_sticky_returns) {
      json payload{{"user_id", user_id}, {"candidate_id", sticky->candidate_id}};
      payload.update(extra);
      commit(RecordKind::kImpression, now, std::move(payload));
      result.impression_counted = true;
      after_assignment(now);
    }
    return result;
  }
  const std::uint64_t counter = state_.last_sequence + 1;
  Rng rng = make_rng(config().evolution.rng_seed, Stream::kAssign, counter);
  result.candidate_id = allocator::choose_candidate(state_, rng);
  result.sticky_until = now + config().allocation.sticky_ttl_ms;
  result.new_assignment = true;
  result.impression_counted = true;
  json payload{{"user_id", user_id},
               {"candidate_id", result.candidate_id},
               {"assigned_at", now},
               {"expires_at", result.sticky_until}};
  payload.update(extra);
  commit(RecordKind::kAssignment, now, std::move(payload));
  after_assignment(now);
  return result;
}

void Experiment::after_assignment(std::int64_t now) {
  if (state_.status != ExperimentStatus::kRunning) return;
  if (config().allocation.auto_advance && !state_.evolution_complete &&
      allocator::all_mature(state_)) {
    advance(now);
  }
  if (state_.status != ExperimentStatus::kRunning) return;
  const auto& budget = config().evolution.interaction_budget;
  if (budget && state_.total_impressions >= *budget) stop(now, "budget");
}

ConversionResult Experiment::record_conversion(std::string_view user_id, std::int64_t now,
                                               const json& extra) {
  if (state_.status == ExperimentStatus::kDraft) {
    throw NotRunning(state_.status, "cannot record conversions: experiment is draft");
  }
  ConversionResult result;
  json payload{{"user_id", user_id}};
  const auto it = state_.assignments.find(std::string(user_id));
  if (it == state_.assignments.end() || !it->second.live_at(now)) {
    result.reason = "unattributed";
    payload["candidate_id"] = nullptr;
  } else if (it->second.converted) {
    result.reason = "duplicate";
    result.candidate_id = it->second.candidate_id;
    payload["candidate_id"] = it->second.candidate_id;
  } else {
    result.attributed = true;
    result.reason = "attributed";
    result.candidate_id = it->second.candidate_id;
    payload["candidate_id"] = it->second.candidate_id;
  }
  payload["attributed"] = result.attributed;
  payload["reason"] = result.reason;
  payload.update(extra);
  commit(RecordKind::kConversion, now, std::move(payload));
  return result;
}

GenerationReport Experiment::advance(std::int64_t now) {
  require_running("advance");
  if (state_.evolution_complete) {
    throw NotRunning(state_.status, "cannot advance: final generation already judged");
  }
  std::vector<allocator::Remaining> shortfall;
  for (const auto& r : allocator::maturity_status(state_)) {
    if (r.remaining > 0) shortfall.push_back(r);
  }
  if (!shortfall.empty()) throw NotMature(std::move(shortfall));

  const auto& evo = config().evolution;
  const bool final = state_.generation + 1 >= evo.max_generations;
  AdvancePlan plan = plan_advance(config().space, evo, state_.candidates, state_.generation,
                                  fitness_, !final);
  json offspring = json::array();
  for (const auto& c : plan.offspring) offspring.push_back(to_json(c));
  commit(RecordKind::kGenerationAdvanced, now,
         json{{"report", to_json(plan.report)},
              {"offspring", std::move(offspring)},
              {"final", final},
              {"fitness", fitness_label_},
              {"rng", rng_key(evo.rng_seed, "breed", plan.report.generation)}});

  StoppingInputs inputs;
  inputs.generation = state_.generation;
  inputs.total_interactions = state_.total_impressions;
  if (auto best = best_id()) inputs.best = estimate_of(state_.candidates[*best]);
  inputs.control = estimate_of(state_.candidates.front());
  const StopDecision decision = check_stopping(inputs, evo);
  if (decision.stop) {
    stop(now, decision.reason);
  } else if (final && !evo.serve_after_final_generation) {
    stop(now, "generations");
  }
  return plan.report;
}

void Experiment::stop(std::int64_t now, const std::string& reason) {
  require_running("stop");
  commit(RecordKind::kStopped, now, json{{"reason", reason}});
}

std::optional<std::uint64_t> Experiment::best_id() const {
  if (!state_.config) return std::nullopt;
  return best_candidate(state_.candidates, config().evolution.maturity_age, fitness_);
}

}  // namespace ascend
