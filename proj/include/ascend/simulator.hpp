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

// Simulated traffic. A hidden logistic conversion model with conjunctive
// interaction terms stands in for real users; exhaustive enumeration of that
// model gives the true optimum to score evolution against.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ascend/experiment.hpp"
#include "json.hpp"

namespace ascend::sim {

double logit(double p);
double logistic(double x);

struct ValueRef {
  std::uint32_t element = 0;
  std::uint32_t value = 0;

  friend bool operator==(const ValueRef&, const ValueRef&) = default;
};

/// Fires only when the genome matches every pair.
struct Interaction {
  std::vector<ValueRef> pairs;
  double delta = 0.0;
};

struct GroundTruthModel {
  double base_logit = 0.0;
  /// main_effects[element][value]; value 0 is the reference and stays 0.
  std::vector<std::vector<double>> main_effects;
  std::vector<Interaction> interactions;

  /// A model with no effects over `space`.
  static GroundTruthModel Flat(const SearchSpace& space, double base_rate);

  void set_main_effect(ValueRef at, double delta);

  /// Throws ValidationError if shapes, references or reference coding are wrong.
  void validate(const SearchSpace& space) const;
};

double true_rate(const GroundTruthModel& model, const Genome& genome);

/// Bernoulli(true_rate) from `rng`.
bool sample_user(const GroundTruthModel& model, const Genome& genome, Rng& rng);

struct Optimum {
  Genome genome;
  double rate = 0.0;
};

/// Exact argmax of true_rate; ties go to the lexicographically smallest genome.
Optimum brute_force_optimum(const GroundTruthModel& model, const SearchSpace& space,
                            std::uint64_t cap = kDefaultEnumerationCap);

enum class FitnessMode { kObserved, kOracle };

struct SimulationScenario {
  ExperimentConfig config;
  GroundTruthModel model;
  std::uint64_t budget = 0;
  std::uint64_t users_per_day = 10'000;
  std::uint64_t seed = 42;
  FitnessMode fitness = FitnessMode::kObserved;

  void validate() const;
};

struct DailyPoint {
  std::uint64_t day = 0;
  std::optional<stats::FitnessEstimate> best;
  std::optional<double> population_mean_rate;
  std::optional<stats::FitnessEstimate> control;
};

struct SimulationTrace {
  std::vector<GenerationReport> generations;
  std::vector<DailyPoint> daily;
  std::uint64_t interactions = 0;
  std::uint64_t conversions = 0;
  std::uint64_t records = 0;
  bool truncated = false;  // budget ran out mid-generation
  std::string stop_reason;
  ExperimentState final_state;
  /// True rate of each generation's best retained candidate.
  std::vector<double> best_true_rate_by_generation;
};

/// Virtual users arrive one per 86'400'000 / users_per_day ms; each is
/// assigned, converts per sample_user, and generations advance as quotas
/// fill. `sink` receives every log record in order.
SimulationTrace run_scenario(const SimulationScenario& scenario, const RecordSink& sink = {});

/// Nine elements, 381,024 designs, Control at 5.61% and a planted optimum at
/// 8.22% carried partly by two interactions; n = 25, m = 2000, four
/// generations and a 599,008-interaction budget.
SimulationScenario build_case_study_scenario();

/// The planted optimum of the case study, for tests.
Genome case_study_optimum();

/// Applies the "scenario" section of a config document. A "preset":
/// "case_study" section starts from build_case_study_scenario().
SimulationScenario parse_scenario(const nlohmann::json& doc);

nlohmann::json model_to_json(const GroundTruthModel& model, const SearchSpace& space);

}  // namespace ascend::sim
