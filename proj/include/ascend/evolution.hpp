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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ascend/rng.hpp"
#include "ascend/search_space.hpp"
#include "ascend/stats.hpp"

namespace ascend {

enum class CandidateStatus { kActive, kDiscarded, kControl };

const char* to_string(CandidateStatus status);
CandidateStatus candidate_status_from_string(std::string_view s);

struct Candidate {
  std::uint64_t id = 0;
  Genome genome;
  std::uint32_t birth_generation = 0;
  std::uint64_t impressions = 0;
  std::uint64_t conversions = 0;
  /// Impressions received since the current generation began; drives the
  /// maturity quota.
  std::uint64_t generation_impressions = 0;
  CandidateStatus status = CandidateStatus::kActive;

  double rate() const {
    return impressions == 0 ? 0.0
                            : static_cast<double>(conversions) / static_cast<double>(impressions);
  }
  bool is_control() const { return status == CandidateStatus::kControl; }
  bool is_active() const { return status == CandidateStatus::kActive; }

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

enum class CrossoverKind { kSinglePoint, kUniform };

struct EvolutionConfig {
  std::uint32_t population_size = 8;  // n: retained and bred per generation
  std::uint64_t maturity_age = 2000;  // m: impressions per candidate per generation
  double mutation_probability = 0.2;
  std::uint32_t max_generations = 4;
  std::uint64_t rng_seed = 42;
  std::uint32_t initial_population_cap = 64;  // includes Control
  double control_holdout_fraction = 0.1;
  CrossoverKind crossover = CrossoverKind::kSinglePoint;
  std::uint32_t duplicate_retries = 20;

  std::optional<std::uint64_t> interaction_budget;
  /// Keep serving the final elites after the last generation is judged,
  /// until the budget is spent or an operator stops the experiment.
  bool serve_after_final_generation = false;
  /// Stop once the best candidate's CI clears control's (and the optional
  /// improvement target is met).
  bool stop_on_significance = false;
  std::optional<double> improvement_target_pct;

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

/// Scores a candidate for ranking and parent selection. The default is the
/// observed cumulative conversion rate; the simulator can inject true rates.
using FitnessFn = std::function<double(const Candidate&)>;

double observed_fitness(const Candidate& candidate);

struct CandidateFitness {
  std::uint64_t id = 0;
  double fitness = 0.0;
  stats::FitnessEstimate estimate;  // zero-width when a candidate has no impressions

  friend bool operator==(const CandidateFitness&, const CandidateFitness&) = default;
};

struct GenerationReport {
  std::uint32_t generation = 0;
  std::vector<CandidateFitness> evaluated;
  std::vector<std::uint64_t> retained;
  std::vector<std::uint64_t> discarded;
  std::vector<std::uint64_t> bred;
  std::optional<std::uint64_t> best_id;

  friend bool operator==(const GenerationReport&, const GenerationReport&) = default;
};

/// Control (id 0) followed by its single-change neighbours in element/value
/// order, ids 1..k. When there are more neighbours than cap - 1, a uniform
/// sample of cap - 1 of them is kept, order preserved.
std::vector<Candidate> initialize_population(const SearchSpace& space,
                                             const EvolutionConfig& cfg, Rng& rng);

/// Fitness-proportionate draw; uniform when every fitness is zero.
std::size_t select_parent(std::span<const double> fitness, Rng& rng);

/// Child takes elements [0, cut) from a and [cut, end) from b.
Genome crossover_at(const Genome& a, const Genome& b, std::size_t cut);

Genome crossover(const Genome& a, const Genome& b, CrossoverKind kind, Rng& rng);

Genome mutate(const SearchSpace& space, const Genome& genome, double mutation_probability,
              Rng& rng);

/// Breeds cfg.population_size offspring from `parents`. Offspring that
/// duplicate a genome in `existing` (or an earlier offspring) are re-drawn up
/// to cfg.duplicate_retries times and then admitted.
std::vector<Candidate> breed(const SearchSpace& space, const EvolutionConfig& cfg,
                             std::span<const Candidate> parents,
                             std::span<const double> parent_fitness,
                             std::span<const Genome> existing, std::uint64_t first_id,
                             std::uint32_t birth_generation, Rng& rng);

/// Orders by fitness desc, impressions desc, id asc.
bool ranks_before(const Candidate& a, double fitness_a, const Candidate& b, double fitness_b);

struct AdvancePlan {
  GenerationReport report;
  std::vector<Candidate> offspring;
};

/// Judges the active non-control candidates of the current generation:
/// the top n are retained, the rest discarded, and (if `breed_offspring`)
/// n offspring are bred from the retained set. Pure; the caller applies it.
AdvancePlan plan_advance(const SearchSpace& space, const EvolutionConfig& cfg,
                         std::span<const Candidate> candidates, std::uint32_t generation,
                         const FitnessFn& fitness, bool breed_offspring);

/// Best-so-far: highest-ranked non-discarded, non-control candidate whose
/// cumulative impressions reached the maturity age.
std::optional<std::uint64_t> best_candidate(std::span<const Candidate> candidates,
                                            std::uint64_t maturity_age,
                                            const FitnessFn& fitness);

struct StoppingInputs {
  std::uint32_t generation = 0;
  std::uint64_t total_interactions = 0;
  std::optional<stats::FitnessEstimate> best;
  std::optional<stats::FitnessEstimate> control;
};

struct StopDecision {
  bool stop = false;
  std::string reason;  // "generations", "budget" or "significance"
};

StopDecision check_stopping(const StoppingInputs& inputs, const EvolutionConfig& cfg);

}  // namespace ascend
