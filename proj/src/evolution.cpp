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

#include "ascend/evolution.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <set>

namespace ascend {

const char* to_string(CandidateStatus status) {
  switch (status) {
    case CandidateStatus::kActive:
      return "active";
    case CandidateStatus::kDiscarded:
      return "discarded";
    case CandidateStatus::kControl:
      return "control";
  }
  return "?";
}

CandidateStatus candidate_status_from_string(std::string_view s) {
  if (s == "active") return CandidateStatus::kActive;
  if (s == "discarded") return CandidateStatus::kDiscarded;
  if (s == "control") return CandidateStatus::kControl;
  throw ValidationError(fmt::format("unknown candidate status '{}'", s));
}

void EvolutionConfig::validate() const {
  auto fail = [](std::string_view field, std::string_view rule) {
    throw ValidationError(fmt::format("evolution.{}: {}", field, rule));
  };
  if (population_size < 2) fail("population_size", "must be ≥ 2");
  if (maturity_age < 1) fail("maturity_age", "must be ≥ 1");
  if (!(mutation_probability >= 0.0 && mutation_probability <= 1.0)) {
    fail("mutation_probability", "must be in [0, 1]");
  }
  if (max_generations < 1) fail("max_generations", "must be ≥ 1");
  if (initial_population_cap < 1) fail("initial_population_cap", "must be ≥ 1");
  if (!(control_holdout_fraction >= 0.0 && control_holdout_fraction < 1.0)) {
    fail("control_holdout_fraction", "must be in [0, 1)");
  }
  if (interaction_budget && *interaction_budget < 1) fail("interaction_budget", "must be ≥ 1");
}

double observed_fitness(const Candidate& candidate) { return candidate.rate(); }

std::vector<Candidate> initialize_population(const SearchSpace& space,
                                             const EvolutionConfig& cfg, Rng& rng) {
  std::vector<Genome> neighbours;
  const Genome control = space.control();
  for (std::size_t e = 0; e < space.element_count(); ++e) {
    for (std::uint32_t v = 1; v < space.value_count(e); ++v) {
      Genome g = control;
      g.choices[e] = v;
      neighbours.push_back(std::move(g));
    }
  }
  const std::size_t keep = cfg.initial_population_cap - 1;
  if (neighbours.size() > keep) {
    // Selection sampling (Knuth's algorithm S): uniform subset, order kept.
    std::vector<Genome> sample;
    sample.reserve(keep);
    std::size_t remaining = neighbours.size();
    for (auto& g : neighbours) {
      if (uniform_below(rng, remaining) < keep - sample.size()) sample.push_back(std::move(g));
      --remaining;
      if (sample.size() == keep) break;
    }
    neighbours = std::move(sample);
  }

  std::vector<Candidate> population;
  population.reserve(neighbours.size() + 1);
  Candidate root;
  root.id = 0;
  root.genome = control;
  root.status = CandidateStatus::kControl;
  population.push_back(std::move(root));
  for (auto& g : neighbours) {
    Candidate c;
    c.id = population.size();
    c.genome = std::move(g);
    population.push_back(std::move(c));
  }
  return population;
}

std::size_t select_parent(std::span<const double> fitness, Rng& rng) {
  if (fitness.empty()) throw std::invalid_argument("select_parent: empty population");
  const double total = std::accumulate(fitness.begin(), fitness.end(), 0.0);
  if (!(total > 0.0)) return uniform_below(rng, fitness.size());
  const double target = uniform01(rng) * total;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < fitness.size(); ++i) {
    cumulative += fitness[i];
    if (target < cumulative) return i;
  }
  // Rounding can leave target just above the final partial sum.
  for (std::size_t i = fitness.size(); i-- > 0;) {
    if (fitness[i] > 0.0) return i;
  }
  return fitness.size() - 1;
}

Genome crossover_at(const Genome& a, const Genome& b, std::size_t cut) {
  Genome child = a;
  for (std::size_t i = cut; i < child.choices.size(); ++i) child.choices[i] = b.choices[i];
  return child;
}

Genome crossover(const Genome& a, const Genome& b, CrossoverKind kind, Rng& rng) {
  const std::size_t n = a.choices.size();
  if (n < 2) return a;
  if (kind == CrossoverKind::kSinglePoint) {
    const std::size_t cut = 1 + uniform_below(rng, n - 1);
    return crossover_at(a, b, cut);
  }
  Genome child = a;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng() >> 63) child.choices[i] = b.choices[i];
  }
  return child;
}

Genome mutate(const SearchSpace& space, const Genome& genome, double mutation_probability,
              Rng& rng) {
  if (mutation_probability <= 0.0) return genome;
  if (mutation_probability < 1.0 && uniform01(rng) >= mutation_probability) return genome;
  Genome out = genome;
  const std::size_t element = uniform_below(rng, space.element_count());
  const std::uint32_t count = space.value_count(element);
  // Uniform over the count-1 values other than the current one.
  auto value = static_cast<std::uint32_t>(uniform_below(rng, count - 1));
  if (value >= genome.choices[element]) ++value;
  out.choices[element] = value;
  return out;
}

std::vector<Candidate> breed(const SearchSpace& space, const EvolutionConfig& cfg,
                             std::span<const Candidate> parents,
                             std::span<const double> parent_fitness,
                             std::span<const Genome> existing, std::uint64_t first_id,
                             std::uint32_t birth_generation, Rng& rng) {
  if (parents.empty()) throw std::invalid_argument("breed: no parents");
  std::set<Genome> seen(existing.begin(), existing.end());
  std::vector<Candidate> offspring;
  offspring.reserve(cfg.population_size);
  for (std::uint32_t k = 0; k < cfg.population_size; ++k) {
    Genome child;
    for (std::uint32_t attempt = 0;; ++attempt) {
      const auto& mother = parents[select_parent(parent_fitness, rng)].genome;
      const auto& father = parents[select_parent(parent_fitness, rng)].genome;
      child = mutate(space, crossover(mother, father, cfg.crossover, rng),
                     cfg.mutation_probability, rng);
      if (!seen.contains(child) || attempt >= cfg.duplicate_retries) break;
    }
    seen.insert(child);
    Candidate c;
    c.id = first_id + k;
    c.genome = std::move(child);
    c.birth_generation = birth_generation;
    offspring.push_back(std::move(c));
  }
  return offspring;
}

bool ranks_before(const Candidate& a, double fitness_a, const Candidate& b, double fitness_b) {
  if (fitness_a != fitness_b) return fitness_a > fitness_b;
  if (a.impressions != b.impressions) return a.impressions > b.impressions;
  return a.id < b.id;
}

namespace {

stats::FitnessEstimate estimate_or_empty(const Candidate& c) {
  if (c.impressions == 0) return stats::FitnessEstimate{};
  return stats::estimate(c.conversions, c.impressions);
}

}  // namespace

AdvancePlan plan_advance(const SearchSpace& space, const EvolutionConfig& cfg,
                         std::span<const Candidate> candidates, std::uint32_t generation,
                         const FitnessFn& fitness, bool breed_offspring) {
  AdvancePlan plan;
  plan.report.generation = generation;

  std::vector<std::size_t> pool;
  std::vector<double> score(candidates.size(), 0.0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].is_active()) continue;
    pool.push_back(i);
    score[i] = fitness(candidates[i]);
    plan.report.evaluated.push_back(
        CandidateFitness{candidates[i].id, score[i], estimate_or_empty(candidates[i])});
  }

  std::vector<std::size_t> ranked = pool;
  std::sort(ranked.begin(), ranked.end(), [&](std::size_t x, std::size_t y) {
    return ranks_before(candidates[x], score[x], candidates[y], score[y]);
  });
  const std::size_t keep = std::min<std::size_t>(cfg.population_size, ranked.size());
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    (r < keep ? plan.report.retained : plan.report.discarded).push_back(candidates[ranked[r]].id);
  }
  if (keep > 0) plan.report.best_id = plan.report.retained.front();

  if (breed_offspring && keep > 0) {
    std::vector<Candidate> parents;
    std::vector<double> parent_fitness;
    for (std::size_t r = 0; r < keep; ++r) {
      parents.push_back(candidates[ranked[r]]);
      parent_fitness.push_back(score[ranked[r]]);
    }
    std::vector<Genome> existing;
    for (const auto& p : parents) existing.push_back(p.genome);
    for (const auto& c : candidates) {
      if (c.is_control()) existing.push_back(c.genome);
    }
    std::uint64_t next_id = 0;
    for (const auto& c : candidates) next_id = std::max(next_id, c.id + 1);
    Rng rng = make_rng(cfg.rng_seed, Stream::kBreed, generation);
    plan.offspring =
        breed(space, cfg, parents, parent_fitness, existing, next_id, generation + 1, rng);
    for (const auto& child : plan.offspring) plan.report.bred.push_back(child.id);
  }
  return plan;
}

std::optional<std::uint64_t> best_candidate(std::span<const Candidate> candidates,
                                            std::uint64_t maturity_age,
                                            const FitnessFn& fitness) {
  const Candidate* best = nullptr;
  double best_score = 0.0;
  for (const auto& c : candidates) {
    if (!c.is_active() || c.impressions < maturity_age) continue;
    const double s = fitness(c);
    if (best == nullptr || ranks_before(c, s, *best, best_score)) {
      best = &c;
      best_score = s;
    }
  }
  if (best == nullptr) return std::nullopt;
  return best->id;
}

StopDecision check_stopping(const StoppingInputs& inputs, const EvolutionConfig& cfg) {
  if (cfg.interaction_budget && inputs.total_interactions >= *cfg.interaction_budget) {
    return {true, "budget"};
  }
  if (inputs.generation >= cfg.max_generations && !cfg.serve_after_final_generation) {
    return {true, "generations"};
  }
  if (cfg.stop_on_significance && inputs.best && inputs.control &&
      inputs.best->ci_low > inputs.control->ci_high) {
    if (!cfg.improvement_target_pct) return {true, "significance"};
    if (inputs.control->rate > 0.0 &&
        stats::improvement_over_control(inputs.best->rate, inputs.control->rate) >=
            *cfg.improvement_target_pct) {
      return {true, "significance"};
    }
  }
  return {};
}

}  // namespace ascend
