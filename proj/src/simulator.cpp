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

#include "ascend/simulator.hpp"

#include <fmt/format.h>

#include <cmath>

#include "ascend/codec.hpp"

namespace ascend::sim {

using nlohmann::json;

double logit(double p) { return std::log(p / (1.0 - p)); }

double logistic(double x) {
  // Split by sign so neither branch overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

GroundTruthModel GroundTruthModel::Flat(const SearchSpace& space, double base_rate) {
  GroundTruthModel model;
  model.base_logit = logit(base_rate);
  for (std::size_t e = 0; e < space.element_count(); ++e) {
    model.main_effects.emplace_back(space.value_count(e), 0.0);
  }
  return model;
}

void GroundTruthModel::set_main_effect(ValueRef at, double delta) {
  main_effects.at(at.element).at(at.value) = delta;
}

void GroundTruthModel::validate(const SearchSpace& space) const {
  if (!std::isfinite(base_logit)) throw ValidationError("model.base_logit must be finite");
  if (main_effects.size() != space.element_count()) {
    throw ValidationError("model.main_effects must have one row per element");
  }
  for (std::size_t e = 0; e < main_effects.size(); ++e) {
    if (main_effects[e].size() != space.value_count(e)) {
      throw ValidationError(fmt::format("model.main_effects[{}] must have one entry per value", e));
    }
    if (main_effects[e][0] != 0.0) {
      throw ValidationError(
          fmt::format("model.main_effects[{}]: the control value must have zero effect", e));
    }
  }
  for (std::size_t k = 0; k < interactions.size(); ++k) {
    const auto& term = interactions[k];
    if (term.pairs.size() < 2) {
      throw ValidationError(fmt::format("model.interactions[{}]: needs at least 2 pairs", k));
    }
    for (const auto& ref : term.pairs) {
      if (ref.element >= space.element_count() || ref.value >= space.value_count(ref.element)) {
        throw ValidationError(fmt::format("model.interactions[{}]: pair out of range", k));
      }
    }
  }
}

double true_rate(const GroundTruthModel& model, const Genome& genome) {
  double x = model.base_logit;
  for (std::size_t e = 0; e < genome.choices.size(); ++e) {
    x += model.main_effects[e][genome.choices[e]];
  }
  for (const auto& term : model.interactions) {
    bool fires = true;
    for (const auto& ref : term.pairs) fires = fires && genome.choices[ref.element] == ref.value;
    if (fires) x += term.delta;
  }
  return logistic(x);
}

bool sample_user(const GroundTruthModel& model, const Genome& genome, Rng& rng) {
  return uniform01(rng) < true_rate(model, genome);
}

Optimum brute_force_optimum(const GroundTruthModel& model, const SearchSpace& space,
                            std::uint64_t cap) {
  model.validate(space);
  Optimum best;
  bool first = true;
  // Enumeration is lexicographic, so strict > keeps the smallest tied genome.
  for_each_genome(
      space,
      [&](const Genome& g) {
        const double r = true_rate(model, g);
        if (first || r > best.rate) {
          best.genome = g;
          best.rate = r;
          first = false;
        }
      },
      cap);
  return best;
}

void SimulationScenario::validate() const {
  config.evolution.validate();
  model.validate(config.space);
  if (users_per_day < 1) throw ValidationError("scenario.users_per_day must be ≥ 1");
  const std::uint64_t demand =
      std::uint64_t{config.evolution.population_size} * config.evolution.maturity_age;
  if (budget < demand) {
    throw ValidationError(fmt::format(
        "scenario.budget must be ≥ population_size × maturity_age ({})", demand));
  }
}

namespace {

DailyPoint daily_point(const ExperimentState& state, std::uint64_t day) {
  DailyPoint point;
  point.day = day;
  const Candidate* best = nullptr;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& c : state.candidates) {
    if (c.is_control()) {
      point.control = estimate_of(c);
      continue;
    }
    if (!c.is_active() || c.impressions == 0) continue;
    sum += c.rate();
    ++count;
    if (best == nullptr || ranks_before(c, c.rate(), *best, best->rate())) best = &c;
  }
  if (best != nullptr) point.best = estimate_of(*best);
  if (count > 0) point.population_mean_rate = sum / static_cast<double>(count);
  return point;
}

bool mid_generation(const ExperimentState& state) {
  if (state.evolution_complete) return false;
  bool started = false;
  bool filled = true;
  for (const auto& c : state.candidates) {
    if (!c.is_active()) continue;
    started = started || c.generation_impressions > 0;
    filled = filled && c.generation_impressions >= state.config->evolution.maturity_age;
  }
  return started && !filled;
}

}  // namespace

SimulationTrace run_scenario(const SimulationScenario& scenario, const RecordSink& sink) {
  scenario.validate();
  ExperimentConfig config = scenario.config;
  config.evolution.rng_seed = scenario.seed;
  config.evolution.interaction_budget = scenario.budget;
  config.document = canonical_document(config);

  SimulationTrace trace;
  auto counting_sink = [&](const LogRecord& record) {
    ++trace.records;
    if (sink) sink(record);
  };
  Experiment experiment(config, 0, counting_sink);
  const GroundTruthModel& model = scenario.model;
  if (scenario.fitness == FitnessMode::kOracle) {
    experiment.set_fitness([&model](const Candidate& c) { return true_rate(model, c.genome); },
                           "oracle");
  }
  experiment.start(0);

  const std::int64_t ms_per_user =
      std::max<std::int64_t>(1, 86'400'000 / static_cast<std::int64_t>(scenario.users_per_day));
  std::uint64_t i = 0;
  for (; i < scenario.budget; ++i) {
    if (experiment.state().status != ExperimentStatus::kRunning) break;
    const std::int64_t now = static_cast<std::int64_t>(i) * ms_per_user;
    const std::string user = fmt::format("u{}", i);
    const auto assigned = experiment.assign(user, now);
    const Genome& genome = experiment.state().candidates[assigned.candidate_id].genome;
    Rng user_rng = make_rng(scenario.seed, Stream::kUser, i);
    if (sample_user(model, genome, user_rng)) experiment.record_conversion(user, now);
    if ((i + 1) % scenario.users_per_day == 0) {
      trace.daily.push_back(daily_point(experiment.state(), (i + 1) / scenario.users_per_day));
    }
  }
  if (i % scenario.users_per_day != 0) {
    trace.daily.push_back(daily_point(experiment.state(), i / scenario.users_per_day + 1));
  }

  const ExperimentState& state = experiment.state();
  trace.generations = state.history;
  for (const auto& g : state.history) {
    trace.best_true_rate_by_generation.push_back(
        g.best_id ? true_rate(model, state.candidates[*g.best_id].genome) : 0.0);
  }
  trace.interactions = state.total_impressions;
  trace.conversions = state.total_conversions;
  trace.stop_reason = state.stop_reason;
  trace.truncated = state.stop_reason == "budget" && mid_generation(state);
  trace.final_state = state;
  return trace;
}

namespace {

// Case-study landscape, before scaling. Rows follow the element order below;
// entry 0 of each row is the control value.
struct ElementDef {
  const char* name;
  std::vector<std::string> values;
  std::vector<double> effects;
};

std::vector<ElementDef> case_study_elements() {
  return {
      {"background",
       {"white", "yellow", "light_green", "sky", "peach", "lavender", "mint", "light_grey",
        "cream"},
       {0, 0.40, 0.32, 0.15, 0.20, -0.05, 0.05, -0.10, 0.08}},
      {"button_color",
       {"blue", "white", "orange", "green", "red", "black", "yellow"},
       {0, 0.04, -0.04, 0.02, -0.06, -0.10, 0.0}},
      {"headline",
       {"Find the right program", "Your career starts here", "Discover programs near you",
        "Education that fits", "Compare schools", "Take the next step", "Learn online"},
       {0, 0.01, 0.03, -0.05, -0.03, 0.01, -0.08}},
      {"call_to_action",
       {"Request Info", "Get Started", "Find my Program", "Learn More", "Apply Now",
        "See Programs", "Start Now", "Continue", "Search"},
       {0, 0.40, 0.34, -0.05, 0.20, 0.15, -0.03, -0.08, 0.05}},
      {"font_size", {"medium", "small", "large", "x_large"}, {0, -0.05, 0.02, -0.04}},
      {"widget_position", {"right", "left", "center"}, {0, -0.02, 0.01}},
      {"button_text_color", {"white", "black"}, {0, 0.01}},
      {"border", {"none", "thin"}, {0, 0.01}},
      {"icon", {"none", "arrow"}, {0, 0.01}},
  };
}

constexpr double kCaseStudyControlRate = 0.0561;
constexpr double kCaseStudyOptimumRate = 0.0822;

}  // namespace

Genome case_study_optimum() { return Genome{{1, 1, 2, 1, 2, 2, 1, 1, 1}}; }

SimulationScenario build_case_study_scenario() {
  const auto defs = case_study_elements();
  std::vector<ElementSpec> elements;
  for (const auto& d : defs) elements.push_back({d.name, d.values});
  SearchSpace space(std::move(elements));

  GroundTruthModel model = GroundTruthModel::Flat(space, kCaseStudyControlRate);
  for (std::size_t e = 0; e < defs.size(); ++e) model.main_effects[e] = defs[e].effects;
  // Bright background only works with a white button, and the white button
  // only reads clearly with black text.
  model.interactions.push_back({{{0, 1}, {1, 1}}, 0.06});
  model.interactions.push_back({{{1, 1}, {6, 1}}, 0.03});
  model.interactions.push_back({{{0, 2}, {1, 1}}, 0.03});

  // Scale every effect so the planted optimum lands exactly on its target.
  const Genome optimum = case_study_optimum();
  const double raw = logit(true_rate(model, optimum)) - model.base_logit;
  const double scale = (logit(kCaseStudyOptimumRate) - model.base_logit) / raw;
  for (auto& row : model.main_effects) {
    for (auto& d : row) d *= scale;
  }
  for (auto& term : model.interactions) term.delta *= scale;

  EvolutionConfig evo;
  evo.population_size = 25;
  evo.maturity_age = 2000;
  evo.mutation_probability = 0.2;
  evo.max_generations = 4;
  evo.initial_population_cap = 37;
  evo.control_holdout_fraction = 0.1;
  evo.interaction_budget = 599'008;
  evo.serve_after_final_generation = true;

  ExperimentConfig config{"case-study", "Search widget case study", std::move(space), evo,
                          AllocationConfig{}, json::object()};
  config.document = canonical_document(config);

  SimulationScenario scenario{std::move(config), std::move(model)};
  scenario.budget = 599'008;
  scenario.users_per_day = 10'000;
  return scenario;
}

namespace {

ValueRef resolve_ref(const SearchSpace& space, const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("element") || !j.contains("value")) {
    throw ValidationError(path + ": needs \"element\" and \"value\"");
  }
  auto lookup_element = [&]() -> std::uint32_t {
    if (j["element"].is_number_unsigned()) return j["element"].get<std::uint32_t>();
    if (auto e = space.find_element(j["element"].get<std::string>())) {
      return static_cast<std::uint32_t>(*e);
    }
    throw ValidationError(path + ": unknown element " + j["element"].dump());
  };
  const std::uint32_t element = lookup_element();
  if (element >= space.element_count()) throw ValidationError(path + ": element out of range");
  if (j["value"].is_number_unsigned()) return {element, j["value"].get<std::uint32_t>()};
  if (auto v = space.find_value(element, j["value"].get<std::string>())) return {element, *v};
  throw ValidationError(path + ": unknown value " + j["value"].dump());
}

GroundTruthModel parse_model(const SearchSpace& space, const json& m) {
  if (!m.is_object()) throw ValidationError("scenario.model: must be an object");
  double base_logit = 0.0;
  if (m.contains("base_logit")) {
    base_logit = m["base_logit"].get<double>();
  } else if (m.contains("base_rate")) {
    const double rate = m["base_rate"].get<double>();
    if (!(rate > 0.0 && rate < 1.0)) throw ValidationError("scenario.model.base_rate: must be in (0, 1)");
    base_logit = logit(rate);
  } else {
    throw ValidationError("scenario.model: needs base_rate or base_logit");
  }
  GroundTruthModel model = GroundTruthModel::Flat(space, 0.5);
  model.base_logit = base_logit;
  const json effects = m.value("main_effects", json::array());
  for (std::size_t k = 0; k < effects.size(); ++k) {
    const auto path = fmt::format("scenario.model.main_effects[{}]", k);
    const ValueRef ref = resolve_ref(space, effects[k], path);
    if (ref.value >= space.value_count(ref.element)) throw ValidationError(path + ": value out of range");
    model.set_main_effect(ref, effects[k].at("delta").get<double>());
  }
  const json terms = m.value("interactions", json::array());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto path = fmt::format("scenario.model.interactions[{}]", k);
    Interaction term;
    for (const auto& pair : terms[k].at("pairs")) term.pairs.push_back(resolve_ref(space, pair, path));
    term.delta = terms[k].at("delta").get<double>();
    model.interactions.push_back(std::move(term));
  }
  model.validate(space);
  return model;
}

}  // namespace

SimulationScenario parse_scenario(const json& doc) {
  if (!doc.is_object() || !doc.contains("scenario") || !doc["scenario"].is_object()) {
    throw ConfigError({"scenario: required object"});
  }
  const json& s = doc["scenario"];
  try {
    const bool preset = s.contains("preset");
    if (preset && s["preset"] != "case_study") {
      throw ValidationError("scenario.preset: only \"case_study\" is known");
    }
    SimulationScenario scenario =
        preset ? build_case_study_scenario()
               : SimulationScenario{parse_experiment_config(doc), GroundTruthModel{}};
    if (!preset) {
      if (!s.contains("model")) throw ValidationError("scenario.model: required");
      scenario.model = parse_model(scenario.config.space, s["model"]);
      if (!s.contains("budget")) throw ValidationError("scenario.budget: required");
    }
    if (s.contains("budget")) scenario.budget = s["budget"].get<std::uint64_t>();
    if (s.contains("users_per_day")) scenario.users_per_day = s["users_per_day"].get<std::uint64_t>();
    if (s.contains("fitness")) {
      const auto mode = s["fitness"].get<std::string>();
      if (mode == "observed") {
        scenario.fitness = FitnessMode::kObserved;
      } else if (mode == "oracle") {
        scenario.fitness = FitnessMode::kOracle;
      } else {
        throw ValidationError("scenario.fitness: must be \"observed\" or \"oracle\"");
      }
    }
    scenario.config.evolution.interaction_budget = scenario.budget;
    scenario.validate();
    return scenario;
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError({fmt::format("scenario: {}", e.what())});
  } catch (const ValidationError& e) {
    throw ConfigError({e.what()});
  }
}

json model_to_json(const GroundTruthModel& model, const SearchSpace& space) {
  json effects = json::array();
  for (std::size_t e = 0; e < model.main_effects.size(); ++e) {
    for (std::size_t v = 1; v < model.main_effects[e].size(); ++v) {
      if (model.main_effects[e][v] == 0.0) continue;
      effects.push_back({{"element", space.elements()[e].name},
                         {"value", space.elements()[e].values[v]},
                         {"delta", model.main_effects[e][v]}});
    }
  }
  json terms = json::array();
  for (const auto& term : model.interactions) {
    json pairs = json::array();
    for (const auto& ref : term.pairs) {
      pairs.push_back({{"element", space.elements()[ref.element].name},
                       {"value", space.elements()[ref.element].values[ref.value]}});
    }
    terms.push_back({{"pairs", std::move(pairs)}, {"delta", term.delta}});
  }
  return json{{"base_logit", model.base_logit},
              {"main_effects", std::move(effects)},
              {"interactions", std::move(terms)}};
}

}  // namespace ascend::sim
