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

#include "ascend/codec.hpp"

#include <fmt/format.h>

#include <map>

namespace ascend {

using nlohmann::json;

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out;
  for (const auto& e : errors) {
    if (!out.empty()) out += "; ";
    out += e;
  }
  return out;
}

// Reads optional typed fields from one JSON object, collecting type errors
// under a dotted path instead of throwing on the first one.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string prefix, std::vector<std::string>& errors)
      : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {}

  const json* find(const char* key) const {
    if (!obj_.is_object()) return nullptr;
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  template <typename Int>
  void integer(const char* key, Int& out) {
    if (const json* v = find(key)) {
      if (v->is_number_unsigned() ||
          (std::is_signed_v<Int> && v->is_number_integer())) {
        out = v->get<Int>();
      } else {
        error(key, std::is_signed_v<Int> ? "must be an integer" : "must be a non-negative integer");
      }
    }
  }

  template <typename Int>
  void optional_integer(const char* key, std::optional<Int>& out) {
    if (find(key)) {
      Int value{};
      integer(key, value);
      out = value;
    }
  }

  void real(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_number()) {
        out = v->get<double>();
      } else {
        error(key, "must be a number");
      }
    }
  }

  void optional_real(const char* key, std::optional<double>& out) {
    if (find(key)) {
      double value = 0.0;
      real(key, value);
      out = value;
    }
  }

  void boolean(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (v->is_boolean()) {
        out = v->get<bool>();
      } else {
        error(key, "must be a boolean");
      }
    }
  }

  void string(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        error(key, "must be a string");
      }
    }
  }

  void error(std::string_view key, std::string_view message) {
    errors_.push_back(fmt::format("{}{}: {}", prefix_, key, message));
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::vector<std::string>& errors_;
};

std::vector<ElementSpec> read_elements(const json& space, std::vector<std::string>& errors) {
  std::vector<ElementSpec> elements;
  if (!space.is_object() || !space.contains("elements") || !space["elements"].is_array()) {
    errors.push_back("space.elements: must be an array of elements");
    return elements;
  }
  const auto& list = space["elements"];
  if (list.empty()) errors.push_back("space.elements: must contain at least 1 element");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& e = list[i];
    const std::string path = fmt::format("space.elements[{}]", i);
    ElementSpec element;
    if (!e.is_object()) {
      errors.push_back(path + ": must be an object");
      continue;
    }
    if (!e.contains("name") || !e["name"].is_string() || e["name"].get<std::string>().empty()) {
      errors.push_back(path + ".name: must be a non-empty string");
    } else {
      element.name = e["name"].get<std::string>();
    }
    if (!e.contains("values") || !e["values"].is_array()) {
      errors.push_back(path + ".values: must be an array of strings");
    } else {
      for (const auto& v : e["values"]) {
        if (!v.is_string()) {
          errors.push_back(path + ".values: entries must be strings");
          break;
        }
        element.values.push_back(v.get<std::string>());
      }
      if (element.values.size() < 2) errors.push_back(path + ".values: values must have length ≥ 2");
    }
    elements.push_back(std::move(element));
  }
  return elements;
}

CrossoverKind crossover_from_string(std::string_view s, bool& ok) {
  ok = true;
  if (s == "single_point") return CrossoverKind::kSinglePoint;
  if (s == "uniform") return CrossoverKind::kUniform;
  ok = false;
  return CrossoverKind::kSinglePoint;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : ValidationError(join_errors(errors)), errors_(std::move(errors)) {}

json parse_document(const std::string& text) {
  try {
    return json::parse(text, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError({fmt::format("document: {}", e.what())});
  }
}

SearchSpace parse_space(const json& doc) {
  std::vector<std::string> errors;
  auto elements = read_elements(doc, errors);
  if (!errors.empty()) throw ConfigError(std::move(errors));
  try {
    return SearchSpace(std::move(elements));
  } catch (const ValidationError& e) {
    throw ConfigError({fmt::format("space: {}", e.what())});
  }
}

ExperimentConfig parse_experiment_config(const json& doc) {
  std::vector<std::string> errors;
  if (!doc.is_object()) throw ConfigError({"document: must be a JSON object"});

  FieldReader top(doc, "", errors);
  std::string id;
  std::string name;
  top.string("experiment_id", id);
  top.string("name", name);

  std::vector<ElementSpec> elements;
  if (doc.contains("space")) {
    elements = read_elements(doc["space"], errors);
  } else {
    errors.push_back("space: required");
  }

  EvolutionConfig evo;
  if (doc.contains("evolution") && !doc["evolution"].is_object()) {
    errors.push_back("evolution: must be an object");
  }
  const json evo_doc = doc.value("evolution", json::object());
  FieldReader e(evo_doc, "evolution.", errors);
  e.integer("population_size", evo.population_size);
  e.integer("maturity_age", evo.maturity_age);
  e.real("mutation_probability", evo.mutation_probability);
  e.integer("max_generations", evo.max_generations);
  e.integer("rng_seed", evo.rng_seed);
  e.integer("initial_population_cap", evo.initial_population_cap);
  e.real("control_holdout_fraction", evo.control_holdout_fraction);
  e.integer("duplicate_retries", evo.duplicate_retries);
  e.optional_integer("interaction_budget", evo.interaction_budget);
  e.boolean("serve_after_final_generation", evo.serve_after_final_generation);
  e.boolean("stop_on_significance", evo.stop_on_significance);
  e.optional_real("improvement_target_pct", evo.improvement_target_pct);
  if (const json* v = e.find("crossover")) {
    bool ok = v->is_string();
    if (ok) evo.crossover = crossover_from_string(v->get<std::string>(), ok);
    if (!ok) e.error("crossover", "must be \"single_point\" or \"uniform\"");
  }

  AllocationConfig alloc;
  const json alloc_doc = doc.value("allocation", json::object());
  FieldReader a(alloc_doc, "allocation.", errors);
  a.integer("sticky_ttl_ms", alloc.sticky_ttl_ms);
  a.boolean("count_sticky_returns", alloc.count_sticky_returns);
  a.boolean("auto_advance", alloc.auto_advance);
  if (alloc.sticky_ttl_ms < 1) a.error("sticky_ttl_ms", "must be ≥ 1");

  try {
    evo.validate();
  } catch (const ValidationError& ex) {
    errors.emplace_back(ex.what());
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));

  try {
    return ExperimentConfig{id, name, SearchSpace(std::move(elements)), evo, alloc, doc};
  } catch (const ValidationError& ex) {
    throw ConfigError({fmt::format("space: {}", ex.what())});
  }
}

json to_json(const SearchSpace& space) {
  json elements = json::array();
  for (const auto& e : space.elements()) {
    elements.push_back({{"name", e.name}, {"values", e.values}});
  }
  return json{{"elements", std::move(elements)}};
}

json to_json(const EvolutionConfig& cfg) {
  json j{{"population_size", cfg.population_size},
         {"maturity_age", cfg.maturity_age},
         {"mutation_probability", cfg.mutation_probability},
         {"max_generations", cfg.max_generations},
         {"rng_seed", cfg.rng_seed},
         {"initial_population_cap", cfg.initial_population_cap},
         {"control_holdout_fraction", cfg.control_holdout_fraction},
         {"crossover", cfg.crossover == CrossoverKind::kSinglePoint ? "single_point" : "uniform"},
         {"duplicate_retries", cfg.duplicate_retries},
         {"serve_after_final_generation", cfg.serve_after_final_generation},
         {"stop_on_significance", cfg.stop_on_significance}};
  j["interaction_budget"] = cfg.interaction_budget ? json(*cfg.interaction_budget) : json(nullptr);
  j["improvement_target_pct"] =
      cfg.improvement_target_pct ? json(*cfg.improvement_target_pct) : json(nullptr);
  return j;
}

json to_json(const AllocationConfig& cfg) {
  return json{{"sticky_ttl_ms", cfg.sticky_ttl_ms},
              {"count_sticky_returns", cfg.count_sticky_returns},
              {"auto_advance", cfg.auto_advance}};
}

json canonical_document(const ExperimentConfig& config) {
  json doc = config.document.is_object() ? config.document : json::object();
  doc["experiment_id"] = config.experiment_id;
  doc["name"] = config.name;
  doc["evolution"] = to_json(config.evolution);
  doc["allocation"] = to_json(config.allocation);
  bool space_matches = false;
  if (doc.contains("space")) {
    try {
      const SearchSpace existing = parse_space(doc["space"]);
      space_matches = existing.element_count() == config.space.element_count();
      for (std::size_t i = 0; space_matches && i < existing.element_count(); ++i) {
        space_matches = existing.elements()[i].name == config.space.elements()[i].name &&
                        existing.elements()[i].values == config.space.elements()[i].values;
      }
    } catch (const ValidationError&) {
    }
  }
  if (!space_matches) doc["space"] = to_json(config.space);
  return doc;
}

json to_json(const Genome& genome) { return json(genome.choices); }

Genome genome_from_json(const json& j) {
  return Genome{j.get<std::vector<std::uint32_t>>()};
}

json to_json(const stats::FitnessEstimate& e) {
  return json{{"impressions", e.impressions}, {"conversions", e.conversions},
              {"rate", e.rate},               {"ci_low", e.ci_low},
              {"ci_high", e.ci_high},         {"ci_level", e.ci_level}};
}

stats::FitnessEstimate estimate_from_json(const json& j) {
  stats::FitnessEstimate e;
  e.impressions = j.at("impressions").get<std::uint64_t>();
  e.conversions = j.at("conversions").get<std::uint64_t>();
  e.rate = j.at("rate").get<double>();
  e.ci_low = j.at("ci_low").get<double>();
  e.ci_high = j.at("ci_high").get<double>();
  e.ci_level = j.at("ci_level").get<double>();
  return e;
}

json to_json(const Candidate& c) {
  return json{{"id", c.id},
              {"genome", to_json(c.genome)},
              {"birth_generation", c.birth_generation},
              {"impressions", c.impressions},
              {"conversions", c.conversions},
              {"generation_impressions", c.generation_impressions},
              {"status", to_string(c.status)}};
}

Candidate candidate_from_json(const json& j) {
  Candidate c;
  c.id = j.at("id").get<std::uint64_t>();
  c.genome = genome_from_json(j.at("genome"));
  c.birth_generation = j.value("birth_generation", 0U);
  c.impressions = j.value("impressions", std::uint64_t{0});
  c.conversions = j.value("conversions", std::uint64_t{0});
  c.generation_impressions = j.value("generation_impressions", std::uint64_t{0});
  c.status = candidate_status_from_string(j.value("status", std::string("active")));
  return c;
}

json to_json(const GenerationReport& r) {
  json evaluated = json::array();
  for (const auto& f : r.evaluated) {
    evaluated.push_back({{"id", f.id}, {"fitness", f.fitness}, {"estimate", to_json(f.estimate)}});
  }
  return json{{"generation", r.generation},
              {"evaluated", std::move(evaluated)},
              {"retained", r.retained},
              {"discarded", r.discarded},
              {"bred", r.bred},
              {"best_id", r.best_id ? json(*r.best_id) : json(nullptr)}};
}

GenerationReport report_from_json(const json& j) {
  GenerationReport r;
  r.generation = j.at("generation").get<std::uint32_t>();
  for (const auto& f : j.at("evaluated")) {
    r.evaluated.push_back(CandidateFitness{f.at("id").get<std::uint64_t>(),
                                           f.at("fitness").get<double>(),
                                           estimate_from_json(f.at("estimate"))});
  }
  r.retained = j.at("retained").get<std::vector<std::uint64_t>>();
  r.discarded = j.at("discarded").get<std::vector<std::uint64_t>>();
  r.bred = j.at("bred").get<std::vector<std::uint64_t>>();
  if (!j.at("best_id").is_null()) r.best_id = j["best_id"].get<std::uint64_t>();
  return r;
}

json to_json(const ExperimentState& s) {
  json candidates = json::array();
  for (const auto& c : s.candidates) candidates.push_back(to_json(c));
  // std::map keeps the user order canonical regardless of hash layout.
  std::map<std::string, const AssignmentRecord*> ordered;
  for (const auto& [user, rec] : s.assignments) ordered.emplace(user, &rec);
  json assignments = json::object();
  for (const auto& [user, rec] : ordered) {
    assignments[user] = {{"candidate_id", rec->candidate_id},
                         {"assigned_at", rec->assigned_at},
                         {"expires_at", rec->expires_at},
                         {"converted", rec->converted}};
  }
  json history = json::array();
  for (const auto& r : s.history) history.push_back(to_json(r));
  return json{{"schema_version", kSchemaVersion},
              {"config", s.config ? s.config->document : json(nullptr)},
              {"status", to_string(s.status)},
              {"generation", s.generation},
              {"evolution_complete", s.evolution_complete},
              {"candidates", std::move(candidates)},
              {"assignments", std::move(assignments)},
              {"total_impressions", s.total_impressions},
              {"total_conversions", s.total_conversions},
              {"unattributed_conversions", s.unattributed_conversions},
              {"last_sequence", s.last_sequence},
              {"created_at", s.created_at},
              {"last_timestamp", s.last_timestamp},
              {"history", std::move(history)},
              {"stop_reason", s.stop_reason}};
}

ExperimentState state_from_json(const json& j) {
  if (j.value("schema_version", 0) != kSchemaVersion) {
    throw ValidationError("state: unsupported schema_version");
  }
  ExperimentState s;
  if (!j.at("config").is_null()) {
    s.config = std::make_shared<const ExperimentConfig>(parse_experiment_config(j["config"]));
  }
  const auto status = j.at("status").get<std::string>();
  if (status == "draft") {
    s.status = ExperimentStatus::kDraft;
  } else if (status == "running") {
    s.status = ExperimentStatus::kRunning;
  } else if (status == "stopped") {
    s.status = ExperimentStatus::kStopped;
  } else {
    throw ValidationError("state: unknown status " + status);
  }
  s.generation = j.at("generation").get<std::uint32_t>();
  s.evolution_complete = j.at("evolution_complete").get<bool>();
  for (const auto& c : j.at("candidates")) s.candidates.push_back(candidate_from_json(c));
  for (const auto& [user, rec] : j.at("assignments").items()) {
    s.assignments.emplace(user, AssignmentRecord{user, rec.at("candidate_id").get<std::uint64_t>(),
                                                 rec.at("assigned_at").get<std::int64_t>(),
                                                 rec.at("expires_at").get<std::int64_t>(),
                                                 rec.at("converted").get<bool>()});
  }
  s.total_impressions = j.at("total_impressions").get<std::uint64_t>();
  s.total_conversions = j.at("total_conversions").get<std::uint64_t>();
  s.unattributed_conversions = j.at("unattributed_conversions").get<std::uint64_t>();
  s.last_sequence = j.at("last_sequence").get<std::uint64_t>();
  s.created_at = j.at("created_at").get<std::int64_t>();
  s.last_timestamp = j.at("last_timestamp").get<std::int64_t>();
  for (const auto& r : j.at("history")) s.history.push_back(report_from_json(r));
  s.stop_reason = j.at("stop_reason").get<std::string>();
  return s;
}

json to_json(const LogRecord& record) {
  return json{{"schema_version", kSchemaVersion},
              {"seq", record.sequence},
              {"kind", to_string(record.kind)},
              {"timestamp", record.timestamp},
              {"payload", record.payload}};
}

LogRecord record_from_json(const json& j) {
  if (j.value("schema_version", 0) != kSchemaVersion) {
    throw ValidationError("record: unsupported schema_version");
  }
  LogRecord r;
  r.sequence = j.at("seq").get<std::uint64_t>();
  r.kind = record_kind_from_string(j.at("kind").get<std::string>());
  r.timestamp = j.at("timestamp").get<std::int64_t>();
  r.payload = j.at("payload");
  return r;
}

}  // namespace ascend
