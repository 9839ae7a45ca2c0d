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

#include "ascend/report.hpp"

#include <fmt/format.h>

#include <cmath>

#include "ascend/experiment.hpp"

namespace ascend {

using nlohmann::json;

namespace {

constexpr const char* kSignificanceNote =
    "significant_95 is an unadjusted two-proportion z-test against control; no correction "
    "for multiple comparisons is applied";

stats::CandidateCounts counts_of(const Candidate& c) {
  return {c.id, c.impressions, c.conversions};
}

json row_json(const ExperimentState& state, const stats::ReportRow& row) {
  const Candidate& c = state.candidates[row.candidate_id];
  return json{{"candidate_id", row.candidate_id},
              {"genome", value_names(state.config->space, c.genome)},
              {"status", to_string(c.status)},
              {"birth_generation", c.birth_generation},
              {"impressions", row.estimate.impressions},
              {"conversions", row.estimate.conversions},
              {"rate", row.estimate.rate},
              {"ci_low", row.estimate.ci_low},
              {"ci_high", row.estimate.ci_high},
              {"improvement_pct",
               std::isnan(row.improvement_pct) ? json(nullptr) : json(row.improvement_pct)},
              {"significant_95", row.significant_95}};
}

std::vector<stats::ReportRow> ranked_rows(const ExperimentState& state, std::size_t top_k) {
  std::vector<stats::CandidateCounts> evaluated;
  for (const auto& c : state.candidates) {
    if (!c.is_control() && c.impressions > 0) evaluated.push_back(counts_of(c));
  }
  return stats::top_k_report(evaluated, counts_of(state.candidates.front()), top_k);
}

// RFC 4180 quoting for fields that need it.
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

json design_of(const SearchSpace& space, const Genome& genome) {
  json design = json::object();
  const auto names = value_names(space, genome);
  for (std::size_t i = 0; i < names.size(); ++i) design[space.elements()[i].name] = names[i];
  return design;
}

json build_report(const ExperimentState& state, std::size_t top_k) {
  json report;
  report["experiment_id"] = state.config ? state.config->experiment_id : "";
  report["name"] = state.config ? state.config->name : "";
  report["status"] = to_string(state.status);
  report["stop_reason"] = state.stop_reason.empty() ? json(nullptr) : json(state.stop_reason);
  report["generation"] = state.generation;
  report["evolution_complete"] = state.evolution_complete;
  report["space_size"] = state.config ? state.config->space.size() : 0;
  report["total_interactions"] = state.total_impressions;
  report["total_conversions"] = state.total_conversions;
  report["unattributed_conversions"] = state.unattributed_conversions;
  report["last_sequence"] = state.last_sequence;
  report["notes"] = json::array({kSignificanceNote});
  report["control"] = nullptr;
  report["best"] = nullptr;
  report["candidates"] = json::array();
  report["generations"] = json::array();
  if (state.candidates.empty()) return report;

  const Candidate& control = state.candidates.front();
  if (control.impressions > 0) {
    const auto est = stats::estimate(control.conversions, control.impressions);
    report["control"] = json{{"candidate_id", control.id},
                             {"genome", value_names(state.config->space, control.genome)},
                             {"impressions", est.impressions},
                             {"conversions", est.conversions},
                             {"rate", est.rate},
                             {"ci_low", est.ci_low},
                             {"ci_high", est.ci_high}};
  }

  const auto rows = ranked_rows(state, state.candidates.size());
  const auto best = best_candidate(state.candidates, state.config->evolution.maturity_age,
                                   observed_fitness);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i < top_k) report["candidates"].push_back(row_json(state, rows[i]));
    if (best && rows[i].candidate_id == *best) report["best"] = row_json(state, rows[i]);
  }

  for (const auto& g : state.history) {
    report["generations"].push_back(json{{"generation", g.generation},
                                         {"evaluated", g.evaluated.size()},
                                         {"retained", g.retained},
                                         {"discarded", g.discarded},
                                         {"bred", g.bred},
                                         {"best_id", g.best_id ? json(*g.best_id) : json(nullptr)}});
  }
  return report;
}

std::string render_report(const ExperimentState& state, std::size_t top_k) {
  return build_report(state, top_k).dump(2) + '\n';
}

std::string report_csv(const ExperimentState& state, std::size_t top_k) {
  std::string out =
      "candidate_id,genome,impressions,conversions,rate,ci_low,ci_high,improvement_pct,"
      "significant_95\n";
  if (state.candidates.empty()) return out;
  for (const auto& row : ranked_rows(state, top_k)) {
    std::string genome;
    for (const auto& name : value_names(state.config->space,
                                        state.candidates[row.candidate_id].genome)) {
      if (!genome.empty()) genome += '|';
      genome += name;
    }
    const std::string improvement =
        std::isnan(row.improvement_pct) ? "" : fmt::format("{:.4f}", row.improvement_pct);
    out += fmt::format("{},{},{},{},{:.6f},{:.6f},{:.6f},{},{}\n", row.candidate_id, csv_field(genome),
                       row.estimate.impressions, row.estimate.conversions, row.estimate.rate,
                       row.estimate.ci_low, row.estimate.ci_high, improvement,
                       row.significant_95 ? "true" : "false");
  }
  return out;
}

}  // namespace ascend
