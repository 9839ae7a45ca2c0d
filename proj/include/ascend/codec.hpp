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

// JSON documents for configs, candidates, reports, state and log records.

#include <string>
#include <vector>

#include "ascend/experiment_state.hpp"
#include "json.hpp"

namespace ascend {

/// A config document failed validation. Each entry names a field path.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Parses text that may contain // and /* */ comments.
nlohmann::json parse_document(const std::string& text);

SearchSpace parse_space(const nlohmann::json& doc);
/// Parses the experiment config; throws ConfigError listing every problem found.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);

nlohmann::json to_json(const SearchSpace& space);
nlohmann::json to_json(const EvolutionConfig& cfg);
nlohmann::json to_json(const AllocationConfig& cfg);

/// The config's document with every typed field written back from the
/// struct. Extra keys (display metadata, scenario sections) are preserved;
/// the space is rewritten only if it no longer matches the document's.
nlohmann::json canonical_document(const ExperimentConfig& config);

nlohmann::json to_json(const Genome& genome);
Genome genome_from_json(const nlohmann::json& j);

nlohmann::json to_json(const stats::FitnessEstimate& e);
stats::FitnessEstimate estimate_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Candidate& c);
Candidate candidate_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GenerationReport& r);
GenerationReport report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExperimentState& state);
ExperimentState state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LogRecord& record);
LogRecord record_from_json(const nlohmann::json& j);

}  // namespace ascend
