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

#include <string>

#include "ascend/experiment_state.hpp"
#include "json.hpp"

namespace ascend {

inline constexpr std::size_t kDefaultTopK = 20;

/// The experiment report served at /report and rebuilt offline by the CLI.
/// Depends only on the state, so both paths produce identical bytes.
nlohmann::json build_report(const ExperimentState& state, std::size_t top_k = kDefaultTopK);

/// Serialized form shared by the service and the CLI.
std::string render_report(const ExperimentState& state, std::size_t top_k = kDefaultTopK);

/// candidate_id,genome,impressions,conversions,rate,ci_low,ci_high,improvement_pct,significant_95
std::string report_csv(const ExperimentState& state, std::size_t top_k = kDefaultTopK);

/// element name -> value name.
nlohmann::json design_of(const SearchSpace& space, const Genome& genome);

}  // namespace ascend
