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

#include "ascend/allocator.hpp"

#include <stdexcept>

namespace ascend::allocator {

std::vector<Remaining> maturity_status(const ExperimentState& state) {
  std::vector<Remaining> out;
  if (!state.config) return out;
  const std::uint64_t m = state.config->evolution.maturity_age;
  for (const auto& c : state.candidates) {
    if (!c.is_active()) continue;
    out.push_back({c.id, c.generation_impressions >= m ? 0 : m - c.generation_impressions});
  }
  return out;
}

bool all_mature(const ExperimentState& state) {
  for (const auto& r : maturity_status(state)) {
    if (r.remaining > 0) return false;
  }
  return true;
}

const AssignmentRecord* sticky_assignment(const ExperimentState& state, std::string_view user_id,
                                          std::int64_t now) {
  const auto it = state.assignments.find(std::string(user_id));
  if (it == state.assignments.end() || !it->second.live_at(now)) return nullptr;
  const Candidate* c = state.find(it->second.candidate_id);
  if (c == nullptr || c->status == CandidateStatus::kDiscarded) return nullptr;
  return &it->second;
}

std::uint64_t choose_candidate(const ExperimentState& state, Rng& rng) {
  const auto& cfg = state.config->evolution;
  const double draw = uniform01(rng);
  std::uint64_t control_id = 0;
  const Candidate* least = nullptr;
  std::vector<const Candidate*> active;
  for (const auto& c : state.candidates) {
    if (c.is_control()) control_id = c.id;
    if (!c.is_active()) continue;
    active.push_back(&c);
    if (!state.evolution_complete && c.generation_impressions < cfg.maturity_age &&
        (least == nullptr || c.generation_impressions < least->generation_impressions)) {
      least = &c;
    }
  }
  if (draw < cfg.control_holdout_fraction || active.empty()) return control_id;
  if (least != nullptr) return least->id;

  // Every quota is filled: exploit the current estimates until the
  // generation advances.
  std::vector<double> rates;
  rates.reserve(active.size());
  for (const auto* c : active) rates.push_back(c->rate());
  return active[select_parent(rates, rng)]->id;
}

}  // namespace ascend::allocator
