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
#include <string_view>
#include <vector>

#include "ascend/experiment_state.hpp"
#include "ascend/rng.hpp"

namespace ascend::allocator {

struct Remaining {
  std::uint64_t candidate_id = 0;
  std::uint64_t remaining = 0;

  friend bool operator==(const Remaining&, const Remaining&) = default;
};

/// Per active non-control candidate: max(0, m - impressions this generation).
std::vector<Remaining> maturity_status(const ExperimentState& state);

bool all_mature(const ExperimentState& state);

/// The live sticky assignment for `user_id` at `now`, if any. Assignments
/// pointing at a discarded candidate are stale and not returned.
const AssignmentRecord* sticky_assignment(const ExperimentState& state, std::string_view user_id,
                                          std::int64_t now);

/// Routing for a user without a live assignment: Control with the holdout
/// probability, else the least-filled candidate still short of its quota
/// (ties: lowest id), else a rate-proportional draw over the active
/// candidates.
std::uint64_t choose_candidate(const ExperimentState& state, Rng& rng);

}  // namespace ascend::allocator
