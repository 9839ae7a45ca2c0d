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
#include <stdexcept>
#include <vector>

namespace ascend::stats {

/// Raised for estimates that are mathematically undefined (no impressions,
/// zero control rate).
class UndefinedEstimate : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class IntervalMethod { kWald, kWilson };

struct FitnessEstimate {
  std::uint64_t impressions = 0;
  std::uint64_t conversions = 0;
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ci_level = 0.95;

  friend bool operator==(const FitnessEstimate&, const FitnessEstimate&) = default;
};

struct SignificanceResult {
  double z_score = 0.0;
  double p_value_two_sided = 1.0;
  bool significant_95 = false;
  bool significant_99 = false;
};

/// Standard normal CDF via erfc.
double normal_cdf(double x);

/// Two-sided critical value: z with P(|Z| <= z) = level.
double z_for_level(double level);

FitnessEstimate estimate(std::uint64_t conversions, std::uint64_t impressions,
                         double ci_level = 0.95, IntervalMethod method = IntervalMethod::kWald);

/// 100 * (rate - control_rate) / control_rate.
double improvement_over_control(double rate, double control_rate);

/// Pooled two-proportion z-test. z is positive when sample 2 converts better.
SignificanceResult two_proportion_test(std::uint64_t c1, std::uint64_t i1, std::uint64_t c2,
                                       std::uint64_t i2);

struct CandidateCounts {
  std::uint64_t id = 0;
  std::uint64_t impressions = 0;
  std::uint64_t conversions = 0;
};

struct ReportRow {
  std::uint64_t candidate_id = 0;
  FitnessEstimate estimate;
  double improvement_pct = 0.0;  // NaN when control has no conversions
  bool significant_95 = false;
};

/// Rows ordered by rate desc, impressions desc, id asc. Each row carries an
/// unadjusted 95% two-proportion test against control.
std::vector<ReportRow> top_k_report(const std::vector<CandidateCounts>& candidates,
                                    const CandidateCounts& control, std::size_t k,
                                    double ci_level = 0.95);

}  // namespace ascend::stats
