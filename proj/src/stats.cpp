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

#include "ascend/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ascend::stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double z_for_level(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("confidence level must be in (0, 1)");
  }
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 0.5 + level / 2.0);
}

FitnessEstimate estimate(std::uint64_t conversions, std::uint64_t impressions, double ci_level,
                         IntervalMethod method) {
  if (impressions == 0) {
    throw UndefinedEstimate("estimate requires at least one impression");
  }
  if (conversions > impressions) {
    throw std::invalid_argument("conversions exceed impressions");
  }
  FitnessEstimate e;
  e.impressions = impressions;
  e.conversions = conversions;
  e.ci_level = ci_level;
  const double n = static_cast<double>(impressions);
  const double p = static_cast<double>(conversions) / n;
  const double z = z_for_level(ci_level);
  e.rate = p;
  if (method == IntervalMethod::kWald) {
    const double half = z * std::sqrt(p * (1.0 - p) / n);
    e.ci_low = std::max(0.0, p - half);
    e.ci_high = std::min(1.0, p + half);
  } else {
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double centre = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    // Pin the exact boundaries the closed form only reaches up to rounding.
    e.ci_low = conversions == 0 ? 0.0 : std::clamp(centre - half, 0.0, p);
    e.ci_high = conversions == impressions ? 1.0 : std::clamp(centre + half, p, 1.0);
  }
  return e;
}

double improvement_over_control(double rate, double control_rate) {
  if (!(control_rate > 0.0)) {
    throw UndefinedEstimate("improvement is undefined for a zero control rate");
  }
  return 100.0 * (rate - control_rate) / control_rate;
}

SignificanceResult two_proportion_test(std::uint64_t c1, std::uint64_t i1, std::uint64_t c2,
                                       std::uint64_t i2) {
  if (i1 == 0 || i2 == 0) {
    throw UndefinedEstimate("two-proportion test requires impressions in both samples");
  }
  if (c1 > i1 || c2 > i2) throw std::invalid_argument("conversions exceed impressions");
  SignificanceResult result;
  const double n1 = static_cast<double>(i1);
  const double n2 = static_cast<double>(i2);
  const double pooled = static_cast<double>(c1 + c2) / (n1 + n2);
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  if (se == 0.0) return result;  // both 0 or both 1
  result.z_score = (static_cast<double>(c2) / n2 - static_cast<double>(c1) / n1) / se;
  result.p_value_two_sided = std::min(1.0, 2.0 * normal_cdf(-std::abs(result.z_score)));
  result.significant_95 = result.p_value_two_sided < 0.05;
  result.significant_99 = result.p_value_two_sided < 0.01;
  return result;
}

std::vector<ReportRow> top_k_report(const std::vector<CandidateCounts>& candidates,
                                    const CandidateCounts& control, std::size_t k,
                                    double ci_level) {
  const double control_rate =
      control.impressions > 0
          ? static_cast<double>(control.conversions) / static_cast<double>(control.impressions)
          : 0.0;
  std::vector<ReportRow> rows;
  rows.reserve(candidates.size());
  for (const auto& c : candidates) {
    ReportRow row;
    row.candidate_id = c.id;
    row.estimate = estimate(c.conversions, c.impressions, ci_level);
    row.improvement_pct = control_rate > 0.0
                              ? improvement_over_control(row.estimate.rate, control_rate)
                              : std::numeric_limits<double>::quiet_NaN();
    if (control.impressions > 0) {
      row.significant_95 =
          two_proportion_test(control.conversions, control.impressions, c.conversions,
                              c.impressions)
              .significant_95;
    }
    rows.push_back(row);
  }
  // Cross-multiplied rate comparison keeps ties exact.
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    const auto lhs = static_cast<unsigned __int128>(a.estimate.conversions) * b.estimate.impressions;
    const auto rhs = static_cast<unsigned __int128>(b.estimate.conversions) * a.estimate.impressions;
    if (lhs != rhs) return lhs > rhs;
    if (a.estimate.impressions != b.estimate.impressions) {
      return a.estimate.impressions > b.estimate.impressions;
    }
    return a.candidate_id < b.candidate_id;
  });
  if (rows.size() > k) rows.resize(k);
  return rows;
}

}  // namespace ascend::stats
