// Copyright 2026 The dpfhe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpfhe/dp_noise.hpp"
#include "dpfhe/errors.hpp"
#include "dpfhe/partitioner.hpp"

namespace dpfhe {

struct SummaryProvenance {
  PrivacyBudget budget{};
  FixedFormat format{};
  std::string seed_digest;

  friend bool operator==(const SummaryProvenance& a, const SummaryProvenance& b) {
    return a.budget.epsilon == b.budget.epsilon && a.budget.epsilon1 == b.budget.epsilon1 &&
           a.budget.epsilon2 == b.budget.epsilon2 && a.format == b.format &&
           a.seed_digest == b.seed_digest;
  }
};

// Uniformly expanded noisy histogram. Every answer handed to an analyst is
// computed from x_prime alone.
struct DpSummary {
  Partition partition{};
  std::vector<double> s_prime;
  std::vector<double> x_prime;
  SummaryProvenance provenance{};

  int n() const { return partition.n; }

  friend bool operator==(const DpSummary&, const DpSummary&) = default;
};

enum class Clamp { kNegativesToZero, kNone };

namespace detail {

// Rounds every value onto the dyadic grid 2^-g, with g chosen so that any sum
// of these values fits in 52 bits of grid units. Range sums over the snapped
// values are then exact in double precision, which makes range answers
// additive: q(l, r) == q(l, m) + q(m + 1, r).
inline void snap_to_sum_grid(std::vector<double>& values) {
  double bound = 0;
  for (double v : values) bound += std::abs(v);
  if (bound == 0 || !std::isfinite(bound)) return;
  const auto units = static_cast<std::uint64_t>(std::ceil(bound)) + 1;
  const int g = 52 - std::bit_width(units);
  for (double& v : values) v = std::ldexp(std::nearbyint(std::ldexp(v, g)), -g);
}

}  // namespace detail

// x'_i = s'_j / |b_j| for every domain i of bucket j, then negatives -> 0.
inline DpSummary uniform_expand(std::span<const double> s_prime, const Partition& p,
                                Clamp clamp = Clamp::kNegativesToZero) {
  const auto buckets = p.buckets();
  if (s_prime.size() != buckets.size())
    throw PreconditionError("expected " + std::to_string(buckets.size()) +
                            " bucket sums, got " + std::to_string(s_prime.size()));
  DpSummary summary;
  summary.partition = p;
  summary.s_prime.assign(s_prime.begin(), s_prime.end());
  summary.x_prime.reserve(static_cast<std::size_t>(p.n));
  for (std::size_t j = 0; j < buckets.size(); ++j) {
    double v = s_prime[j] / static_cast<double>(buckets[j].size());
    if (clamp == Clamp::kNegativesToZero && v < 0) v = 0;
    for (int i = 0; i < buckets[j].size(); ++i) summary.x_prime.push_back(v);
  }
  detail::snap_to_sum_grid(summary.x_prime);
  return summary;
}

// Sum of x'_l..x'_r, 1-based inclusive.
inline double range_query(const DpSummary& summary, int l, int r) {
  const int n = static_cast<int>(summary.x_prime.size());
  if (l < 1 || r > n || l > r)
    throw PreconditionError("range [" + std::to_string(l) + ", " + std::to_string(r) +
                            "] invalid for n = " + std::to_string(n));
  double total = 0;
  for (int i = l; i <= r; ++i) total += summary.x_prime[static_cast<std::size_t>(i - 1)];
  return total;
}

// Mean absolute per-domain error (1/n) sum |x'_i - x_i|.
inline double summary_error(std::span<const double> x_prime, const Histogram& x) {
  if (x_prime.size() != x.counts.size() || x_prime.empty())
    throw PreconditionError("summary and histogram sizes differ");
  double total = 0;
  for (std::size_t i = 0; i < x_prime.size(); ++i) total += std::abs(x_prime[i] - x.counts[i]);
  return total / static_cast<double>(x_prime.size());
}

inline double summary_error(const DpSummary& summary, const Histogram& x) {
  return summary_error(summary.x_prime, x);
}

}  // namespace dpfhe
