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

// Plaintext references for the encrypted pipeline.
//
// kFixedPoint replays the same algorithm with PlainFixed integer arithmetic
// and the same noise labels, so its partition mask and raw S' words must match
// the decrypted circuit outputs bit for bit. kFloat64 is the floating-point
// baseline: exact means, unquantized noise.
//
// Nothing here touches a gate backend.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dpfhe/dp_noise.hpp"
#include "dpfhe/enc_fixed.hpp"
#include "dpfhe/partitioner.hpp"
#include "dpfhe/summary_query.hpp"

namespace dpfhe {

enum class OracleMode { kFixedPoint, kFloat64 };

struct OracleConfig {
  FixedFormat format{16, 8};
  PrivacyBudget budget{};
  double cost_sensitivity = 2.0;
  int max_n = kMaxPlaintextDomains;
};

struct OracleRun {
  OracleMode mode = OracleMode::kFixedPoint;
  std::uint32_t cut_mask = 0;
  std::vector<std::int64_t> s_prime_raw;  // fixed-point mode only
  std::vector<double> s_prime;
  std::vector<double> x_prime;
  std::uint64_t seed = 0;
};

namespace detail {

inline OracleRun oracle_fixed(const Histogram& x, const OracleConfig& cfg,
                              const NoiseSource& noise, NoiseLog* log) {
  const int n = x.size();
  const FixedFormat fmt = cfg.format;
  std::vector<PlainFixed> px;
  for (double v : x.counts) px.push_back(encode(v, fmt));

  const LaplaceParams cost_params{cfg.cost_sensitivity, cfg.budget.epsilon1};
  std::vector<PlainFixed> table;
  for (int l = 1; l <= n; ++l) {
    for (int r = l; r <= n; ++r) {
      const std::span<const PlainFixed> members(px.data() + (l - 1),
                                                static_cast<std::size_t>(r - l + 1));
      const PlainFixed total = plain::sum(members);
      const PlainFixed mean =
          plain::mul_plain(total, encode(1.0 / static_cast<double>(r - l + 1), kReciprocalFormat));
      std::vector<PlainFixed> devs;
      for (const auto& v : members) devs.push_back(plain::abs(plain::sub(v, mean)));
      const PlainFixed dev = plain::sum(devs);
      const NoiseLabel label{NoisePhase::kIntervalCost, interval_index(n, l, r)};
      table.push_back(plain::add_sat(dev, draw_noise(cost_params, noise, label, fmt, log)));
    }
  }

  std::uint32_t best_mask = 0;
  std::int64_t best_cost = std::numeric_limits<std::int64_t>::max();
  for (std::uint32_t mask = 0; mask < Partition::mask_limit(n); ++mask) {
    const auto buckets = Partition{n, mask}.buckets();
    PlainFixed total = table[interval_index(n, buckets[0].first, buckets[0].last)];
    for (std::size_t j = 1; j < buckets.size(); ++j)
      total = plain::add_sat(total, table[interval_index(n, buckets[j].first, buckets[j].last)]);
    if (total.raw < best_cost) {
      best_cost = total.raw;
      best_mask = mask;
    }
  }

  OracleRun run;
  run.mode = OracleMode::kFixedPoint;
  run.cut_mask = best_mask;
  const Partition p{n, best_mask};
  const LaplaceParams sum_params{1.0, cfg.budget.epsilon2};
  std::uint64_t j = 0;
  for (const auto& bucket : p.buckets()) {
    const PlainFixed s = plain::sum(std::span<const PlainFixed>(
        px.data() + (bucket.first - 1), static_cast<std::size_t>(bucket.size())));
    const PlainFixed noisy =
        plain::add(s, draw_noise(sum_params, noise, {NoisePhase::kBucketSum, j++}, fmt, log));
    run.s_prime_raw.push_back(noisy.raw);
    run.s_prime.push_back(noisy.value());
  }
  run.x_prime = uniform_expand(run.s_prime, p).x_prime;
  return run;
}

inline OracleRun oracle_float(const Histogram& x, const OracleConfig& cfg,
                              const NoiseSource& noise) {
  const int n = x.size();
  const LaplaceParams cost_params{cfg.cost_sensitivity, cfg.budget.epsilon1};
  std::vector<double> table;
  for (int l = 1; l <= n; ++l) {
    for (int r = l; r <= n; ++r) {
      double total = 0;
      for (int i = l; i <= r; ++i) total += x[i - 1];
      const double mean = total / (r - l + 1);
      double dev = 0;
      for (int i = l; i <= r; ++i) dev += std::abs(x[i - 1] - mean);
      table.push_back(dev + noise.sample(cost_params, {NoisePhase::kIntervalCost,
                                                       interval_index(n, l, r)}));
    }
  }

  std::uint32_t best_mask = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < Partition::mask_limit(n); ++mask) {
    double total = 0;
    for (const auto& b : Partition{n, mask}.buckets()) total += table[interval_index(n, b.first, b.last)];
    if (total < best_cost) {
      best_cost = total;
      best_mask = mask;
    }
  }

  OracleRun run;
  run.mode = OracleMode::kFloat64;
  run.cut_mask = best_mask;
  const Partition p{n, best_mask};
  const LaplaceParams sum_params{1.0, cfg.budget.epsilon2};
  std::uint64_t j = 0;
  for (const auto& bucket : p.buckets()) {
    double s = 0;
    for (int i = bucket.first; i <= bucket.last; ++i) s += x[i - 1];
    run.s_prime.push_back(s + noise.sample(sum_params, {NoisePhase::kBucketSum, j++}));
  }
  run.x_prime = uniform_expand(run.s_prime, p).x_prime;
  return run;
}

}  // namespace detail

inline OracleRun oracle_pipeline(const Histogram& x, const OracleConfig& config,
                                 const NoiseSource& noise, OracleMode mode,
                                 NoiseLog* log = nullptr) {
  if (x.size() < 1) throw PreconditionError("empty histogram");
  if (x.size() > config.max_n)
    throw PreconditionError("domain size " + std::to_string(x.size()) + " exceeds the limit of " +
                            std::to_string(config.max_n));
  config.budget.validate();
  config.format.validate();
  OracleRun run = mode == OracleMode::kFixedPoint ? detail::oracle_fixed(x, config, noise, log)
                                                  : detail::oracle_float(x, config, noise);
  run.seed = noise.seed();
  return run;
}

struct BruteForceResult {
  std::uint32_t cut_mask = 0;
  double cost = 0;
};

// Noise-free exact argmin of the total L1 deviation over all 2^(n-1)
// partitions; the first minimum in mask order wins.
inline BruteForceResult brute_force_best_partition(const Histogram& x) {
  const int n = x.size();
  if (n < 1 || n > 15) throw PreconditionError("brute force supports 1 <= n <= 15");
  BruteForceResult best{0, std::numeric_limits<double>::infinity()};
  for (std::uint32_t mask = 0; mask < Partition::mask_limit(n); ++mask) {
    double total = 0;
    for (const auto& b : Partition{n, mask}.buckets()) {
      double sum = 0;
      for (int i = b.first; i <= b.last; ++i) sum += x[i - 1];
      const double mean = sum / b.size();
      for (int i = b.first; i <= b.last; ++i) total += std::abs(x[i - 1] - mean);
    }
    if (total < best.cost) best = {mask, total};
  }
  return best;
}

}  // namespace dpfhe
