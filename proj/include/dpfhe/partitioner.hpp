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

// Exhaustive data-aware partitioning over an encrypted histogram.
//
// A partition of domains 1..n into contiguous buckets is identified by its
// cut mask: bit (i-1) is set when a bucket boundary sits between domain i and
// domain i+1. Candidates are enumerated in ascending mask order, so mask 0 is
// the single bucket and mask 2^(n-1)-1 is all singletons.
//
// The pipeline is:
//   1. one noisy L1 deviation per contiguous interval (epsilon1 noise, one
//      draw per interval, shared by every candidate that uses the interval),
//   2. one saturating total per candidate partition,
//   3. a comparator tournament that yields the winning mask as encrypted bits,
//   4. bucket sums for the decrypted partition, noised with epsilon2.
// Nothing is pruned: every candidate is evaluated, since no intermediate
// value can be inspected.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dpfhe/dp_noise.hpp"
#include "dpfhe/enc_fixed.hpp"
#include "dpfhe/errors.hpp"

namespace dpfhe {

inline constexpr int kMaxPlaintextDomains = 12;
inline constexpr int kMaxEncryptedDomains = 8;

// Plaintext domain counts x_1..x_n.
struct Histogram {
  std::vector<double> counts;

  int size() const { return static_cast<int>(counts.size()); }
  double operator[](int i) const { return counts[static_cast<std::size_t>(i)]; }
};

// Inclusive, 1-based range of domains.
struct Bucket {
  int first = 1;
  int last = 1;

  int size() const { return last - first + 1; }
  friend bool operator==(const Bucket&, const Bucket&) = default;
};

struct Partition {
  int n = 1;
  std::uint32_t cut_mask = 0;

  static std::uint32_t mask_limit(int n) { return std::uint32_t{1} << (n - 1); }

  static Partition checked(int n, std::uint32_t cut_mask) {
    if (n < 1 || n > 31) throw PreconditionError("domain size must be in [1, 31]");
    if (cut_mask >= mask_limit(n))
      throw PreconditionError("cut mask " + std::to_string(cut_mask) + " invalid for n = " +
                              std::to_string(n));
    return Partition{n, cut_mask};
  }

  // Builds the mask from an ordered list of buckets that tile 1..n.
  static Partition from_buckets(int n, std::span<const Bucket> buckets) {
    std::uint32_t mask = 0;
    int expected_first = 1;
    for (const auto& b : buckets) {
      if (b.first != expected_first || b.last < b.first || b.last > n)
        throw PreconditionError("buckets must be contiguous, ordered and cover 1..n");
      if (b.last < n) mask |= std::uint32_t{1} << (b.last - 1);
      expected_first = b.last + 1;
    }
    if (expected_first != n + 1)
      throw PreconditionError("buckets must be contiguous, ordered and cover 1..n");
    return checked(n, mask);
  }

  std::vector<Bucket> buckets() const {
    std::vector<Bucket> out;
    int first = 1;
    for (int i = 1; i < n; ++i) {
      if ((cut_mask >> (i - 1)) & 1) {
        out.push_back({first, i});
        first = i + 1;
      }
    }
    out.push_back({first, n});
    return out;
  }

  int num_buckets() const { return std::popcount(cut_mask) + 1; }

  friend bool operator==(const Partition&, const Partition&) = default;
};

// All 2^(n-1) partitions of 1..n in ascending mask order.
inline std::vector<Partition> enumerate_partitions(int n, int max_n = kMaxPlaintextDomains) {
  if (n < 1) throw PreconditionError("domain size must be at least 1");
  if (n > max_n)
    throw PreconditionError("domain size " + std::to_string(n) + " exceeds the limit of " +
                            std::to_string(max_n) + " (2^(n-1) candidate partitions)");
  std::vector<Partition> out;
  out.reserve(Partition::mask_limit(n));
  for (std::uint32_t m = 0; m < Partition::mask_limit(n); ++m) out.push_back({n, m});
  return out;
}

inline std::size_t interval_count(int n) {
  return static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1) / 2;
}

// Canonical id of interval [l, r]: ordered by l, then by r.
inline std::size_t interval_index(int n, int l, int r) {
  if (l < 1 || l > r || r > n)
    throw PreconditionError("interval [" + std::to_string(l) + ", " + std::to_string(r) +
                            "] invalid for n = " + std::to_string(n));
  const auto lm = static_cast<std::size_t>(l - 1);
  return lm * static_cast<std::size_t>(n) - lm * (lm - 1) / 2 + static_cast<std::size_t>(r - l);
}

inline std::vector<Bucket> enumerate_intervals(int n) {
  std::vector<Bucket> out;
  out.reserve(interval_count(n));
  for (int l = 1; l <= n; ++l)
    for (int r = l; r <= n; ++r) out.push_back({l, r});
  return out;
}

struct PartitionerOptions {
  // Laplace sensitivity of one interval's L1 deviation.
  double cost_sensitivity = 2.0;
  // Worker threads for the interval and candidate loops; 1 runs inline.
  unsigned threads = 1;
  int max_n = kMaxEncryptedDomains;
};

struct EncCostTable {
  int n = 0;
  std::vector<EncWord> costs;  // indexed by interval_index

  const EncWord& at(int l, int r) const { return costs.at(interval_index(n, l, r)); }
};

struct EncArgmin {
  std::vector<EncBit> index_bits;  // n-1 bits of the winning cut mask
  EncWord cost;

  void digest_into(Fnv1a& h) const {
    h.update(index_bits.size());
    for (const auto& bit : index_bits) bit.digest_into(h);
    cost.digest_into(h);
  }
};

struct CostCandidate {
  EncWord cost;
  std::uint32_t cut_mask = 0;
};

namespace detail {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
// handled by exactly one worker, so results written to slot i are
// schedule-independent.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < count; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void require_domain(std::span<const EncWord> enc_x, int l, int r) {
  interval_index(static_cast<int>(enc_x.size()), l, r);
}

}  // namespace detail

// L1 deviation of x_l..x_r from their fixed-point mean, where the mean is
// floor(sum * floor(2^8 / len) / 2^8).
template <GateBackend B>
EncWord interval_cost(B& b, std::span<const EncWord> enc_x, int l, int r) {
  detail::require_domain(enc_x, l, r);
  const auto first = static_cast<std::size_t>(l - 1);
  const auto len = static_cast<std::size_t>(r - l + 1);
  const auto members = enc_x.subspan(first, len);
  const EncWord total = enc_sum(b, members);
  const PlainFixed reciprocal = encode(1.0 / static_cast<double>(len), kReciprocalFormat);
  const EncWord mean = enc_mul_plain(b, total, reciprocal);
  std::vector<EncWord> deviations;
  deviations.reserve(len);
  for (const auto& x : members) deviations.push_back(enc_abs(b, enc_sub(b, x, mean)));
  return enc_sum(b, deviations);
}

// Noisy deviation for every contiguous interval; one epsilon1 draw per
// interval, labelled by interval index.
template <GateBackend B>
EncCostTable build_cost_table(B& b, std::span<const EncWord> enc_x, double epsilon1,
                              const NoiseSource& noise, NoiseLog* log,
                              const PartitionerOptions& options = {}) {
  const int n = static_cast<int>(enc_x.size());
  if (n < 1) throw PreconditionError("empty histogram");
  const LaplaceParams params{options.cost_sensitivity, epsilon1};
  params.scale();
  const auto intervals = enumerate_intervals(n);
  EncCostTable table{n, std::vector<EncWord>(intervals.size())};
  detail::parallel_for(intervals.size(), options.threads, [&](std::size_t i) {
    const auto& iv = intervals[i];
    const EncWord dev = interval_cost(b, enc_x, iv.first, iv.last);
    table.costs[i] = add_noise_enc(b, dev, params, noise, {NoisePhase::kIntervalCost, i}, log,
                                   NoiseAddition::kSaturating);
  });
  return table;
}

// Saturating sum of the partition's interval costs, left to right.
template <GateBackend B>
EncWord partition_total_cost(B& b, const EncCostTable& table, const Partition& p) {
  if (p.n != table.n) throw PreconditionError("partition and cost table disagree on n");
  const auto buckets = p.buckets();
  EncWord acc = table.at(buckets.front().first, buckets.front().last);
  for (std::size_t j = 1; j < buckets.size(); ++j)
    acc = enc_add_sat(b, acc, table.at(buckets[j].first, buckets[j].last));
  return acc;
}

// Pairwise tournament over (cost, mask) in list order. The right-hand
// contender wins only when strictly cheaper, so the earliest minimum survives
// every round.
template <GateBackend B>
EncArgmin select_min_partition(B& b, std::span<const CostCandidate> candidates, int n) {
  if (candidates.empty()) throw PreconditionError("no candidate partitions");
  if (n < 1) throw PreconditionError("domain size must be at least 1");
  const auto width = static_cast<std::size_t>(n - 1);
  std::vector<EncArgmin> round;
  round.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (c.cut_mask >= Partition::mask_limit(n))
      throw PreconditionError("candidate mask out of range");
    EncArgmin e;
    e.cost = c.cost;
    for (std::size_t i = 0; i < width; ++i) e.index_bits.push_back(b.trivial((c.cut_mask >> i) & 1));
    round.push_back(std::move(e));
  }
  while (round.size() > 1) {
    std::vector<EncArgmin> next;
    next.reserve((round.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < round.size(); i += 2) {
      const auto& left = round[i];
      const auto& right = round[i + 1];
      const EncBit right_wins = enc_lt(b, right.cost, left.cost);
      EncArgmin w;
      w.cost = enc_select(b, right_wins, right.cost, left.cost);
      for (std::size_t k = 0; k < width; ++k)
        w.index_bits.push_back(b.gate_mux(right_wins, right.index_bits[k], left.index_bits[k]));
      next.push_back(std::move(w));
    }
    if (round.size() % 2 == 1) next.push_back(std::move(round.back()));
    round = std::move(next);
  }
  return std::move(round.front());
}

// Totals for every candidate in canonical order, then the tournament.
template <GateBackend B>
EncArgmin select_partition(B& b, const EncCostTable& table, const PartitionerOptions& options = {}) {
  const auto partitions = enumerate_partitions(table.n, options.max_n);
  std::vector<CostCandidate> candidates(partitions.size());
  detail::parallel_for(partitions.size(), options.threads, [&](std::size_t i) {
    candidates[i] = CostCandidate{partition_total_cost(b, table, partitions[i]),
                                  partitions[i].cut_mask};
  });
  return select_min_partition(b, std::span<const CostCandidate>(candidates), table.n);
}

template <GateBackend B>
std::uint32_t decrypt_argmin(const B& b, const SecretKey& key, const EncArgmin& argmin) {
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < argmin.index_bits.size(); ++i)
    if (b.decrypt_bit(key, argmin.index_bits[i])) mask |= std::uint32_t{1} << i;
  return mask;
}

// s_j = sum of x over bucket j, left fold.
template <GateBackend B>
std::vector<EncWord> bucket_sums(B& b, std::span<const EncWord> enc_x, const Partition& p) {
  if (p.n != static_cast<int>(enc_x.size()))
    throw PreconditionError("partition and histogram disagree on n");
  std::vector<EncWord> sums;
  for (const auto& bucket : p.buckets())
    sums.push_back(enc_sum(b, enc_x.subspan(static_cast<std::size_t>(bucket.first - 1),
                                            static_cast<std::size_t>(bucket.size()))));
  return sums;
}

// s'_j = s_j + Lap(1 / epsilon2); one record moves one bucket sum by 1.
template <GateBackend B>
std::vector<EncWord> noisy_bucket_sums(B& b, std::span<const EncWord> sums, double epsilon2,
                                       const NoiseSource& noise, NoiseLog* log) {
  const LaplaceParams params{1.0, epsilon2};
  params.scale();
  std::vector<EncWord> out;
  out.reserve(sums.size());
  for (std::size_t j = 0; j < sums.size(); ++j)
    out.push_back(add_noise_enc(b, sums[j], params, noise, {NoisePhase::kBucketSum, j}, log));
  return out;
}

}  // namespace dpfhe
