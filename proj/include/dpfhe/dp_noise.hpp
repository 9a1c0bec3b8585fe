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

// Laplace mechanism, fixed-point noise quantization and budget accounting.
//
// Noise is drawn from a counter-based generator addressed by a label
// (phase, element index), so every draw is a pure function of
// (seed, label, counter). The encrypted pipeline and the plaintext oracle
// therefore see identical noise no matter in which order they consume it.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "dpfhe/enc_fixed.hpp"
#include "dpfhe/errors.hpp"
#include "dpfhe/hash.hpp"

namespace dpfhe {

// Total budget epsilon split between partition selection (epsilon1) and
// bucket-sum noising (epsilon2).
struct PrivacyBudget {
  double epsilon = 1.0;
  double epsilon1 = 0.25;
  double epsilon2 = 0.75;

  // Splits epsilon in the ratio a:b. epsilon2 is computed as the remainder so
  // that epsilon1 + epsilon2 == epsilon.
  static PrivacyBudget from_split(double epsilon, double a, double b) {
    if (!(epsilon > 0) || !(a > 0) || !(b > 0))
      throw PreconditionError("epsilon and both split weights must be positive");
    PrivacyBudget budget;
    budget.epsilon = epsilon;
    budget.epsilon1 = epsilon * a / (a + b);
    budget.epsilon2 = epsilon - budget.epsilon1;
    budget.validate();
    return budget;
  }

  void validate() const {
    if (!(epsilon > 0) || !(epsilon1 > 0) || !(epsilon2 > 0))
      throw PreconditionError("privacy budget shares must be positive");
    if (std::abs(epsilon1 + epsilon2 - epsilon) > 1e-12 * epsilon)
      throw PreconditionError("epsilon1 + epsilon2 must equal epsilon");
  }
};

struct LaplaceParams {
  double sensitivity = 1.0;
  double epsilon_share = 1.0;

  double scale() const {
    if (!(sensitivity > 0) || !(epsilon_share > 0))
      throw PreconditionError("Laplace scale requires sensitivity > 0 and epsilon > 0");
    return sensitivity / epsilon_share;
  }
};

enum class NoisePhase : std::uint8_t {
  kIntervalCost = 1,  // epsilon1, one draw per contiguous interval
  kBucketSum = 2,     // epsilon2, one draw per bucket of the chosen partition
};

inline std::string_view phase_name(NoisePhase phase) {
  switch (phase) {
    case NoisePhase::kIntervalCost: return "interval_cost";
    case NoisePhase::kBucketSum: return "bucket_sum";
  }
  return "?";
}

struct NoiseLabel {
  NoisePhase phase = NoisePhase::kIntervalCost;
  std::uint64_t index = 0;

  friend auto operator<=>(const NoiseLabel&, const NoiseLabel&) = default;
};

struct NoiseStream {
  std::uint64_t seed = 0;
  NoiseLabel label{};
  std::uint64_t counter = 0;

  // Uniform on (-1/2, 1/2), never hitting either end.
  double uniform() const {
    const std::uint64_t bits =
        mix64({seed, static_cast<std::uint64_t>(label.phase), label.index, counter});
    const double k = static_cast<double>(bits >> 11);
    return (k + 0.5) * 0x1.0p-53 - 0.5;
  }
};

// Inverse CDF of Laplace(0, scale) at u in (-1/2, 1/2).
inline double laplace_inverse_cdf(double u, double scale) {
  if (u == 0.0) return 0.0;
  const double magnitude = -scale * std::log1p(-2.0 * std::abs(u));
  return u < 0 ? -magnitude : magnitude;
}

inline double sample_laplace(const LaplaceParams& params, const NoiseStream& stream) {
  return laplace_inverse_cdf(stream.uniform(), params.scale());
}

struct QuantizedNoise {
  PlainFixed value;
  bool clamped = false;
};

// floor-truncates r into fmt; samples outside the format are clamped to its
// extremes and flagged.
inline QuantizedNoise quantize_noise(double r, FixedFormat fmt) {
  fmt.validate();
  const double scaled = std::floor(std::ldexp(r, fmt.frac_bits));
  if (scaled < static_cast<double>(fmt.min_raw())) return {PlainFixed{fmt.min_raw(), fmt}, true};
  if (scaled > static_cast<double>(fmt.max_raw())) return {PlainFixed{fmt.max_raw(), fmt}, true};
  return {PlainFixed{static_cast<std::int64_t>(scaled), fmt}, false};
}

// Seeded Laplace source with optional per-label overrides. Overrides replace
// the real-valued sample; zero() forces every sample to 0.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : seed_(seed) {}

  static NoiseSource zero() {
    NoiseSource s(0);
    s.all_zero_ = true;
    return s;
  }

  void force(NoiseLabel label, double value) { overrides_[label] = value; }

  std::uint64_t seed() const { return seed_; }
  bool all_zero() const { return all_zero_; }
  const std::map<NoiseLabel, double>& overrides() const { return overrides_; }

  double sample(const LaplaceParams& params, NoiseLabel label) const {
    if (auto it = overrides_.find(label); it != overrides_.end()) return it->second;
    if (all_zero_) return 0.0;
    return sample_laplace(params, NoiseStream{seed_, label, 0});
  }

 private:
  std::uint64_t seed_;
  bool all_zero_ = false;
  std::map<NoiseLabel, double> overrides_;
};

struct NoiseRecord {
  NoisePhase phase{};
  std::uint64_t index = 0;
  double sensitivity = 0;
  double epsilon_share = 0;
  double sample = 0;
  std::int64_t quantized_raw = 0;
  bool clamped = false;
};

// Audit log of every noise draw. Appends are serialized; records are kept in
// label order on export so the log does not depend on evaluation order.
class NoiseLog {
 public:
  NoiseLog() = default;
  NoiseLog(const NoiseLog& other) : records_(other.records()) {}
  NoiseLog& operator=(const NoiseLog& other) {
    if (this != &other) {
      auto copy = other.records();
      std::lock_guard lock(mu_);
      records_ = std::move(copy);
    }
    return *this;
  }

  void append(const NoiseRecord& r) {
    std::lock_guard lock(mu_);
    records_.push_back(r);
  }

  std::vector<NoiseRecord> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }

  std::size_t count(NoisePhase phase) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& r : records_) n += (r.phase == phase);
    return n;
  }

  // One line per draw: phase, label, sensitivity, epsilon share, real sample,
  // quantized raw value.
  std::string to_lines() const {
    auto recs = records();
    std::stable_sort(recs.begin(), recs.end(), [](const NoiseRecord& a, const NoiseRecord& b) {
      return NoiseLabel{a.phase, a.index} < NoiseLabel{b.phase, b.index};
    });
    std::string out;
    char buf[256];
    for (const auto& r : recs) {
      std::snprintf(buf, sizeof buf,
                    "{\"phase\":\"%s\",\"label\":%llu,\"sensitivity\":%.17g,"
                    "\"epsilon\":%.17g,\"sample\":%.17g,\"raw\":%lld,\"clamped\":%s}\n",
                    std::string(phase_name(r.phase)).c_str(),
                    static_cast<unsigned long long>(r.index), r.sensitivity, r.epsilon_share,
                    r.sample, static_cast<long long>(r.quantized_raw),
                    r.clamped ? "true" : "false");
      out += buf;
    }
    return out;
  }

 private:
  mutable std::mutex mu_;
  std::vector<NoiseRecord> records_;
};

// Samples, quantizes and logs one draw.
inline PlainFixed draw_noise(const LaplaceParams& params, const NoiseSource& source,
                             NoiseLabel label, FixedFormat fmt, NoiseLog* log) {
  const double r = source.sample(params, label);
  const auto q = quantize_noise(r, fmt);
  if (log != nullptr)
    log->append(NoiseRecord{label.phase, label.index, params.sensitivity, params.epsilon_share,
                            r, q.value.raw, q.clamped});
  return q.value;
}

enum class NoiseAddition { kExact, kSaturating };

// Homomorphic noising by the key-less server: the quantized sample enters the
// circuit as a trivial encoding.
template <GateBackend B>
EncWord add_noise_enc(B& b, const EncWord& w, const LaplaceParams& params,
                      const NoiseSource& source, NoiseLabel label, NoiseLog* log,
                      NoiseAddition mode = NoiseAddition::kExact) {
  const PlainFixed noise = draw_noise(params, source, label, w.format, log);
  const EncWord encoded = enc_trivial(b, noise);
  return mode == NoiseAddition::kSaturating ? enc_add_sat(b, w, encoded)
                                            : enc_add(b, w, encoded);
}

enum class BudgetStatus { kOk, kExhausted };

// Records which datasets have had a summary constructed. One construction
// per dataset per ledger.
class BudgetLedger {
 public:
  BudgetLedger() = default;
  explicit BudgetLedger(std::map<std::string, PrivacyBudget> spent) : spent_(std::move(spent)) {}

  // Reserves the budget for `dataset_id` if it is still unspent.
  BudgetStatus try_spend(const std::string& dataset_id, const PrivacyBudget& budget) {
    budget.validate();
    std::lock_guard lock(mu_);
    return spent_.emplace(dataset_id, budget).second ? BudgetStatus::kOk
                                                     : BudgetStatus::kExhausted;
  }

  bool is_spent(const std::string& dataset_id) const {
    std::lock_guard lock(mu_);
    return spent_.contains(dataset_id);
  }

  std::map<std::string, PrivacyBudget> entries() const {
    std::lock_guard lock(mu_);
    return spent_;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, PrivacyBudget> spent_;
};

inline BudgetStatus budget_check(const PrivacyBudget& budget, BudgetLedger& ledger,
                                 const std::string& dataset_id) {
  return ledger.try_spend(dataset_id, budget);
}

}  // namespace dpfhe
