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

// Boolean-gate evaluation over "encrypted" bits.
//
// Two backends share one gate interface:
//   CleartextBackend  keeps the plaintext bit plus the identity of the key that
//                     produced it, so wrong-key decryption, mixed-key gates and
//                     fixed-point overflow are all detected.
//   CountingBackend   evaluates the same circuits with no key or overflow
//                     tracking; used for gate-count benchmarks.
// Both tally every gate call. A real FHE backend would plug in behind the
// same GateBackend concept.

#pragma once

#include <array>
#include <atomic>
#include <concepts>
#include <cstdint>
#include <string>
#include <string_view>

#include "dpfhe/errors.hpp"
#include "dpfhe/hash.hpp"

namespace dpfhe {

// Symmetric key held by the decryption server and the data owners.
struct SecretKey {
  std::uint64_t id = 0;
  std::array<std::uint8_t, 32> material{};

  friend bool operator==(const SecretKey&, const SecretKey&) = default;
};

// Deterministic for a fixed seed; distinct seeds give distinct keys.
inline SecretKey keygen(std::uint64_t rng_seed) {
  SecretKey key;
  key.id = mix64({rng_seed, 0x6b6579ULL}) | 1ULL;  // never 0: 0 marks "no key"
  std::uint64_t state = key.id;
  for (std::size_t i = 0; i < key.material.size(); i += 8) {
    state = mix64(state);
    for (std::size_t j = 0; j < 8; ++j)
      key.material[i + j] = static_cast<std::uint8_t>(state >> (8 * j));
  }
  return key;
}

enum class Provenance : std::uint8_t { kEncrypted, kTrivial };

template <class Policy>
class SimulatedBackend;

// One encrypted bit. The payload is only meaningful to the backend that
// produced it.
class EncBit {
 public:
  EncBit() = default;

  Provenance provenance() const { return provenance_; }
  bool is_trivial() const { return provenance_ == Provenance::kTrivial; }
  std::uint32_t backend_id() const { return backend_id_; }

  void digest_into(Fnv1a& h) const {
    h.update((static_cast<std::uint64_t>(payload_) << 8) |
             static_cast<std::uint64_t>(provenance_));
    h.update(key_tag_);
  }

 private:
  template <class Policy>
  friend class SimulatedBackend;

  std::uint8_t payload_ = 0;
  Provenance provenance_ = Provenance::kTrivial;
  std::uint32_t backend_id_ = 0;
  std::uint64_t key_tag_ = 0;
};

enum class GateKind : std::uint8_t { kAnd, kOr, kXor, kNot, kMux };
inline constexpr std::size_t kGateKindCount = 5;

inline std::string_view gate_name(GateKind kind) {
  switch (kind) {
    case GateKind::kAnd: return "AND";
    case GateKind::kOr: return "OR";
    case GateKind::kXor: return "XOR";
    case GateKind::kNot: return "NOT";
    case GateKind::kMux: return "MUX";
  }
  return "?";
}

// Seconds per bootstrapped gate. Stands in for TFHE gate bootstrapping time;
// every gate kind costs the same.
inline constexpr double kDefaultGateSeconds = 0.013;

// Snapshot of gate counts. Differences of snapshots give per-phase counts.
struct GateStats {
  std::array<std::uint64_t, kGateKindCount> counts{};
  double unit_cost_seconds = kDefaultGateSeconds;

  std::uint64_t count(GateKind kind) const {
    return counts[static_cast<std::size_t>(kind)];
  }
  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (auto c : counts) sum += c;
    return sum;
  }
  double cost_estimate() const {
    return static_cast<double>(total()) * unit_cost_seconds;
  }

  friend GateStats operator-(GateStats a, const GateStats& b) {
    for (std::size_t i = 0; i < kGateKindCount; ++i) a.counts[i] -= b.counts[i];
    return a;
  }
  friend bool operator==(const GateStats& a, const GateStats& b) {
    return a.counts == b.counts;
  }
};

namespace detail {
inline std::uint32_t next_backend_id() {
  static std::atomic<std::uint32_t> next{1};
  return next.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

struct CleartextPolicy {
  static constexpr bool kTrackKeys = true;
  static constexpr bool kCheckOverflow = true;
  static constexpr std::string_view kName = "cleartext";
};

struct CountingPolicy {
  static constexpr bool kTrackKeys = false;
  static constexpr bool kCheckOverflow = false;
  static constexpr std::string_view kName = "counting";
};

// Cleartext simulation of a bit-wise FHE scheme. Configuration is immutable
// after construction; the gate tally is atomic so independent circuits may be
// evaluated from several threads.
template <class Policy>
class SimulatedBackend {
 public:
  static constexpr bool kChecksOverflow = Policy::kCheckOverflow;
  static constexpr std::string_view kName = Policy::kName;

  explicit SimulatedBackend(double unit_cost_seconds = kDefaultGateSeconds)
      : id_(detail::next_backend_id()), unit_cost_(unit_cost_seconds) {}

  SimulatedBackend(const SimulatedBackend&) = delete;
  SimulatedBackend& operator=(const SimulatedBackend&) = delete;

  std::uint32_t id() const { return id_; }

  EncBit encrypt_bit(const SecretKey& key, bool b) const {
    EncBit c;
    c.payload_ = b ? 1 : 0;
    c.provenance_ = Provenance::kEncrypted;
    c.backend_id_ = id_;
    c.key_tag_ = Policy::kTrackKeys ? key.id : 0;
    return c;
  }

  bool decrypt_bit(const SecretKey& key, const EncBit& c) const {
    check_owner(c);
    if constexpr (Policy::kTrackKeys) {
      if (!c.is_trivial() && c.key_tag_ != key.id)
        throw KeyMismatchError("decrypt_bit: ciphertext was produced under a different key");
    }
    return c.payload_ != 0;
  }

  // Public, key-less encoding of a known bit.
  EncBit trivial(bool b) const {
    EncBit c;
    c.payload_ = b ? 1 : 0;
    c.provenance_ = Provenance::kTrivial;
    c.backend_id_ = id_;
    return c;
  }

  EncBit gate_and(const EncBit& a, const EncBit& b) {
    return binary(GateKind::kAnd, a, b, a.payload_ & b.payload_);
  }
  EncBit gate_or(const EncBit& a, const EncBit& b) {
    return binary(GateKind::kOr, a, b, a.payload_ | b.payload_);
  }
  EncBit gate_xor(const EncBit& a, const EncBit& b) {
    return binary(GateKind::kXor, a, b, a.payload_ ^ b.payload_);
  }
  EncBit gate_not(const EncBit& a) {
    check_owner(a);
    tally(GateKind::kNot);
    EncBit out = a;
    out.payload_ = a.payload_ ^ 1;
    return out;
  }
  // sel = 1 selects `a`, sel = 0 selects `b`.
  EncBit gate_mux(const EncBit& sel, const EncBit& a, const EncBit& b) {
    check_owner(sel);
    check_owner(a);
    check_owner(b);
    tally(GateKind::kMux);
    EncBit out;
    out.backend_id_ = id_;
    out.payload_ = sel.payload_ ? a.payload_ : b.payload_;
    out.key_tag_ = merge_tags(merge_tags(sel, a), b.is_trivial() ? 0 : b.key_tag_);
    out.provenance_ = (sel.is_trivial() && a.is_trivial() && b.is_trivial())
                          ? Provenance::kTrivial
                          : Provenance::kEncrypted;
    return out;
  }

  // Simulator-only inspection used for overflow assertions. A real FHE
  // backend cannot provide this.
  bool peek(const EncBit& c) const { return c.payload_ != 0; }

  GateStats stats() const {
    GateStats s;
    for (std::size_t i = 0; i < kGateKindCount; ++i)
      s.counts[i] = counts_[i].load(std::memory_order_relaxed);
    s.unit_cost_seconds = unit_cost_;
    return s;
  }
  void reset_stats() {
    for (auto& c : counts_) c.store(0, std::memory_order_relaxed);
  }

 private:
  void check_owner(const EncBit& c) const {
    if (c.backend_id_ != id_)
      throw BackendMismatchError("gate operand belongs to a different backend instance");
  }

  void tally(GateKind kind) {
    counts_[static_cast<std::size_t>(kind)].fetch_add(1, std::memory_order_relaxed);
  }

  std::uint64_t merge_tags(const EncBit& a, const EncBit& b) const {
    const std::uint64_t ta = a.is_trivial() ? 0 : a.key_tag_;
    const std::uint64_t tb = b.is_trivial() ? 0 : b.key_tag_;
    return merge_tags(ta, tb);
  }
  std::uint64_t merge_tags(std::uint64_t ta, std::uint64_t tb) const {
    if constexpr (Policy::kTrackKeys) {
      if (ta != 0 && tb != 0 && ta != tb)
        throw KeyMismatchError("gate combines ciphertexts of two different keys");
    }
    return ta != 0 ? ta : tb;
  }

  EncBit binary(GateKind kind, const EncBit& a, const EncBit& b, int value) {
    check_owner(a);
    check_owner(b);
    tally(kind);
    EncBit out;
    out.backend_id_ = id_;
    out.payload_ = static_cast<std::uint8_t>(value & 1);
    out.key_tag_ = merge_tags(a, b);
    out.provenance_ = (a.is_trivial() && b.is_trivial()) ? Provenance::kTrivial
                                                        : Provenance::kEncrypted;
    return out;
  }

  std::uint32_t id_;
  double unit_cost_;
  std::array<std::atomic<std::uint64_t>, kGateKindCount> counts_{};
};

using CleartextBackend = SimulatedBackend<CleartextPolicy>;
using CountingBackend = SimulatedBackend<CountingPolicy>;

template <class B>
concept GateBackend = requires(B& b, const B& cb, const EncBit& x, const SecretKey& k, bool v) {
  { cb.trivial(v) } -> std::same_as<EncBit>;
  { cb.encrypt_bit(k, v) } -> std::same_as<EncBit>;
  { cb.decrypt_bit(k, x) } -> std::same_as<bool>;
  { b.gate_and(x, x) } -> std::same_as<EncBit>;
  { b.gate_or(x, x) } -> std::same_as<EncBit>;
  { b.gate_xor(x, x) } -> std::same_as<EncBit>;
  { b.gate_not(x) } -> std::same_as<EncBit>;
  { b.gate_mux(x, x, x) } -> std::same_as<EncBit>;
  { cb.peek(x) } -> std::same_as<bool>;
  { cb.stats() } -> std::same_as<GateStats>;
  { B::kChecksOverflow } -> std::convertible_to<bool>;
};

}  // namespace dpfhe
