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

// In-process simulation of the four-party summary construction:
//
//   DS  key generation, key distribution to the data owners
//   DO  encrypt one record each (one-hot over the n domains), send to CS
//   CS  aggregate, partition and noise homomorphically
//   DS  decrypt only values that carry a DP-protection capability
//   CS  expand the decrypted bucket sums into the summary, answer queries
//
// Every message is appended to a totally ordered transcript before it is
// delivered; delivery is FIFO per (sender, receiver) pair. The CS and the DS
// are separate objects with no shared state.

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "dpfhe/dp_noise.hpp"
#include "dpfhe/enc_fixed.hpp"
#include "dpfhe/errors.hpp"
#include "dpfhe/gate_backend.hpp"
#include "dpfhe/hash.hpp"
#include "dpfhe/partitioner.hpp"
#include "dpfhe/summary_query.hpp"

namespace dpfhe {

enum class Role : std::uint8_t { kDataOwner, kComputationServer, kDecryptionServer, kDataAnalyst };

struct Party {
  Role role = Role::kComputationServer;
  int index = 0;  // DO_j / DA_i number, 0 for the servers

  static Party owner(int j) { return {Role::kDataOwner, j}; }
  static Party analyst(int i) { return {Role::kDataAnalyst, i}; }
  static Party cs() { return {Role::kComputationServer, 0}; }
  static Party ds() { return {Role::kDecryptionServer, 0}; }

  std::string name() const {
    switch (role) {
      case Role::kDataOwner: return "DO[" + std::to_string(index) + "]";
      case Role::kComputationServer: return "CS";
      case Role::kDecryptionServer: return "DS";
      case Role::kDataAnalyst: return "DA[" + std::to_string(index) + "]";
    }
    return "?";
  }

  friend auto operator<=>(const Party&, const Party&) = default;
};

// Marks ciphertexts as DP-protected. The noising stage issues a token over the
// digest of each protected ciphertext; the DS decrypts nothing without one.
class CapabilityIssuer {
 public:
  explicit CapabilityIssuer(std::uint64_t secret) : secret_(secret) {}

  std::uint64_t issue(std::uint64_t digest) const { return mix64({secret_, digest, 0x6470ULL}); }
  bool verify(std::uint64_t digest, std::uint64_t token) const { return issue(digest) == token; }

 private:
  std::uint64_t secret_;
};

struct KeyDist {
  SecretKey key;
};

// One data owner's record: an encrypted one-hot vector over the domains.
struct Record {
  std::vector<EncWord> one_hot;
};

struct DecryptRequest {
  std::optional<EncArgmin> partition;
  std::vector<EncWord> noisy_sums;
  // One token per item: the partition first (when present), then each sum.
  std::vector<std::uint64_t> tokens;
};

struct DecryptReply {
  std::optional<std::uint32_t> cut_mask;
  std::vector<std::int64_t> s_prime_raw;
  FixedFormat format{};
  bool dp_protected = false;
};

struct Query {
  int first = 1;
  int last = 1;
};

struct Response {
  double value = 0;
};

using Payload = std::variant<KeyDist, Record, DecryptRequest, DecryptReply, Query, Response>;

inline const char* variant_name(const Payload& p) {
  static constexpr const char* kNames[] = {"KeyDist",     "Record", "DecryptRequest",
                                           "DecryptReply", "Query",  "Response"};
  return kNames[p.index()];
}

inline std::vector<std::uint64_t> request_item_digests(const DecryptRequest& req) {
  std::vector<std::uint64_t> out;
  if (req.partition) {
    Fnv1a h;
    req.partition->digest_into(h);
    out.push_back(h.digest());
  }
  for (const auto& w : req.noisy_sums) {
    Fnv1a h;
    w.digest_into(h);
    out.push_back(h.digest());
  }
  return out;
}

inline std::uint64_t payload_digest(const Payload& payload) {
  Fnv1a h;
  h.update(static_cast<std::uint64_t>(payload.index()));
  std::visit(
      [&h](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, KeyDist>) {
          h.update(p.key.id);
          h.update(p.key.material.data(), p.key.material.size());
        } else if constexpr (std::is_same_v<T, Record>) {
          for (const auto& w : p.one_hot) w.digest_into(h);
        } else if constexpr (std::is_same_v<T, DecryptRequest>) {
          for (auto d : request_item_digests(p)) h.update(d);
          for (auto t : p.tokens) h.update(t);
        } else if constexpr (std::is_same_v<T, DecryptReply>) {
          h.update(p.cut_mask ? 0x100000000ULL | *p.cut_mask : 0);
          for (auto r : p.s_prime_raw) h.update(static_cast<std::uint64_t>(r));
          h.update(static_cast<std::uint64_t>(p.format.total_bits) << 8 |
                   static_cast<std::uint64_t>(p.format.frac_bits));
          h.update(p.dp_protected ? 1 : 0);
        } else if constexpr (std::is_same_v<T, Query>) {
          h.update(static_cast<std::uint64_t>(p.first));
          h.update(static_cast<std::uint64_t>(p.last));
        } else {
          h.update(std::bit_cast<std::uint64_t>(p.value));
        }
      },
      payload);
  return h.digest();
}

struct Message {
  std::uint64_t seq = 0;
  Party sender;
  Party receiver;
  Payload payload;
};

class Transcript {
 public:
  const Message& append(Party sender, Party receiver, Payload payload) {
    messages_.push_back(Message{messages_.size() + 1, sender, receiver, std::move(payload)});
    return messages_.back();
  }

  const std::vector<Message>& messages() const { return messages_; }
  // Mutable access, for fault-injection tests.
  std::vector<Message>& mutable_messages() { return messages_; }

  // One line per message: sequence, sender, receiver, variant, payload digest.
  std::string export_lines() const {
    std::string out;
    char buf[192];
    for (const auto& m : messages_) {
      std::snprintf(buf, sizeof buf,
                    "{\"seq\":%llu,\"sender\":\"%s\",\"receiver\":\"%s\",\"variant\":\"%s\","
                    "\"digest\":\"%s\"}\n",
                    static_cast<unsigned long long>(m.seq), m.sender.name().c_str(),
                    m.receiver.name().c_str(), variant_name(m.payload),
                    hex64(payload_digest(m.payload)).c_str());
      out += buf;
    }
    return out;
  }

 private:
  std::vector<Message> messages_;
};

// Mailboxes with FIFO delivery per (sender, receiver) pair. Every send is
// recorded in the transcript first.
class Network {
 public:
  explicit Network(Transcript& transcript) : transcript_(transcript) {}

  void send(Party from, Party to, Payload payload) {
    const Message& m = transcript_.append(from, to, std::move(payload));
    queues_[{from, to}].push_back(m);
  }

  Message receive(Party from, Party to) {
    auto it = queues_.find({from, to});
    if (it == queues_.end() || it->second.empty())
      throw PreconditionError("no pending message from " + from.name() + " to " + to.name());
    Message m = std::move(it->second.front());
    it->second.pop_front();
    return m;
  }

  template <class T>
  T receive_as(Party from, Party to) {
    Message m = receive(from, to);
    if (auto* p = std::get_if<T>(&m.payload)) return std::move(*p);
    throw PreconditionError(std::string("unexpected ") + variant_name(m.payload) + " from " +
                            from.name());
  }

 private:
  Transcript& transcript_;
  std::map<std::pair<Party, Party>, std::deque<Message>> queues_;
};

// Encrypted one-hot vector with a 1 at `domain` (1-based).
template <GateBackend B>
Record do_encrypt_record(const B& b, const SecretKey& key, int domain, int n, FixedFormat fmt) {
  if (n < 1 || domain < 1 || domain > n)
    throw PreconditionError("record domain " + std::to_string(domain) + " outside 1.." +
                            std::to_string(n));
  Record r;
  r.one_hot.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) r.one_hot.push_back(enc_encode(b, key, i == domain ? 1.0 : 0.0, fmt));
  return r;
}

// Component-wise sum of the records: the encrypted histogram.
template <GateBackend B>
std::vector<EncWord> cs_aggregate(B& b, std::span<const Record> records, int n_domains,
                                  const FixedFormat& fmt) {
  const auto n = static_cast<std::size_t>(n_domains);
  if (records.empty())
    return std::vector<EncWord>(n, enc_trivial(b, encode(0.0, fmt)));
  std::vector<EncWord> hist = records.front().one_hot;
  if (hist.size() != n) throw PreconditionError("record length mismatch");
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].one_hot.size() != n) throw PreconditionError("record length mismatch");
    for (std::size_t i = 0; i < n; ++i) hist[i] = enc_add(b, hist[i], records[r].one_hot[i]);
  }
  return hist;
}

// Decrypts a request only if every item carries a valid capability.
template <GateBackend B>
DecryptReply ds_decrypt_summary(const B& b, const SecretKey& key, const DecryptRequest& req,
                                const CapabilityIssuer& verifier) {
  const auto digests = request_item_digests(req);
  if (digests.empty()) throw DecryptionRefusedError("empty decryption request");
  if (req.tokens.size() != digests.size())
    throw DecryptionRefusedError("decryption request lacks DP-protection capabilities");
  for (std::size_t i = 0; i < digests.size(); ++i)
    if (!verifier.verify(digests[i], req.tokens[i]))
      throw DecryptionRefusedError("ciphertext is not tagged as DP-protected");

  DecryptReply reply;
  reply.dp_protected = true;
  if (req.partition) reply.cut_mask = decrypt_argmin(b, key, *req.partition);
  for (const auto& w : req.noisy_sums) {
    reply.s_prime_raw.push_back(enc_decrypt(b, key, w).raw);
    reply.format = w.format;
  }
  return reply;
}

// ---------------------------------------------------------------------------
// Entities

class DataOwner {
 public:
  DataOwner(int index, int domain) : index_(index), domain_(domain) {}

  void receive_key(const KeyDist& msg) { key_ = msg.key; }
  bool holds_key() const { return key_.has_value(); }
  Party party() const { return Party::owner(index_); }

  template <GateBackend B>
  Record encrypt(const B& b, int n, FixedFormat fmt) const {
    if (!key_) throw PreconditionError(party().name() + " has no key");
    return do_encrypt_record(b, *key_, domain_, n, fmt);
  }

 private:
  int index_;
  int domain_;
  std::optional<SecretKey> key_;
};

struct PhaseStats {
  GateStats aggregation;
  GateStats cost_table;
  GateStats argmin;
  GateStats bucket_sums;

  GateStats construction() const {
    GateStats s = cost_table;
    for (std::size_t i = 0; i < kGateKindCount; ++i)
      s.counts[i] += argmin.counts[i] + bucket_sums.counts[i];
    return s;
  }
  GateStats total() const {
    GateStats s = construction();
    for (std::size_t i = 0; i < kGateKindCount; ++i) s.counts[i] += aggregation.counts[i];
    return s;
  }
};

// Holds ciphertexts, the public configuration and, once decrypted, the
// DP-protected partition, S' and x'. Has no key.
template <GateBackend B>
class ComputationServer {
 public:
  struct Params {
    int n = 1;
    FixedFormat format{};
    PrivacyBudget budget{};
    PartitionerOptions partitioner{};
  };

  ComputationServer(B& backend, Params params, NoiseSource noise, CapabilityIssuer issuer)
      : b_(backend), params_(params), noise_(std::move(noise)), issuer_(issuer) {}

  static constexpr bool holds_key() { return false; }

  void receive_record(Record r) { records_.push_back(std::move(r)); }
  std::size_t record_count() const { return records_.size(); }

  void aggregate() {
    const GateStats before = b_.stats();
    enc_x_ = cs_aggregate(b_, std::span<const Record>(records_), params_.n, params_.format);
    phases_.aggregation = b_.stats() - before;
  }

  DecryptRequest partition_request() {
    GateStats before = b_.stats();
    const EncCostTable table =
        build_cost_table(b_, std::span<const EncWord>(enc_x_), params_.budget.epsilon1, noise_,
                         &noise_log_, params_.partitioner);
    phases_.cost_table = b_.stats() - before;
    before = b_.stats();
    EncArgmin argmin = select_partition(b_, table, params_.partitioner);
    phases_.argmin = b_.stats() - before;

    DecryptRequest req;
    req.partition = std::move(argmin);
    sign(req);
    return req;
  }

  void receive_partition(const DecryptReply& reply) {
    if (!reply.cut_mask) throw PreconditionError("reply carries no partition");
    partition_ = Partition::checked(params_.n, *reply.cut_mask);
  }

  DecryptRequest sums_request() {
    if (!partition_) throw PreconditionError("partition not yet decrypted");
    const GateStats before = b_.stats();
    const auto sums = bucket_sums(b_, std::span<const EncWord>(enc_x_), *partition_);
    DecryptRequest req;
    req.noisy_sums = noisy_bucket_sums(b_, std::span<const EncWord>(sums),
                                       params_.budget.epsilon2, noise_, &noise_log_);
    phases_.bucket_sums = b_.stats() - before;
    sign(req);
    return req;
  }

  void receive_sums(const DecryptReply& reply) {
    if (!partition_) throw PreconditionError("partition not yet decrypted");
    s_prime_raw_ = reply.s_prime_raw;
    std::vector<double> s_prime;
    for (auto raw : reply.s_prime_raw) s_prime.push_back(PlainFixed{raw, reply.format}.value());
    summary_ = uniform_expand(s_prime, *partition_);
    summary_->provenance.budget = params_.budget;
    summary_->provenance.format = params_.format;
  }

  double answer(const Query& q) const {
    if (!summary_) throw PreconditionError("summary not yet constructed");
    return range_query(*summary_, q.first, q.last);
  }

  // Plaintexts the CS has ever held.
  std::set<std::string> plaintext_inventory() const {
    std::set<std::string> out;
    if (partition_) out.insert("B");
    if (!s_prime_raw_.empty()) out.insert("S'");
    if (summary_) out.insert("x'");
    return out;
  }

  const std::vector<EncWord>& encrypted_histogram() const { return enc_x_; }
  const std::optional<DpSummary>& summary() const { return summary_; }
  std::optional<DpSummary>& mutable_summary() { return summary_; }
  const std::vector<std::int64_t>& s_prime_raw() const { return s_prime_raw_; }
  const PhaseStats& phases() const { return phases_; }
  const NoiseLog& noise_log() const { return noise_log_; }

 private:
  void sign(DecryptRequest& req) const {
    for (auto d : request_item_digests(req)) req.tokens.push_back(issuer_.issue(d));
  }

  B& b_;
  Params params_;
  NoiseSource noise_;
  CapabilityIssuer issuer_;
  std::vector<Record> records_;
  std::vector<EncWord> enc_x_;
  std::optional<Partition> partition_;
  std::vector<std::int64_t> s_prime_raw_;
  std::optional<DpSummary> summary_;
  PhaseStats phases_;
  NoiseLog noise_log_;
};

// Generates the key and decrypts DP-protected requests. Served requests are
// cached, so a replay gets the identical reply.
template <GateBackend B>
class DecryptionServer {
 public:
  DecryptionServer(const B& backend, std::uint64_t key_seed, CapabilityIssuer verifier)
      : b_(backend), key_(keygen(key_seed)), verifier_(verifier) {}

  static constexpr bool holds_key() { return true; }

  KeyDist key_distribution() const { return KeyDist{key_}; }

  DecryptReply decrypt(const DecryptRequest& req) {
    Fnv1a h;
    for (auto d : request_item_digests(req)) h.update(d);
    for (auto t : req.tokens) h.update(t);
    if (auto it = served_.find(h.digest()); it != served_.end()) return it->second;
    DecryptReply reply = ds_decrypt_summary(b_, key_, req, verifier_);
    if (reply.cut_mask) partition_ = Partition::checked(
                            static_cast<int>(req.partition->index_bits.size()) + 1,
                            *reply.cut_mask);
    if (!req.noisy_sums.empty()) {
      s_prime_raw_ = reply.s_prime_raw;
      if (partition_ && static_cast<int>(s_prime_raw_.size()) == partition_->num_buckets()) {
        std::vector<double> s_prime;
        for (auto raw : s_prime_raw_) s_prime.push_back(PlainFixed{raw, reply.format}.value());
        retained_ = uniform_expand(s_prime, *partition_);
      }
    }
    served_.emplace(h.digest(), reply);
    return reply;
  }

  std::set<std::string> plaintext_inventory() const {
    std::set<std::string> out;
    if (partition_) out.insert("B");
    if (!s_prime_raw_.empty()) out.insert("S'");
    if (retained_) out.insert("x'");
    return out;
  }

  const SecretKey& key() const { return key_; }

 private:
  const B& b_;
  SecretKey key_;
  CapabilityIssuer verifier_;
  std::map<std::uint64_t, DecryptReply> served_;
  std::optional<Partition> partition_;
  std::vector<std::int64_t> s_prime_raw_;
  std::optional<DpSummary> retained_;
};

// ---------------------------------------------------------------------------
// Configuration

struct DataSource {
  enum class Kind { kInlineHistogram, kRandomHistogram, kRecords };
  Kind kind = Kind::kRandomHistogram;
  std::vector<double> histogram;  // kInlineHistogram
  std::vector<int> records;       // kRecords: 1-based domain per record
  int max_value = 10;             // kRandomHistogram: counts uniform on 0..max_value
};

struct PipelineConfig {
  int n = 8;
  FixedFormat format{16, 8};
  PrivacyBudget budget{};
  std::uint64_t seed = 0;
  DataSource data{};
  // Empty: derived from the histogram contents.
  std::string dataset_id;
  PartitionerOptions partitioner{};
  bool zero_noise = false;
  std::map<NoiseLabel, double> forced_noise;
  double gate_seconds = kDefaultGateSeconds;
};

inline std::uint64_t key_seed(const PipelineConfig& c) { return mix64({c.seed, 0x6b6579ULL}); }
inline std::uint64_t noise_seed(const PipelineConfig& c) { return mix64({c.seed, 0x6e6f697365ULL}); }
inline std::uint64_t data_seed(const PipelineConfig& c) { return mix64({c.seed, 0x64617461ULL}); }
inline std::uint64_t capability_seed(const PipelineConfig& c) { return mix64({c.seed, 0x636170ULL}); }

inline NoiseSource make_noise_source(const PipelineConfig& c) {
  NoiseSource s = c.zero_noise ? NoiseSource::zero() : NoiseSource(noise_seed(c));
  for (const auto& [label, value] : c.forced_noise) s.force(label, value);
  return s;
}

// Integer counts uniform on {0, ..., max_value}, deterministic per seed.
inline std::vector<int> random_counts(int n, std::uint64_t seed, int max_value = 10) {
  if (n < 1) throw PreconditionError("domain size must be at least 1");
  if (max_value < 0) throw PreconditionError("max value must be non-negative");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n));
  const auto range = static_cast<unsigned __int128>(max_value) + 1;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t z = mix64({seed, static_cast<std::uint64_t>(i)});
    out.push_back(static_cast<int>((static_cast<unsigned __int128>(z) * range) >> 64));
  }
  return out;
}

// Resolves the data source into per-record domains (1-based) and the
// ground-truth histogram.
inline std::pair<std::vector<int>, Histogram> resolve_records(const PipelineConfig& c) {
  std::vector<double> counts(static_cast<std::size_t>(c.n), 0.0);
  std::vector<int> records;
  auto from_counts = [&](const std::vector<double>& hist) {
    if (static_cast<int>(hist.size()) != c.n)
      throw PreconditionError("histogram has " + std::to_string(hist.size()) +
                              " domains, expected " + std::to_string(c.n));
    for (int i = 0; i < c.n; ++i) {
      const double v = hist[static_cast<std::size_t>(i)];
      if (v < 0 || v != std::floor(v))
        throw PreconditionError("histogram counts must be non-negative integers");
      counts[static_cast<std::size_t>(i)] = v;
      for (int k = 0; k < static_cast<int>(v); ++k) records.push_back(i + 1);
    }
  };
  switch (c.data.kind) {
    case DataSource::Kind::kInlineHistogram:
      from_counts(c.data.histogram);
      break;
    case DataSource::Kind::kRandomHistogram: {
      const auto ints = random_counts(c.n, data_seed(c), c.data.max_value);
      from_counts(std::vector<double>(ints.begin(), ints.end()));
      break;
    }
    case DataSource::Kind::kRecords:
      for (int d : c.data.records) {
        if (d < 1 || d > c.n)
          throw PreconditionError("record domain " + std::to_string(d) + " outside 1.." +
                                  std::to_string(c.n));
        counts[static_cast<std::size_t>(d - 1)] += 1;
      }
      records = c.data.records;
      break;
  }
  return {records, Histogram{counts}};
}

inline std::string derive_dataset_id(const PipelineConfig& c, const Histogram& x) {
  if (!c.dataset_id.empty()) return c.dataset_id;
  Fnv1a h;
  h.update(static_cast<std::uint64_t>(c.n));
  for (double v : x.counts) h.update(std::bit_cast<std::uint64_t>(v));
  return "hist:" + hex64(h.digest());
}

struct PipelineResult {
  DpSummary summary;
  Transcript transcript;
  NoiseLog noise_log;
  PhaseStats phases;
  Histogram histogram;
  std::string dataset_id;
  std::vector<std::int64_t> s_prime_raw;

  std::uint32_t cut_mask() const { return summary.partition.cut_mask; }
};

// ---------------------------------------------------------------------------
// Orchestration

template <GateBackend B>
class ProtocolSimulation {
 public:
  ProtocolSimulation(B& backend, PipelineConfig config, BudgetLedger& ledger)
      : b_(backend),
        config_(std::move(config)),
        ledger_(ledger),
        network_(transcript_),
        cs_(backend,
            {config_.n, config_.format, config_.budget, config_.partitioner},
            make_noise_source(config_), CapabilityIssuer(capability_seed(config_))),
        ds_(backend, key_seed(config_), CapabilityIssuer(capability_seed(config_))) {}

  // Steps 1-6. Throws BudgetExhaustedError if the dataset's budget was spent.
  PipelineResult run() {
    if (ran_) throw PreconditionError("pipeline already ran in this session");
    config_.format.validate();
    config_.budget.validate();
    if (config_.n < 1 || config_.n > config_.partitioner.max_n)
      throw PreconditionError("domain size " + std::to_string(config_.n) +
                              " outside 1.." + std::to_string(config_.partitioner.max_n));
    auto [records, histogram] = resolve_records(config_);
    const std::string dataset_id = derive_dataset_id(config_, histogram);
    if (budget_check(config_.budget, ledger_, dataset_id) == BudgetStatus::kExhausted)
      throw BudgetExhaustedError("privacy budget for dataset '" + dataset_id +
                                 "' is already spent");
    ran_ = true;

    // 1. Key generation and distribution.
    for (std::size_t j = 0; j < records.size(); ++j)
      owners_.emplace_back(static_cast<int>(j + 1), records[j]);
    for (auto& owner : owners_) {
      network_.send(Party::ds(), owner.party(), ds_.key_distribution());
      owner.receive_key(network_.receive_as<KeyDist>(Party::ds(), owner.party()));
    }

    // 2. Encryption by each data owner.
    for (const auto& owner : owners_) {
      network_.send(owner.party(), Party::cs(), owner.encrypt(b_, config_.n, config_.format));
      cs_.receive_record(network_.receive_as<Record>(owner.party(), Party::cs()));
    }

    // 3. Aggregation.
    cs_.aggregate();

    // 4-5. Partitioning; the DS decrypts only the noisy argmin index.
    network_.send(Party::cs(), Party::ds(), cs_.partition_request());
    deliver_to_ds();
    cs_.receive_partition(network_.receive_as<DecryptReply>(Party::ds(), Party::cs()));

    // 5-6. Noisy bucket sums, decrypted by the DS, expanded by the CS.
    network_.send(Party::cs(), Party::ds(), cs_.sums_request());
    deliver_to_ds();
    cs_.receive_sums(network_.receive_as<DecryptReply>(Party::ds(), Party::cs()));

    auto& summary = *cs_.mutable_summary();
    Fnv1a seed_digest;
    seed_digest.update(config_.seed);
    summary.provenance.seed_digest = hex64(seed_digest.digest());

    PipelineResult result;
    result.summary = summary;
    result.transcript = transcript_;
    result.noise_log = cs_.noise_log();
    result.phases = cs_.phases();
    result.histogram = histogram;
    result.dataset_id = dataset_id;
    result.s_prime_raw = cs_.s_prime_raw();
    return result;
  }

  // Step 7: analyst i asks the CS for the sum over [l, r].
  double query(int analyst, int l, int r) {
    const Party da = Party::analyst(analyst);
    network_.send(da, Party::cs(), Query{l, r});
    const Query q = network_.receive_as<Query>(da, Party::cs());
    network_.send(Party::cs(), da, Response{cs_.answer(q)});
    return network_.receive_as<Response>(Party::cs(), da).value;
  }

  const Transcript& transcript() const { return transcript_; }
  const ComputationServer<B>& cs() const { return cs_; }
  const DecryptionServer<B>& ds() const { return ds_; }
  DecryptionServer<B>& ds() { return ds_; }
  const std::vector<DataOwner>& owners() const { return owners_; }
  CapabilityIssuer capabilities() const { return CapabilityIssuer(capability_seed(config_)); }

 private:
  void deliver_to_ds() {
    const auto req = network_.receive_as<DecryptRequest>(Party::cs(), Party::ds());
    network_.send(Party::ds(), Party::cs(), ds_.decrypt(req));
  }

  B& b_;
  PipelineConfig config_;
  BudgetLedger& ledger_;
  Transcript transcript_;
  Network network_;
  ComputationServer<B> cs_;
  DecryptionServer<B> ds_;
  std::vector<DataOwner> owners_;
  bool ran_ = false;
};

template <GateBackend B>
PipelineResult run_pipeline(B& backend, const PipelineConfig& config, BudgetLedger& ledger) {
  ProtocolSimulation<B> sim(backend, config, ledger);
  return sim.run();
}

// ---------------------------------------------------------------------------
// Visibility assertions

enum class VisibilityCheck : std::size_t {
  kNoKeyToCs = 0,            // (a) no key material in any CS-bound message
  kDsOutputsDpProtected,     // (b) the DS only decrypts and releases DP-protected data
  kAnalystSeesSummaryOnly,   // (c) analysts only receive answers computed from x'
  kCsDsProtocolOnly,         // (d) CS and DS only exchange decrypt requests/replies
};

struct VisibilityReport {
  struct Check {
    std::string name;
    bool passed = true;
    std::vector<std::string> violations;
  };
  std::array<Check, 4> checks{{{"no_key_to_cs", true, {}},
                               {"ds_outputs_dp_protected", true, {}},
                               {"analyst_sees_summary_only", true, {}},
                               {"cs_ds_protocol_only", true, {}}}};

  const Check& operator[](VisibilityCheck c) const { return checks[static_cast<std::size_t>(c)]; }
  Check& operator[](VisibilityCheck c) { return checks[static_cast<std::size_t>(c)]; }
  bool ok() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }

  void fail(VisibilityCheck c, std::string why) {
    auto& check = (*this)[c];
    check.passed = false;
    check.violations.push_back(std::move(why));
  }
};

inline VisibilityReport assert_visibility(const Transcript& t, const CapabilityIssuer& verifier) {
  VisibilityReport report;
  std::optional<Partition> partition;
  std::optional<DpSummary> summary;
  int n_hint = 0;
  std::map<int, std::deque<Query>> pending_queries;
  bool last_request_verified = false;

  for (const auto& m : t.messages()) {
    const std::string where = "message " + std::to_string(m.seq) + " " + m.sender.name() + "->" +
                              m.receiver.name() + " " + variant_name(m.payload);
    const bool cs_ds = (m.sender.role == Role::kComputationServer &&
                        m.receiver.role == Role::kDecryptionServer) ||
                       (m.sender.role == Role::kDecryptionServer &&
                        m.receiver.role == Role::kComputationServer);

    if (std::holds_alternative<KeyDist>(m.payload) &&
        !(m.sender.role == Role::kDecryptionServer && m.receiver.role == Role::kDataOwner))
      report.fail(VisibilityCheck::kNoKeyToCs, where + ": key material leaves the DS->DO path");

    if (cs_ds) {
      const bool allowed =
          (m.sender.role == Role::kComputationServer &&
           std::holds_alternative<DecryptRequest>(m.payload)) ||
          (m.sender.role == Role::kDecryptionServer && std::holds_alternative<DecryptReply>(m.payload));
      if (!allowed) report.fail(VisibilityCheck::kCsDsProtocolOnly, where);
    } else if (std::holds_alternative<DecryptRequest>(m.payload) ||
               std::holds_alternative<DecryptReply>(m.payload)) {
      report.fail(VisibilityCheck::kCsDsProtocolOnly, where + ": decryption traffic off the CS-DS link");
    }

    if (const auto* req = std::get_if<DecryptRequest>(&m.payload)) {
      const auto digests = request_item_digests(*req);
      bool ok = !digests.empty() && req->tokens.size() == digests.size();
      for (std::size_t i = 0; ok && i < digests.size(); ++i)
        ok = verifier.verify(digests[i], req->tokens[i]);
      last_request_verified = ok;
      if (!ok) report.fail(VisibilityCheck::kDsOutputsDpProtected, where + ": untagged ciphertext");
      if (req->partition) n_hint = static_cast<int>(req->partition->index_bits.size()) + 1;
    }

    if (const auto* reply = std::get_if<DecryptReply>(&m.payload)) {
      if (!reply->dp_protected || !last_request_verified)
        report.fail(VisibilityCheck::kDsOutputsDpProtected,
                    where + ": plaintext released without DP protection");
      last_request_verified = false;
      if (reply->cut_mask && n_hint > 0) partition = Partition{n_hint, *reply->cut_mask};
      if (!reply->s_prime_raw.empty() && partition &&
          static_cast<int>(reply->s_prime_raw.size()) == partition->num_buckets()) {
        std::vector<double> s_prime;
        for (auto raw : reply->s_prime_raw) s_prime.push_back(PlainFixed{raw, reply->format}.value());
        summary = uniform_expand(s_prime, *partition);
      }
    }

    if (m.sender.role == Role::kDataAnalyst) {
      if (const auto* q = std::get_if<Query>(&m.payload)) pending_queries[m.sender.index].push_back(*q);
    }
    if (m.receiver.role == Role::kDataAnalyst) {
      const auto* resp = std::get_if<Response>(&m.payload);
      auto& queue = pending_queries[m.receiver.index];
      if (resp == nullptr || queue.empty() || !summary) {
        report.fail(VisibilityCheck::kAnalystSeesSummaryOnly, where);
      } else {
        const Query q = queue.front();
        queue.pop_front();
        double expected = 0;
        try {
          expected = range_query(*summary, q.first, q.last);
        } catch (const PreconditionError&) {
          expected = std::numeric_limits<double>::quiet_NaN();
        }
        if (!(resp->value == expected))
          report.fail(VisibilityCheck::kAnalystSeesSummaryOnly,
                      where + ": answer is not derived from the summary");
      }
    }
  }
  return report;
}

}  // namespace dpfhe
