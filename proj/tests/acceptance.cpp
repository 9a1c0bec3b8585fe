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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dpfhe/bench.hpp"
#include "dpfhe/protocol.hpp"
#include "dpfhe/reference_oracle.hpp"

namespace {

using namespace dpfhe;

struct Outcome {
  bool pass = false;
  std::string detail;
};

char buf[512];

template <class... Args>
std::string fmt(const char* f, Args... args) {
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Golden path.
Outcome golden_path() {
  PipelineConfig cfg;
  cfg.n = 7;
  cfg.format = {16, 8};
  cfg.data.kind = DataSource::Kind::kInlineHistogram;
  cfg.data.histogram = {3, 2, 6, 5, 6, 3, 4};
  cfg.zero_noise = true;
  // Strongly negative cost noise on intervals {1,2}, {3,5}, {6,7} makes
  // their partition the noisy minimum.
  for (auto [l, r] : {std::pair{1, 2}, {3, 5}, {6, 7}})
    cfg.forced_noise[{NoisePhase::kIntervalCost, interval_index(7, l, r)}] = -40.0;
  cfg.forced_noise[{NoisePhase::kBucketSum, 0}] = -0.4;
  cfg.forced_noise[{NoisePhase::kBucketSum, 1}] = -0.8;
  cfg.forced_noise[{NoisePhase::kBucketSum, 2}] = 0.8;

  CleartextBackend b;
  BudgetLedger ledger;
  ProtocolSimulation<CleartextBackend> sim(b, cfg, ledger);
  const PipelineResult r = sim.run();
  const double step = cfg.format.step();

  bool ok = r.cut_mask() == 18;
  const auto sums = bucket_sums(b, std::span<const EncWord>(sim.cs().encrypted_histogram()),
                                r.summary.partition);
  const std::vector<double> s{5, 17, 7};
  const std::vector<double> sp{4.6, 16.2, 7.8};
  const std::vector<double> xp{2.3, 2.3, 5.4, 5.4, 5.4, 3.9, 3.9};
  std::string got_s;
  for (std::size_t j = 0; j < sums.size() && j < 3; ++j) {
    const double v = enc_decode(b, sim.ds().key(), sums[j]);
    ok &= v == s[j];
    got_s += fmt("%s%g", j ? "," : "", v);
  }
  ok &= sums.size() == 3 && r.summary.s_prime.size() == 3;
  double worst = 0;
  for (std::size_t j = 0; ok && j < 3; ++j) worst = std::max(worst, std::abs(r.summary.s_prime[j] - sp[j]));
  for (std::size_t i = 0; ok && i < 7; ++i) worst = std::max(worst, std::abs(r.summary.x_prime[i] - xp[i]));
  ok &= worst <= step;
  return {ok, fmt("mask=%u S=(%s) max|dev| S',x' = %.6f <= 2^-8", r.cut_mask(), got_s.c_str(), worst)};
}

// 2. Encrypted pipeline vs fixed-point oracle.
Outcome oracle_equivalence() {
  const auto report = bench::verify(bench::range_inclusive(2, 8), bench::default_formats(), 50, 2026);
  int total = 0;
  int bad = 0;
  for (const auto& c : report.cells) {
    total += c.histograms;
    bad += c.mismatches;
  }
  std::string first = report.failures.empty() ? "" : " first: " + report.failures.front();
  return {report.ok() && total == 7 * 3 * 50,
          fmt("%d histograms over n=2..8 x 3 formats, %d mismatches", total, bad) + first};
}

// 3. Enumeration and argmin.
Outcome enumeration_and_argmin() {
  bool ok = true;
  for (int n = 1; n <= 10; ++n) ok &= enumerate_partitions(n).size() == (std::size_t{1} << (n - 1));
  const bool enum_ok = ok;

  CleartextBackend b;
  const SecretKey key = keygen(3);
  const FixedFormat f{12, 4};
  std::mt19937_64 rng(33);
  int mismatches = 0;
  constexpr int kVectors = 1000;
  for (int t = 0; t < kVectors; ++t) {
    const int n = 1 + t % 8;
    // Small value range so that ties are common.
    std::uniform_int_distribution<int> dist(-16, 16);
    std::vector<CostCandidate> cands;
    std::int64_t best = 0;
    std::uint32_t best_mask = 0;
    for (std::uint32_t m = 0; m < Partition::mask_limit(n); ++m) {
      const std::int64_t raw = dist(rng) * 4;
      if (m == 0 || raw < best) {
        best = raw;
        best_mask = m;
      }
      cands.push_back({enc_encrypt(b, key, PlainFixed{raw, f}), m});
    }
    const auto arg = select_min_partition(b, std::span<const CostCandidate>(cands), n);
    mismatches += decrypt_argmin(b, key, arg) != best_mask;
  }
  ok &= mismatches == 0;
  return {ok, fmt("|partitions(n)| = 2^(n-1) for n=1..10: %s; argmin mismatches %d/%d",
                  enum_ok ? "yes" : "no", mismatches, kVectors)};
}

// 4. Gate-count scaling.
Outcome scaling() {
  const auto rows = bench::bench_gates(bench::range_inclusive(2, 8), bench::default_formats(), 0);
  auto at = [&](int n, int t, bool construction) {
    for (const auto& r : rows)
      if (r.n == n && r.format.total_bits == t)
        return static_cast<double>(construction ? r.construction() : r.total());
    return 0.0;
  };
  bool ok = true;
  double min_ratio = 1e9;
  for (bool construction : {false, true})
    for (int t : {10, 12, 16})
      for (int n : {5, 6, 7}) {
        const double ratio = at(n + 1, t, construction) / at(n, t, construction);
        min_ratio = std::min(min_ratio, ratio);
        ok &= ratio >= 1.5;
      }
  double worst_residual = 0;
  for (bool construction : {false, true})
    for (int n = 2; n <= 8; ++n) {
      const double res = bench::affine_fit_relative_residual(
          {10, 12, 16}, {at(n, 10, construction), at(n, 12, construction), at(n, 16, construction)});
      worst_residual = std::max(worst_residual, res);
      ok &= res < 0.05;
    }
  return {ok, fmt("min count(n+1)/count(n), n=5..7 = %.3f >= 1.5; max affine residual over T = %.2e < 0.05",
                  min_ratio, worst_residual)};
}

// 5. Accuracy flatness.
Outcome accuracy() {
  bench::AccuracySpec spec;  // eps 1.00, split 1:3, 100 trials, n = 2..10
  spec.seed = 5;
  const auto rows = bench::accuracy(spec);
  bool ok = rows.size() == 9 * 3;
  double worst_ci = 0;    // max |m_i - m_j| / (1.96 se_j)
  double worst_base = 0;  // max |m_f - m_float| / pooled se
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& a = rows[i];
    const double pooled = std::sqrt(a.fixed.se * a.fixed.se + a.float64.se * a.float64.se);
    worst_base = std::max(worst_base, std::abs(a.fixed.mean - a.float64.mean) / pooled);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j].n != a.n || i == j) continue;
      worst_ci = std::max(worst_ci, std::abs(a.fixed.mean - rows[j].fixed.mean) / (1.96 * rows[j].fixed.se));
    }
  }
  ok &= worst_ci <= 1.0 && worst_base < 1.0;
  return {ok, fmt("max |mean_i - mean_j| / (1.96 se_j) = %.3f <= 1; max |fixed - float64| / pooled se = %.3f < 1",
                  worst_ci, worst_base)};
}

// 6. Laplace moments and the empirical privacy ratio.
Outcome mechanism() {
  constexpr int kDraws = 100000;
  const LaplaceParams unit{1.0, 1.0};
  double sum = 0;
  double abs_sum = 0;
  for (int i = 0; i < kDraws; ++i) {
    const double r = sample_laplace(unit, NoiseStream{606, {NoisePhase::kBucketSum, std::uint64_t(i)}, 0});
    sum += r;
    abs_sum += std::abs(r);
  }
  const double mean = sum / kDraws;
  const double mean_abs = abs_sum / kDraws;
  bool ok = std::abs(mean) < 0.02 && std::abs(mean_abs - 1) < 0.02;

  OracleConfig cfg;  // eps 1.0, split 1:3, format 16:8
  const auto dp = bench::dp_ratio_check(Histogram{{5, 5}}, Histogram{{6, 5}}, cfg, kDraws, 77);
  ok &= dp.ok();
  return {ok, fmt("mean %.4f, mean|r| %.4f; ratio test on %d bins (>=100 hits), worst ratio/bound %.3f <= 1",
                  mean, mean_abs, dp.bins_checked, dp.worst_excess)};
}

// 7. Visibility assertions, injected faults, budget refusal.
Outcome protocol_security() {
  PipelineConfig cfg;
  cfg.n = 6;
  cfg.seed = 12;
  CleartextBackend b;
  BudgetLedger ledger;
  ProtocolSimulation<CleartextBackend> sim(b, cfg, ledger);
  sim.run();
  sim.query(1, 1, 6);
  sim.query(2, 2, 3);
  const auto nominal = assert_visibility(sim.transcript(), sim.capabilities());

  Transcript key_leak = sim.transcript();
  key_leak.append(Party::ds(), Party::cs(), KeyDist{sim.ds().key()});
  const auto fa = assert_visibility(key_leak, sim.capabilities());

  Transcript raw_to_ds = sim.transcript();
  DecryptRequest raw;
  raw.noisy_sums = sim.cs().encrypted_histogram();
  raw_to_ds.append(Party::cs(), Party::ds(), raw);
  const auto fb = assert_visibility(raw_to_ds, sim.capabilities());

  bool refused = false;
  try {
    CleartextBackend b2;
    run_pipeline(b2, cfg, ledger);
  } catch (const BudgetExhaustedError&) {
    refused = true;
  }

  const bool a_fails = !fa[VisibilityCheck::kNoKeyToCs].passed;
  const bool b_fails = !fb[VisibilityCheck::kDsOutputsDpProtected].passed;
  return {nominal.ok() && a_fails && b_fails && refused,
          fmt("nominal all 4 pass: %s; key->CS fails (a): %s; raw->DS fails (b): %s; second construction refused: %s",
              nominal.ok() ? "yes" : "no", a_fails ? "yes" : "no", b_fails ? "yes" : "no",
              refused ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"golden path", golden_path},
      {"oracle bit-equivalence", oracle_equivalence},
      {"enumeration and argmin", enumeration_and_argmin},
      {"gate-count scaling", scaling},
      {"accuracy flatness", accuracy},
      {"mechanism statistics", mechanism},
      {"protocol security", protocol_security},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s criterion %zu (%s): %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
