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

// Experiment drivers behind the command-line tool: gate-count scaling,
// accuracy against the floating-point baseline, and the encrypted-versus-
// oracle equivalence sweep. Every row is a pure function of its seed.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "dpfhe/dp_noise.hpp"
#include "dpfhe/gate_backend.hpp"
#include "dpfhe/partitioner.hpp"
#include "dpfhe/protocol.hpp"
#include "dpfhe/reference_oracle.hpp"
#include "dpfhe/summary_query.hpp"

namespace dpfhe::bench {

// Default experiment formats: 7 integer bits + sign, with 2, 4 and 8
// fractional bits.
inline std::vector<FixedFormat> default_formats() { return {{10, 2}, {12, 4}, {16, 8}}; }

inline std::vector<int> range_inclusive(int lo, int hi) {
  std::vector<int> out;
  for (int n = lo; n <= hi; ++n) out.push_back(n);
  return out;
}

// Parses "5" or "2..8".
inline std::vector<int> parse_n_range(const std::string& text) {
  try {
    const auto dots = text.find("..");
    if (dots == std::string::npos) return {std::stoi(text)};
    const int lo = std::stoi(text.substr(0, dots));
    const int hi = std::stoi(text.substr(dots + 2));
    if (lo > hi) throw std::invalid_argument("empty range");
    return range_inclusive(lo, hi);
  } catch (const std::exception&) {
    throw PreconditionError("n must be N or LO..HI, got '" + text + "'");
  }
}

// ---------------------------------------------------------------------------
// Gate counts

struct GateRow {
  int n = 0;
  FixedFormat format{};
  std::size_t records = 0;
  PhaseStats phases;

  std::uint64_t construction() const { return phases.construction().total(); }
  std::uint64_t total() const { return phases.total().total(); }
  double cost_estimate() const { return phases.total().cost_estimate(); }
};

// Uniformly random record domains; the count is fixed at
// records_per_domain * n so that every phase, aggregation included, is
// independent of the data values.
inline std::vector<int> random_records(int n, int records_per_domain, std::uint64_t seed) {
  std::vector<int> out;
  const auto total = static_cast<std::size_t>(n) * static_cast<std::size_t>(records_per_domain);
  for (std::size_t r = 0; r < total; ++r) {
    const std::uint64_t z = mix64({seed, 0x726563ULL, r});
    out.push_back(1 + static_cast<int>((static_cast<unsigned __int128>(z) * n) >> 64));
  }
  return out;
}

inline GateRow bench_gates_one(int n, FixedFormat fmt, std::uint64_t seed, int records_per_domain,
                               double gate_seconds) {
  CountingBackend backend(gate_seconds);
  PipelineConfig cfg;
  cfg.n = n;
  cfg.format = fmt;
  cfg.seed = seed;
  cfg.gate_seconds = gate_seconds;
  cfg.data.kind = DataSource::Kind::kRecords;
  cfg.data.records = random_records(n, records_per_domain, mix64({seed, static_cast<std::uint64_t>(n)}));
  BudgetLedger ledger;
  const PipelineResult result = run_pipeline(backend, cfg, ledger);
  return GateRow{n, fmt, cfg.data.records.size(), result.phases};
}

inline std::vector<GateRow> bench_gates(const std::vector<int>& ns,
                                        const std::vector<FixedFormat>& formats,
                                        std::uint64_t seed, int records_per_domain = 5,
                                        double gate_seconds = kDefaultGateSeconds) {
  std::vector<GateRow> rows;
  for (int n : ns)
    for (const auto& fmt : formats)
      rows.push_back(bench_gates_one(n, fmt, seed, records_per_domain, gate_seconds));
  return rows;
}

inline std::string gate_csv(const std::vector<GateRow>& rows) {
  std::string out =
      "n,total_bits,frac_bits,records,aggregation,cost_table,argmin,bucket_sums,"
      "construction,total,cost_estimate_s\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%zu,%llu,%llu,%llu,%llu,%llu,%llu,%.6f\n", r.n,
                  r.format.total_bits, r.format.frac_bits, r.records,
                  static_cast<unsigned long long>(r.phases.aggregation.total()),
                  static_cast<unsigned long long>(r.phases.cost_table.total()),
                  static_cast<unsigned long long>(r.phases.argmin.total()),
                  static_cast<unsigned long long>(r.phases.bucket_sums.total()),
                  static_cast<unsigned long long>(r.construction()),
                  static_cast<unsigned long long>(r.total()), r.cost_estimate());
    out += buf;
  }
  return out;
}

// Least-squares fit y = a + b x; returns max |residual| / y.
inline double affine_fit_relative_residual(const std::vector<double>& xs,
                                           const std::vector<double>& ys) {
  const double k = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / k;
  double worst = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    worst = std::max(worst, std::abs(ys[i] - (intercept + slope * xs[i])) / ys[i]);
  return worst;
}

// ---------------------------------------------------------------------------
// Accuracy

struct MeanSe {
  double mean = 0;
  double se = 0;
};

inline MeanSe mean_and_se(const std::vector<double>& xs) {
  if (xs.size() < 2) throw PreconditionError("need at least two trials");
  double sum = 0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = ss / static_cast<double>(xs.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

struct AccuracyRow {
  int n = 0;
  FixedFormat format{};
  int trials = 0;
  MeanSe fixed;
  MeanSe float64;
};

struct AccuracySpec {
  std::vector<int> ns = range_inclusive(2, 10);
  std::vector<FixedFormat> formats = default_formats();
  int trials = 100;
  PrivacyBudget budget{};
  double cost_sensitivity = 2.0;
  std::uint64_t seed = 0;
  int max_value = 10;
};

inline std::uint64_t trial_seed(std::uint64_t seed, int n, int trial) {
  return mix64({seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial)});
}

// Per (n, trial) a fresh histogram and a fresh noise seed are shared by every
// format and by the float64 baseline. Fixed-point runs use the bit-exact
// oracle of the encrypted pipeline, so n may exceed the encrypted limit.
inline std::vector<AccuracyRow> accuracy(const AccuracySpec& spec) {
  if (spec.trials < 2) throw PreconditionError("accuracy needs at least 2 trials");
  std::vector<AccuracyRow> rows;
  for (int n : spec.ns) {
    std::vector<double> float_errors;
    std::vector<std::vector<double>> fixed_errors(spec.formats.size());
    for (int t = 0; t < spec.trials; ++t) {
      const std::uint64_t ts = trial_seed(spec.seed, n, t);
      const auto ints = random_counts(n, mix64({ts, 0x64617461ULL}), spec.max_value);
      const Histogram x{std::vector<double>(ints.begin(), ints.end())};
      const NoiseSource noise(mix64({ts, 0x6e6f697365ULL}));
      OracleConfig cfg;
      cfg.budget = spec.budget;
      cfg.cost_sensitivity = spec.cost_sensitivity;
      const auto baseline = oracle_pipeline(x, cfg, noise, OracleMode::kFloat64);
      float_errors.push_back(summary_error(baseline.x_prime, x));
      for (std::size_t f = 0; f < spec.formats.size(); ++f) {
        cfg.format = spec.formats[f];
        const auto run = oracle_pipeline(x, cfg, noise, OracleMode::kFixedPoint);
        fixed_errors[f].push_back(summary_error(run.x_prime, x));
      }
    }
    const MeanSe base = mean_and_se(float_errors);
    for (std::size_t f = 0; f < spec.formats.size(); ++f)
      rows.push_back(AccuracyRow{n, spec.formats[f], spec.trials, mean_and_se(fixed_errors[f]), base});
  }
  return rows;
}

inline std::string accuracy_csv(const std::vector<AccuracyRow>& rows) {
  std::string out =
      "n,total_bits,frac_bits,trials,mean_error,std_error,float_mean_error,float_std_error\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.10f,%.10f,%.10f,%.10f\n", r.n,
                  r.format.total_bits, r.format.frac_bits, r.trials, r.fixed.mean, r.fixed.se,
                  r.float64.mean, r.float64.se);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equivalence sweep

struct VerifyCell {
  int n = 0;
  FixedFormat format{};
  int histograms = 0;
  int mismatches = 0;
};

struct VerifyReport {
  std::vector<VerifyCell> cells;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

// Runs the encrypted pipeline on the cleartext backend and the fixed-point
// oracle with the same noise source; partition mask and raw S' words must
// agree exactly.
inline bool encrypted_matches_oracle(const PipelineConfig& cfg, std::string* why = nullptr) {
  CleartextBackend backend;
  BudgetLedger ledger;
  const PipelineResult enc = run_pipeline(backend, cfg, ledger);
  OracleConfig ocfg;
  ocfg.format = cfg.format;
  ocfg.budget = cfg.budget;
  ocfg.cost_sensitivity = cfg.partitioner.cost_sensitivity;
  const OracleRun oracle =
      oracle_pipeline(enc.histogram, ocfg, make_noise_source(cfg), OracleMode::kFixedPoint);
  const bool same = enc.cut_mask() == oracle.cut_mask && enc.s_prime_raw == oracle.s_prime_raw;
  if (!same && why != nullptr) {
    *why = "n=" + std::to_string(cfg.n) + " format=" + cfg.format.to_string() +
           " seed=" + std::to_string(cfg.seed) + ": mask " + std::to_string(enc.cut_mask()) +
           " vs oracle " + std::to_string(oracle.cut_mask);
  }
  return same;
}

inline VerifyReport verify(const std::vector<int>& ns, const std::vector<FixedFormat>& formats,
                           int histograms, std::uint64_t seed, const PrivacyBudget& budget = {}) {
  VerifyReport report;
  for (int n : ns) {
    for (const auto& fmt : formats) {
      VerifyCell cell{n, fmt, histograms, 0};
      for (int h = 0; h < histograms; ++h) {
        PipelineConfig cfg;
        cfg.n = n;
        cfg.format = fmt;
        cfg.budget = budget;
        cfg.seed = trial_seed(seed, n, h);
        cfg.data.kind = DataSource::Kind::kRandomHistogram;
        std::string why;
        bool same = false;
        try {
          same = encrypted_matches_oracle(cfg, &why);
        } catch (const PreconditionError& e) {
          // A draw the pipeline rejects counts as a mismatch.
          why = "n=" + std::to_string(n) + " format=" + fmt.to_string() + ": " + e.what();
        }
        if (!same) {
          ++cell.mismatches;
          report.failures.push_back(why);
        }
      }
      report.cells.push_back(cell);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Empirical privacy check

struct DpRatioReport {
  int runs = 0;
  int bins_checked = 0;
  double worst_excess = 0;  // max over checked bins of ratio / bound
  std::string worst_bin;

  bool ok() const { return bins_checked > 0 && worst_excess <= 1.0; }
};

// Runs the fixed-point pipeline `runs` times on each of two neighboring
// histograms with independent noise seeds, bins the output by (partition,
// floor(x'_i) for every i), and checks on every bin with at least
// `min_hits` hits under both inputs that
//   Pr[bin | a] / Pr[bin | b] <= e^epsilon * (1 + 3 * se)
// in both directions, se being the delta-method standard error of the log
// ratio: sqrt((1 - p_a) / h_a + (1 - p_b) / h_b).
inline DpRatioReport dp_ratio_check(const Histogram& a, const Histogram& b,
                                    const OracleConfig& config, int runs, std::uint64_t seed,
                                    int min_hits = 100) {
  if (a.size() != b.size()) throw PreconditionError("neighboring histograms differ in size");
  auto bin_of = [](const OracleRun& run) {
    std::string key = std::to_string(run.cut_mask);
    for (double v : run.x_prime) key += "|" + std::to_string(static_cast<long long>(std::floor(v)));
    return key;
  };
  std::map<std::string, std::array<int, 2>> hits;
  for (int side = 0; side < 2; ++side) {
    const Histogram& x = side == 0 ? a : b;
    for (int r = 0; r < runs; ++r) {
      const NoiseSource noise(mix64({seed, static_cast<std::uint64_t>(side), static_cast<std::uint64_t>(r)}));
      ++hits[bin_of(oracle_pipeline(x, config, noise, OracleMode::kFixedPoint))][side];
    }
  }
  DpRatioReport report;
  report.runs = runs;
  const double bound = std::exp(config.budget.epsilon);
  for (const auto& [bin, h] : hits) {
    if (h[0] < min_hits || h[1] < min_hits) continue;
    ++report.bins_checked;
    const double pa = static_cast<double>(h[0]) / runs;
    const double pb = static_cast<double>(h[1]) / runs;
    const double se = std::sqrt((1 - pa) / h[0] + (1 - pb) / h[1]);
    const double limit = bound * (1 + 3 * se);
    const double excess = std::max(pa / pb, pb / pa) / limit;
    if (excess > report.worst_excess) {
      report.worst_excess = excess;
      report.worst_bin = bin;
    }
  }
  return report;
}

}  // namespace dpfhe::bench
