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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "dpfhe/bench.hpp"
#include "dpfhe/io.hpp"

namespace dpfhe {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dpfhe_test_" + name)).string();
}

TEST(GenData, DeterministicAndInRange) {
  EXPECT_EQ(random_counts(8, 5), random_counts(8, 5));
  EXPECT_NE(random_counts(8, 5), random_counts(8, 6));
  EXPECT_EQ(random_counts(1, 0).size(), 1u);
  EXPECT_THROW(random_counts(0, 0), PreconditionError);
}

TEST(GenData, UniformFrequencies) {
  constexpr int kSamples = 10000;
  const auto xs = random_counts(kSamples, 123);
  std::vector<int> freq(11, 0);
  for (int v : xs) {
    ASSERT_GE(v, 0);
    ASSERT_LE(v, 10);
    ++freq[static_cast<std::size_t>(v)];
  }
  const double p = 1.0 / 11;
  const double sigma = std::sqrt(kSamples * p * (1 - p));
  for (int f : freq) EXPECT_LT(std::abs(f - kSamples * p), 3 * sigma);
}

TEST(Io, IntegerLines) {
  EXPECT_EQ(io::parse_integer_lines("3\n 2 \n# note\n\n6 # six\n"), (std::vector<long long>{3, 2, 6}));
  EXPECT_THROW(io::parse_integer_lines("3\nx\n"), PreconditionError);
  EXPECT_THROW(io::parse_integer_lines("3.5\n"), PreconditionError);
  const std::string path = temp_path("hist.txt");
  io::write_file(path, io::format_histogram({3, 2, 6}));
  EXPECT_EQ(io::read_histogram_file(path), (std::vector<double>{3, 2, 6}));
  io::write_file(path, "-1\n");
  EXPECT_THROW(io::read_histogram_file(path), PreconditionError);
  io::write_file(path, "# nothing\n");
  EXPECT_THROW(io::read_histogram_file(path), PreconditionError);
  std::filesystem::remove(path);
  EXPECT_THROW(io::read_file(path), PreconditionError);
}

TEST(Io, Split) {
  EXPECT_EQ(io::parse_split("1:3"), (std::pair<double, double>{1, 3}));
  EXPECT_THROW(io::parse_split("1-3"), PreconditionError);
  EXPECT_THROW(io::parse_split("0:3"), PreconditionError);
}

TEST(Io, PipelineConfig) {
  const auto j = nlohmann::json::parse(R"({
    "n": 7, "format": "16:8", "epsilon": 2.0, "split": "1:1", "seed": 9,
    "data": {"kind": "inline", "histogram": [3, 2, 6, 5, 6, 3, 4]},
    "forced_noise": [{"phase": "bucket_sum", "index": 1, "value": -0.8}]
  })");
  const PipelineConfig c = io::parse_pipeline_config(j);
  EXPECT_EQ(c.n, 7);
  EXPECT_EQ(c.format, (FixedFormat{16, 8}));
  EXPECT_DOUBLE_EQ(c.budget.epsilon1, 1.0);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.data.kind, DataSource::Kind::kInlineHistogram);
  EXPECT_EQ(c.data.histogram.size(), 7u);
  EXPECT_EQ(c.forced_noise.at({NoisePhase::kBucketSum, 1}), -0.8);

  EXPECT_THROW(io::parse_pipeline_config(nlohmann::json::parse(R"({"format": "16:8"})")), PreconditionError);
  EXPECT_THROW(io::parse_pipeline_config(nlohmann::json::parse(R"({"n": 3, "data": {"kind": "x"}})")),
               PreconditionError);
  EXPECT_THROW(io::parse_pipeline_config(nlohmann::json::parse(R"({"n": 3, "format": "3:3"})")),
               PreconditionError);
}

TEST(Io, ConfigFileWithRelativeRecords) {
  const auto dir = std::filesystem::temp_directory_path() / "dpfhe_test_cfg";
  std::filesystem::create_directories(dir);
  io::write_file((dir / "records.txt").string(), "1\n2\n2\n");
  io::write_file((dir / "cfg.json").string(),
                 R"({"n": 2, "data": {"kind": "records", "path": "records.txt"}})");
  const auto c = io::load_pipeline_config((dir / "cfg.json").string());
  EXPECT_EQ(c.data.records, (std::vector<int>{1, 2, 2}));
  std::filesystem::remove_all(dir);
}

TEST(Io, SummaryRoundTrip) {
  const std::vector<double> s{4.6, 16.2, 7.8};
  DpSummary summary = uniform_expand(s, Partition{7, 18});
  summary.provenance.budget = PrivacyBudget{};
  summary.provenance.format = {16, 8};
  summary.provenance.seed_digest = "00ff";
  const std::string text = io::export_summary(summary);
  EXPECT_EQ(io::import_summary(text), summary);
  EXPECT_EQ(io::export_summary(io::import_summary(text)), text);
  EXPECT_THROW(io::import_summary("{}"), PreconditionError);
  EXPECT_THROW(io::import_summary(R"({"n": 2, "cut_mask": 5})"), PreconditionError);
}

TEST(Io, LedgerRoundTrip) {
  BudgetLedger ledger;
  ledger.try_spend("hist:1", PrivacyBudget{});
  const BudgetLedger back = io::import_ledger(io::export_ledger(ledger));
  EXPECT_TRUE(back.is_spent("hist:1"));
  EXPECT_FALSE(back.is_spent("hist:2"));
}

TEST(BenchGates, DataIndependentCounts) {
  const auto a = bench::bench_gates({4}, {{12, 4}}, 1);
  const auto b = bench::bench_gates({4}, {{12, 4}}, 2);
  EXPECT_EQ(a[0].phases.total(), b[0].phases.total());
  EXPECT_EQ(a[0].phases.aggregation, b[0].phases.aggregation);
}

TEST(BenchGates, MonotoneAndScalingBands) {
  const auto rows = bench::bench_gates(bench::range_inclusive(2, 8), bench::default_formats(), 0);
  auto at = [&](int n, int t) {
    for (const auto& r : rows)
      if (r.n == n && r.format.total_bits == t) return static_cast<double>(r.total());
    return 0.0;
  };
  for (int t : {10, 12, 16})
    for (int n = 2; n < 8; ++n) EXPECT_LT(at(n, t), at(n + 1, t));
  for (int n = 2; n <= 8; ++n) {
    EXPECT_GE(at(n, 16) / at(n, 10), 1.2);
    EXPECT_LE(at(n, 16) / at(n, 10), 2.2);
  }
  for (int t : {10, 12, 16}) EXPECT_GE(at(8, t) / at(7, t), 1.5);
}

TEST(BenchGates, CsvIsReproducible) {
  const auto a = bench::gate_csv(bench::bench_gates({3}, {{10, 2}}, 4));
  const auto b = bench::gate_csv(bench::bench_gates({3}, {{10, 2}}, 4));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')),
            "n,total_bits,frac_bits,records,aggregation,cost_table,argmin,bucket_sums,construction,"
            "total,cost_estimate_s");
}

TEST(BenchGates, AffineFit) {
  EXPECT_NEAR(bench::affine_fit_relative_residual({10, 12, 16}, {20, 24, 32}), 0.0, 1e-12);
  EXPECT_GT(bench::affine_fit_relative_residual({10, 12, 16}, {10, 40, 12}), 0.05);
}

TEST(Accuracy, VanishingNoiseGivesZeroError) {
  bench::AccuracySpec spec;
  spec.ns = {2, 5};
  spec.trials = 5;
  spec.budget = PrivacyBudget::from_split(1e6, 1, 3);
  spec.formats = {{16, 8}};
  for (const auto& row : bench::accuracy(spec)) {
    EXPECT_LT(row.fixed.mean, 0.01);
    EXPECT_LT(row.float64.mean, 0.01);
  }
}

TEST(Accuracy, CsvReproducibleAndValidated) {
  bench::AccuracySpec spec;
  spec.ns = {3};
  spec.trials = 4;
  EXPECT_EQ(bench::accuracy_csv(bench::accuracy(spec)), bench::accuracy_csv(bench::accuracy(spec)));
  spec.trials = 1;
  EXPECT_THROW(bench::accuracy(spec), PreconditionError);
}

TEST(Verify, SmallSweepHasNoMismatch) {
  const auto report = bench::verify({2, 3}, bench::default_formats(), 3, 17);
  EXPECT_TRUE(report.ok());
  EXPECT_EQ(report.cells.size(), 6u);
}

TEST(Ranges, Parse) {
  EXPECT_EQ(bench::parse_n_range("4"), (std::vector<int>{4}));
  EXPECT_EQ(bench::parse_n_range("2..4"), (std::vector<int>{2, 3, 4}));
  EXPECT_THROW(bench::parse_n_range("4..2"), PreconditionError);
  EXPECT_THROW(bench::parse_n_range("x"), PreconditionError);
}

}  // namespace
}  // namespace dpfhe
