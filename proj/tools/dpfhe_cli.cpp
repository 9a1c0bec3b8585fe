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

// dpfhe: data generation, pipeline runs, gate-count benchmarks, the accuracy
// study and the oracle-equivalence sweep.
//
// Exit codes: 0 success, 2 precondition violation, 3 budget exhausted,
// 4 equivalence failure, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dpfhe/bench.hpp"
#include "dpfhe/errors.hpp"
#include "dpfhe/io.hpp"
#include "dpfhe/protocol.hpp"

namespace {

using namespace dpfhe;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitPrecondition = 2;
constexpr int kExitBudget = 3;
constexpr int kExitEquivalence = 4;

struct Options {
  std::string n;
  std::vector<std::string> formats;
  double epsilon = 1.0;
  std::string split = "1:3";
  int trials = -1;
  std::uint64_t seed = 0;
  std::string out;
  std::string data;

  // run
  std::string config;
  std::string records;
  std::string ledger;
  std::string dataset_id;
  bool zero_noise = false;
  std::vector<std::string> queries;

  // gen-data
  int max_value = 10;

  // bench-gates
  int records_per_domain = 5;
  double gate_seconds = kDefaultGateSeconds;
};

std::vector<FixedFormat> parse_formats(const std::vector<std::string>& specs) {
  if (specs.empty()) return bench::default_formats();
  std::vector<FixedFormat> out;
  for (const auto& s : specs) {
    FixedFormat f = FixedFormat::parse(s);
    f.validate();
    out.push_back(f);
  }
  return out;
}

PrivacyBudget parse_budget(const Options& o) {
  const auto [a, b] = io::parse_split(o.split);
  return PrivacyBudget::from_split(o.epsilon, a, b);
}

// CSV to --out (or stdout) plus a JSON sidecar next to it.
void emit_csv(const Options& o, const std::string& csv, const json& sidecar) {
  if (o.out.empty()) {
    std::cout << csv;
    return;
  }
  io::write_file(o.out, csv);
  io::write_file(o.out + ".json", sidecar.dump(2) + "\n");
  std::cerr << "wrote " << o.out << "\n";
}

json format_list(const std::vector<FixedFormat>& fs) {
  json out = json::array();
  for (const auto& f : fs) out.push_back(f.to_string());
  return out;
}

int cmd_gen_data(const Options& o) {
  const int n = o.n.empty() ? 8 : std::stoi(o.n);
  const std::string text = io::format_histogram(random_counts(n, o.seed, o.max_value));
  if (o.out.empty()) {
    std::cout << text;
  } else {
    io::write_file(o.out, text);
  }
  return kExitOk;
}

int cmd_run(const Options& o) {
  PipelineConfig cfg;
  if (!o.config.empty()) {
    cfg = io::load_pipeline_config(o.config);
  } else {
    cfg.n = o.n.empty() ? 8 : std::stoi(o.n);
    if (o.formats.size() > 1) throw PreconditionError("run takes a single --format");
    cfg.format = o.formats.empty() ? FixedFormat{16, 8} : FixedFormat::parse(o.formats.front());
    cfg.budget = parse_budget(o);
    cfg.seed = o.seed;
  }
  if (!o.data.empty()) {
    cfg.data.kind = DataSource::Kind::kInlineHistogram;
    cfg.data.histogram = io::read_histogram_file(o.data);
    if (o.n.empty() && o.config.empty()) cfg.n = static_cast<int>(cfg.data.histogram.size());
  } else if (!o.records.empty()) {
    cfg.data.kind = DataSource::Kind::kRecords;
    cfg.data.records = io::read_records_file(o.records);
  }
  if (!o.dataset_id.empty()) cfg.dataset_id = o.dataset_id;
  if (o.zero_noise) cfg.zero_noise = true;

  BudgetLedger ledger = (!o.ledger.empty() && std::filesystem::exists(o.ledger))
                            ? io::import_ledger(io::read_file(o.ledger))
                            : BudgetLedger{};

  CleartextBackend backend(cfg.gate_seconds);
  ProtocolSimulation<CleartextBackend> sim(backend, cfg, ledger);
  const PipelineResult result = sim.run();
  if (!o.ledger.empty()) io::write_file(o.ledger, io::export_ledger(ledger));

  json answers = json::array();
  for (const auto& q : o.queries) {
    const auto colon = q.find(':');
    if (colon == std::string::npos) throw PreconditionError("query must be l:r, got '" + q + "'");
    const int l = std::stoi(q.substr(0, colon));
    const int r = std::stoi(q.substr(colon + 1));
    answers.push_back({{"l", l}, {"r", r}, {"value", sim.query(1, l, r)}});
  }

  const auto report = assert_visibility(sim.transcript(), sim.capabilities());
  json out = io::summary_to_json(result.summary);
  out["dataset_id"] = result.dataset_id;
  out["s_prime_raw"] = result.s_prime_raw;
  out["gates"] = result.phases.total().total();
  out["cost_estimate_s"] = result.phases.total().cost_estimate();
  out["visibility_ok"] = report.ok();
  if (!answers.empty()) out["queries"] = answers;

  if (!o.out.empty()) {
    std::filesystem::create_directories(o.out);
    io::write_file(o.out + "/summary.json", io::export_summary(result.summary));
    io::write_file(o.out + "/transcript.jsonl", sim.transcript().export_lines());
    io::write_file(o.out + "/noise.jsonl", result.noise_log.to_lines());
  }
  std::cout << out.dump(2) << "\n";
  return report.ok() ? kExitOk : kExitOther;
}

int cmd_bench_gates(const Options& o) {
  const auto ns = bench::parse_n_range(o.n.empty() ? "2..8" : o.n);
  const auto formats = parse_formats(o.formats);
  const int trials = o.trials < 0 ? 10 : o.trials;
  if (trials < 1) throw PreconditionError("trials must be at least 1");
  const auto rows = bench::bench_gates(ns, formats, o.seed, o.records_per_domain, o.gate_seconds);
  // Circuits are data-oblivious: every further trial draws fresh data and
  // must reproduce the first trial's counts.
  for (int t = 1; t < trials; ++t) {
    const auto again = bench::bench_gates(ns, formats, bench::trial_seed(o.seed, 0, t),
                                          o.records_per_domain, o.gate_seconds);
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (!(again[i].phases.total() == rows[i].phases.total()))
        throw Error("gate counts depend on the data at n=" + std::to_string(rows[i].n));
  }
  const json sidecar{{"command", "bench-gates"},
                     {"n", ns},
                     {"formats", format_list(formats)},
                     {"trials", trials},
                     {"seed", o.seed},
                     {"records_per_domain", o.records_per_domain},
                     {"gate_seconds", o.gate_seconds}};
  emit_csv(o, bench::gate_csv(rows), sidecar);
  return kExitOk;
}

int cmd_accuracy(const Options& o) {
  bench::AccuracySpec spec;
  spec.ns = bench::parse_n_range(o.n.empty() ? "2..10" : o.n);
  spec.formats = parse_formats(o.formats);
  spec.trials = o.trials < 0 ? 100 : o.trials;
  spec.budget = parse_budget(o);
  spec.seed = o.seed;
  spec.max_value = o.max_value;
  const auto rows = bench::accuracy(spec);
  const json sidecar{{"command", "accuracy"},
                     {"n", spec.ns},
                     {"formats", format_list(spec.formats)},
                     {"trials", spec.trials},
                     {"epsilon", o.epsilon},
                     {"split", o.split},
                     {"seed", o.seed},
                     {"max_value", spec.max_value}};
  emit_csv(o, bench::accuracy_csv(rows), sidecar);
  return kExitOk;
}

int cmd_verify(const Options& o) {
  const auto ns = bench::parse_n_range(o.n.empty() ? "2..8" : o.n);
  const auto formats = parse_formats(o.formats);
  const int histograms = o.trials < 0 ? 50 : o.trials;
  const auto report = bench::verify(ns, formats, histograms, o.seed, parse_budget(o));
  std::string csv = "n,total_bits,frac_bits,histograms,mismatches\n";
  for (const auto& c : report.cells)
    csv += std::to_string(c.n) + "," + std::to_string(c.format.total_bits) + "," +
           std::to_string(c.format.frac_bits) + "," + std::to_string(c.histograms) + "," +
           std::to_string(c.mismatches) + "\n";
  const json sidecar{{"command", "verify"},
                     {"n", ns},
                     {"formats", format_list(formats)},
                     {"histograms", histograms},
                     {"seed", o.seed},
                     {"failures", report.failures}};
  emit_csv(o, csv, sidecar);
  for (const auto& f : report.failures) std::cerr << "mismatch: " << f << "\n";
  return report.ok() ? kExitOk : kExitEquivalence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private histogram summaries over simulated FHE"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--n", o.n, "domain size, or LO..HI for sweeps");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--out", o.out, "output file (directory for run)");
  };
  auto add_formats = [&](CLI::App* cmd) {
    cmd->add_option("--format", o.formats, "fixed-point format T:F (repeatable)");
  };
  auto add_budget = [&](CLI::App* cmd) {
    cmd->add_option("--epsilon", o.epsilon, "total privacy budget");
    cmd->add_option("--split", o.split, "epsilon1:epsilon2 ratio");
  };

  auto* gen = app.add_subcommand("gen-data", "write a random histogram, one count per line");
  add_common(gen);
  gen->add_option("--max-value", o.max_value, "counts are uniform on 0..max");

  auto* run = app.add_subcommand("run", "run the full protocol on the cleartext backend");
  add_common(run);
  add_formats(run);
  add_budget(run);
  run->add_option("--data", o.data, "histogram file");
  run->add_option("--records", o.records, "record file, one 1-based domain per line");
  run->add_option("--config", o.config, "JSON pipeline config");
  run->add_option("--ledger", o.ledger, "budget ledger file, read and updated");
  run->add_option("--dataset-id", o.dataset_id, "ledger key for the dataset");
  run->add_flag("--zero-noise", o.zero_noise, "disable noise (testing only)");
  run->add_option("--query", o.queries, "range query l:r (repeatable)");

  auto* gates = app.add_subcommand("bench-gates", "gate counts per phase on the counting backend");
  add_common(gates);
  add_formats(gates);
  gates->add_option("--trials", o.trials, "data draws checked for identical counts");
  gates->add_option("--records-per-domain", o.records_per_domain, "records = this * n");
  gates->add_option("--gate-seconds", o.gate_seconds, "cost model seconds per gate");

  auto* acc = app.add_subcommand("accuracy", "summary error per format against float64");
  add_common(acc);
  add_formats(acc);
  add_budget(acc);
  acc->add_option("--trials", o.trials, "trials per n");
  acc->add_option("--max-value", o.max_value, "counts are uniform on 0..max");

  auto* ver = app.add_subcommand("verify", "encrypted pipeline versus fixed-point oracle");
  add_common(ver);
  add_formats(ver);
  add_budget(ver);
  ver->add_option("--trials", o.trials, "random histograms per (n, format)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitPrecondition;
  }

  try {
    if (*gen) return cmd_gen_data(o);
    if (*run) return cmd_run(o);
    if (*gates) return cmd_bench_gates(o);
    if (*acc) return cmd_accuracy(o);
    if (*ver) return cmd_verify(o);
  } catch (const BudgetExhaustedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBudget;
  } catch (const EquivalenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEquivalence;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: bad number: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
