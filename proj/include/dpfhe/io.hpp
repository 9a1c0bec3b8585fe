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

// File formats: pipeline config (JSON), histogram and record files (one
// integer per line), summary export (JSON), budget ledger (JSON).

#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpfhe/dp_noise.hpp"
#include "dpfhe/errors.hpp"
#include "dpfhe/protocol.hpp"
#include "dpfhe/summary_query.hpp"

namespace dpfhe::io {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << contents;
  if (!out) throw Error("write to '" + path + "' failed");
}

// Parses "a:b" into its two positive weights.
inline std::pair<double, double> parse_split(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument("no colon");
    const double a = std::stod(text.substr(0, colon));
    const double b = std::stod(text.substr(colon + 1));
    if (!(a > 0) || !(b > 0)) throw std::invalid_argument("non-positive");
    return {a, b};
  } catch (const std::exception&) {
    throw PreconditionError("split must be a:b with positive weights, got '" + text + "'");
  }
}

// One integer per line; blank lines and '#' comments are skipped.
inline std::vector<long long> parse_integer_lines(const std::string& text) {
  std::vector<long long> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(first, last - first + 1);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size())
      throw PreconditionError("line " + std::to_string(lineno) + ": expected an integer, got '" +
                              token + "'");
    out.push_back(v);
  }
  return out;
}

inline std::vector<double> read_histogram_file(const std::string& path) {
  std::vector<double> out;
  for (long long v : parse_integer_lines(read_file(path))) {
    if (v < 0) throw PreconditionError("histogram counts must be non-negative");
    out.push_back(static_cast<double>(v));
  }
  if (out.empty()) throw PreconditionError("histogram file '" + path + "' is empty");
  return out;
}

inline std::string format_histogram(const std::vector<int>& counts) {
  std::string out;
  for (int c : counts) out += std::to_string(c) + "\n";
  return out;
}

inline std::vector<int> read_records_file(const std::string& path) {
  std::vector<int> out;
  for (long long v : parse_integer_lines(read_file(path))) out.push_back(static_cast<int>(v));
  return out;
}

// Pipeline config. Keys (all optional except n):
//   n, format "T:F" (or total_bits/frac_bits), epsilon, split "a:b", seed,
//   dataset_id, cost_sensitivity, zero_noise,
//   data: {kind: "inline" | "random" | "records", histogram: [...],
//          records: [...], path: "...", max_value}
//   forced_noise: [{phase: "interval_cost" | "bucket_sum", index, value}]
// Relative data paths resolve against `base_dir`.
inline PipelineConfig parse_pipeline_config(const json& j, const std::string& base_dir = ".") {
  try {
    PipelineConfig c;
    c.n = j.at("n").get<int>();
    if (j.contains("format")) {
      c.format = FixedFormat::parse(j["format"].get<std::string>());
    } else {
      c.format.total_bits = j.value("total_bits", 16);
      c.format.frac_bits = j.value("frac_bits", 8);
    }
    c.format.validate();
    const auto [a, b] = parse_split(j.value("split", std::string("1:3")));
    c.budget = PrivacyBudget::from_split(j.value("epsilon", 1.0), a, b);
    c.seed = j.value("seed", std::uint64_t{0});
    c.dataset_id = j.value("dataset_id", std::string());
    c.partitioner.cost_sensitivity = j.value("cost_sensitivity", 2.0);
    c.zero_noise = j.value("zero_noise", false);

    const json data = j.value("data", json{{"kind", "random"}});
    const std::string kind = data.value("kind", std::string("random"));
    auto resolve = [&](const std::string& p) {
      return (p.empty() || p.front() == '/') ? p : base_dir + "/" + p;
    };
    if (kind == "inline") {
      c.data.kind = DataSource::Kind::kInlineHistogram;
      if (data.contains("histogram")) {
        c.data.histogram = data["histogram"].get<std::vector<double>>();
      } else {
        c.data.histogram = read_histogram_file(resolve(data.at("path").get<std::string>()));
      }
    } else if (kind == "random") {
      c.data.kind = DataSource::Kind::kRandomHistogram;
      c.data.max_value = data.value("max_value", 10);
    } else if (kind == "records") {
      c.data.kind = DataSource::Kind::kRecords;
      if (data.contains("records")) {
        c.data.records = data["records"].get<std::vector<int>>();
      } else {
        c.data.records = read_records_file(resolve(data.at("path").get<std::string>()));
      }
    } else {
      throw PreconditionError("unknown data kind '" + kind + "'");
    }

    if (j.contains("forced_noise")) {
      for (const auto& f : j["forced_noise"]) {
        const std::string phase = f.at("phase").get<std::string>();
        NoiseLabel label;
        if (phase == "interval_cost") {
          label.phase = NoisePhase::kIntervalCost;
        } else if (phase == "bucket_sum") {
          label.phase = NoisePhase::kBucketSum;
        } else {
          throw PreconditionError("unknown noise phase '" + phase + "'");
        }
        label.index = f.at("index").get<std::uint64_t>();
        c.forced_noise[label] = f.at("value").get<double>();
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("invalid pipeline config: ") + e.what());
  }
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const std::string base = slash == std::string::npos ? "." : path.substr(0, slash);
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw PreconditionError("cannot parse '" + path + "': " + e.what());
  }
  return parse_pipeline_config(j, base);
}

inline json summary_to_json(const DpSummary& s) {
  return json{{"n", s.partition.n},
              {"cut_mask", s.partition.cut_mask},
              {"s_prime", s.s_prime},
              {"x_prime", s.x_prime},
              {"provenance",
               {{"epsilon", s.provenance.budget.epsilon},
                {"epsilon1", s.provenance.budget.epsilon1},
                {"epsilon2", s.provenance.budget.epsilon2},
                {"total_bits", s.provenance.format.total_bits},
                {"frac_bits", s.provenance.format.frac_bits},
                {"seed_digest", s.provenance.seed_digest}}}};
}

inline std::string export_summary(const DpSummary& s) { return summary_to_json(s).dump(2) + "\n"; }

inline DpSummary import_summary(const std::string& text) {
  try {
    const json j = json::parse(text);
    DpSummary s;
    s.partition = Partition::checked(j.at("n").get<int>(), j.at("cut_mask").get<std::uint32_t>());
    s.s_prime = j.at("s_prime").get<std::vector<double>>();
    s.x_prime = j.at("x_prime").get<std::vector<double>>();
    if (static_cast<int>(s.x_prime.size()) != s.partition.n ||
        static_cast<int>(s.s_prime.size()) != s.partition.num_buckets())
      throw PreconditionError("summary sizes disagree with its partition");
    const json& p = j.at("provenance");
    s.provenance.budget.epsilon = p.at("epsilon").get<double>();
    s.provenance.budget.epsilon1 = p.at("epsilon1").get<double>();
    s.provenance.budget.epsilon2 = p.at("epsilon2").get<double>();
    s.provenance.format.total_bits = p.at("total_bits").get<int>();
    s.provenance.format.frac_bits = p.at("frac_bits").get<int>();
    s.provenance.seed_digest = p.at("seed_digest").get<std::string>();
    return s;
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("invalid summary: ") + e.what());
  }
}

inline std::string export_ledger(const BudgetLedger& ledger) {
  json spent = json::object();
  for (const auto& [id, b] : ledger.entries())
    spent[id] = {{"epsilon", b.epsilon}, {"epsilon1", b.epsilon1}, {"epsilon2", b.epsilon2}};
  return json{{"spent", spent}}.dump(2) + "\n";
}

inline BudgetLedger import_ledger(const std::string& text) {
  try {
    const json j = json::parse(text);
    std::map<std::string, PrivacyBudget> spent;
    for (const auto& [id, b] : j.at("spent").items())
      spent[id] = PrivacyBudget{b.at("epsilon").get<double>(), b.at("epsilon1").get<double>(),
                                b.at("epsilon2").get<double>()};
    return BudgetLedger(std::move(spent));
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("invalid ledger: ") + e.what());
  }
}

}  // namespace dpfhe::io
