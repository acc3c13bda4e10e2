// Copyright 2026 The fcp Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fcp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fcp/error.hpp"
#include "fcp/version.hpp"

namespace fcp {

namespace {

using nlohmann::json;

void check_non_empty(const std::vector<EvalRecord>& records, const char* op) {
  if (records.empty()) {
    throw InvalidInputError(std::string(op) + ": no records");
  }
}

}  // namespace

double coverage(const std::vector<EvalRecord>& records) {
  check_non_empty(records, "coverage");
  std::int64_t covered = 0;
  for (const auto& r : records) covered += r.covered ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(records.size());
}

double mean_size(const std::vector<EvalRecord>& records) {
  check_non_empty(records, "mean_size");
  double total = 0.0;
  for (const auto& r : records) total += r.set_size;
  return total / static_cast<double>(records.size());
}

std::array<int, 3> size_quartile_boundaries(const std::vector<EvalRecord>& records) {
  if (records.size() < 4) {
    throw InvalidInputError("size_stratified_coverage: need at least 4 records");
  }
  std::vector<int> sizes;
  sizes.reserve(records.size());
  for (const auto& r : records) sizes.push_back(r.set_size);
  std::sort(sizes.begin(), sizes.end());
  const auto at = [&](double p) {
    const auto rank = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(sizes.size()) - 1e-9));
    return sizes[std::max<std::size_t>(rank, 1) - 1];
  };
  return {at(0.25), at(0.50), at(0.75)};
}

std::vector<StratumStats> size_stratified_coverage(const std::vector<EvalRecord>& records,
                                                   const std::array<int, 3>& boundaries) {
  if (records.size() < 4) {
    throw InvalidInputError("size_stratified_coverage: need at least 4 records");
  }
  const std::array<double, 4> lo_pct = {0, 25, 50, 75};
  const std::array<double, 4> hi_pct = {25, 50, 75, 100};
  std::vector<StratumStats> strata(4);
  std::array<std::int64_t, 4> covered{};
  std::array<double, 4> size_sum{};
  for (const auto& r : records) {
    int s = 3;
    if (r.set_size <= boundaries[0]) {
      s = 0;
    } else if (r.set_size <= boundaries[1]) {
      s = 1;
    } else if (r.set_size <= boundaries[2]) {
      s = 2;
    }
    strata[s].n += 1;
    covered[s] += r.covered ? 1 : 0;
    size_sum[s] += r.set_size;
  }
  for (int s = 0; s < 4; ++s) {
    strata[s].lo_pct = lo_pct[s];
    strata[s].hi_pct = hi_pct[s];
    if (strata[s].n > 0) {
      strata[s].coverage = static_cast<double>(covered[s]) / static_cast<double>(strata[s].n);
      strata[s].mean_size = size_sum[s] / static_cast<double>(strata[s].n);
    }
  }
  return strata;
}

std::vector<SelectivePoint> selective_accuracy_curve(
    const std::vector<EvalRecord>& records, const std::vector<double>& exclusion_fractions) {
  check_non_empty(records, "selective_accuracy_curve");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].set_size != records[b].set_size) {
      return records[a].set_size < records[b].set_size;
    }
    return records[a].example_id < records[b].example_id;
  });

  std::vector<SelectivePoint> curve;
  for (double fraction : exclusion_fractions) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
      throw InvalidInputError("selective_accuracy_curve: fractions must be in [0, 1)");
    }
    const auto drop = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(records.size()) + 1e-9));
    const std::size_t kept = records.size() - drop;
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < kept; ++i) {
      correct += records[order[i]].top1_correct ? 1 : 0;
    }
    curve.push_back({fraction, static_cast<double>(correct) / static_cast<double>(kept)});
  }
  return curve;
}

double relative_inefficiency(double mean_size_method, double mean_size_baseline) {
  if (!(mean_size_baseline > 0.0) || !(mean_size_method > 0.0)) {
    throw InvalidInputError("relative_inefficiency: sizes must be positive");
  }
  return mean_size_method / mean_size_baseline;
}

std::string format_inefficiency(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1fx", ratio);
  return buf;
}

void write_records_csv(std::ostream& out, const std::vector<EvalRecord>& records) {
  out << "example_id,client_id,true_label,set_size,covered,top1_correct\n";
  for (const auto& r : records) {
    out << r.example_id << ',' << r.client_id << ',' << r.true_label << ',' << r.set_size << ','
        << (r.covered ? 1 : 0) << ',' << (r.top1_correct ? 1 : 0) << '\n';
  }
}

std::string result_to_json(const ResultDoc& doc) {
  json j;
  j["run_id"] = doc.run_id;
  j["version"] = kVersion;
  j["plan"] = doc.plan_echo_json.empty() ? json::object() : json::parse(doc.plan_echo_json);
  j["rule"] = doc.rule;
  j["sketch"] = doc.sketch;
  j["alpha"] = doc.alpha;
  j["coverage"] = doc.coverage;
  j["mean_size"] = doc.mean_size;
  j["vacuous"] = doc.vacuous;
  j["seed"] = doc.seed;
  j["n_examples"] = doc.n_examples;
  if (doc.trial >= 0) j["trial"] = doc.trial;
  if (doc.trials > 0) j["trials"] = doc.trials;
  j["ssc"] = json::array();
  for (const auto& s : doc.ssc) {
    j["ssc"].push_back({{"lo_pct", s.lo_pct},
                        {"hi_pct", s.hi_pct},
                        {"coverage", s.coverage},
                        {"mean_size", s.mean_size},
                        {"n", s.n}});
  }
  j["selective"] = json::array();
  for (const auto& p : doc.selective) {
    j["selective"].push_back({{"excluded", p.excluded}, {"accuracy", p.accuracy}});
  }
  j["sketch_bytes_total"] = doc.sketch_bytes_total;
  return j.dump(2) + "\n";
}

}  // namespace fcp
