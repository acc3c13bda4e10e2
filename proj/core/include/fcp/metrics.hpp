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

#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace fcp {

/// One evaluated test example. `covered` means the true label was in the
/// prediction set; `set_size` >= 1 because sets are never empty.
struct EvalRecord {
  std::string example_id;
  int client_id = 0;
  int true_label = 0;
  int set_size = 1;
  bool covered = false;
  bool top1_correct = false;
};

/// Empirical marginal coverage: mean of the covered flags.
double coverage(const std::vector<EvalRecord>& records);

/// Mean prediction-set size.
double mean_size(const std::vector<EvalRecord>& records);

/// Size values at the 25/50/75 percentiles of the empirical set-size
/// distribution (order statistics at ranks ceil(p * n)).
std::array<int, 3> size_quartile_boundaries(const std::vector<EvalRecord>& records);

struct StratumStats {
  double lo_pct = 0.0;
  double hi_pct = 0.0;
  double coverage = 0.0;
  double mean_size = 0.0;
  std::int64_t n = 0;
};

/// Coverage and mean size within each size quartile. Records whose size ties
/// a boundary land in the lower stratum. Requires >= 4 records.
std::vector<StratumStats> size_stratified_coverage(const std::vector<EvalRecord>& records,
                                                   const std::array<int, 3>& boundaries);

struct SelectivePoint {
  double excluded = 0.0;
  double accuracy = 0.0;
};

/// Top-1 accuracy after dropping the given fraction of records with the
/// largest prediction sets (ties broken by example_id). Fractions in [0, 1).
std::vector<SelectivePoint> selective_accuracy_curve(
    const std::vector<EvalRecord>& records, const std::vector<double>& exclusion_fractions);

/// Ratio of a method's mean set size over a baseline's.
double relative_inefficiency(double mean_size_method, double mean_size_baseline);

/// One-decimal CLI rendering, e.g. "2.0x".
std::string format_inefficiency(double ratio);

/// CSV export with header example_id,client_id,true_label,set_size,covered,top1_correct.
void write_records_csv(std::ostream& out, const std::vector<EvalRecord>& records);

/// Everything one run's result file carries (the JSON result schema).
struct ResultDoc {
  std::string run_id;
  std::string plan_echo_json;  // pre-serialized config echo, embedded verbatim
  std::string rule;
  std::string sketch;
  double alpha = 0.0;
  double coverage = 0.0;
  double mean_size = 0.0;
  bool vacuous = false;
  std::vector<StratumStats> ssc;
  std::vector<SelectivePoint> selective;
  std::uint64_t sketch_bytes_total = 0;
  std::uint64_t seed = 0;
  int trial = -1;   // -1 = aggregate
  int trials = 0;   // total trial count (aggregate only)
  std::int64_t n_examples = 0;
};

/// Serializes the result document as pretty JSON with sorted keys (the
/// machine-readable result format; byte-stable for fixed inputs).
std::string result_to_json(const ResultDoc& doc);

}  // namespace fcp
