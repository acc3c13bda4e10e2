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

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "fcp/scores.hpp"

namespace fcp {

struct Example {
  std::string id;
  std::vector<double> features;
  int label = 0;
};

/// One client's local pools. `train` feeds the toy trainer; `calibration`
/// and `test` are the held-out conformal pools and stay disjoint.
struct ClientData {
  int client_id = 0;
  std::vector<Example> train;
  std::vector<Example> calibration;
  std::vector<Example> test;
};

/// Gaussian-blob classification task: x = mean[y] + sigma * noise, with y
/// uniform over a client's class set. A deterministic desk-scale stand-in
/// for the image datasets a real federation would train on.
struct SyntheticTask {
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<std::vector<double>> class_means;  // num_classes x feature_dim
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  /// Means drawn uniformly from [-spread, spread]^d under the task seed.
  static SyntheticTask make(int num_classes, int feature_dim, double mean_spread,
                            double noise_sigma, std::uint64_t seed);
};

/// Logit source behind the pipeline: either a linear softmax classifier or a
/// lookup table keyed by example id (for externally produced score files).
class ProbabilityModel {
 public:
  /// weights laid out row-major as num_classes x (feature_dim + 1); the last
  /// column is the bias.
  static ProbabilityModel linear(int num_classes, int feature_dim, std::vector<double> weights);
  static ProbabilityModel lookup(std::unordered_map<std::string, LogitVector> table,
                                 int num_classes);

  LogitVector logits(const Example& x) const;
  int num_classes() const { return num_classes_; }
  bool is_lookup() const { return lookup_; }
  const std::vector<double>& linear_weights() const { return weights_; }

 private:
  ProbabilityModel() = default;

  bool lookup_ = false;
  int num_classes_ = 0;
  int feature_dim_ = 0;
  std::vector<double> weights_;
  std::unordered_map<std::string, LogitVector> table_;
};

/// Draws per-client pools from the task. Client k receives
/// per_client_n[k] calibration examples plus `test_per_client` /
/// `train_per_client` examples (0 means: same as per_client_n[k]). Output is
/// a pure function of the arguments.
std::vector<ClientData> generate_clients(const SyntheticTask& task,
                                         const std::vector<std::vector<int>>& per_client_classes,
                                         const std::vector<int>& per_client_n,
                                         int test_per_client = 0, int train_per_client = 0);

/// Federated multinomial logistic regression: full-batch local gradient
/// descent for `local_steps`, then n_k-weighted parameter averaging, for
/// `rounds` rounds. Deterministic under `seed`. `round_losses`, when given,
/// receives the global training loss after every round.
ProbabilityModel train_fedavg_linear(const std::vector<ClientData>& clients, int num_classes,
                                     int rounds, int local_steps, double learning_rate,
                                     std::uint64_t seed,
                                     std::vector<double>* round_losses = nullptr);

enum class ScoreFileFormat { Csv, Jsonl };

/// Ingestion result: a lookup model over the file's logits plus per-client
/// example pools (all rows land in `calibration`; split downstream).
struct LoadedScores {
  ProbabilityModel model = ProbabilityModel::lookup({}, 2);
  std::vector<ClientData> clients;
  std::map<std::string, int> rows_per_client;
  int num_classes = 0;
};

/// Reads a score file.
///
/// CSV schema: header `client_id,example_id,true_label,logit_0,...,logit_{J-1}`,
/// UTF-8, decimal floats, no quoting. JSONL: one object per line with keys
/// client_id, example_id, true_label, logits (array). Both encodings carry
/// identical meaning. Schema violations raise ParseError with the 1-based
/// line number; a class-count drift raises FormatError.
LoadedScores load_score_file(const std::string& path, ScoreFileFormat format);

}  // namespace fcp
