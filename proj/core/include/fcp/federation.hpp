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
#include <string>
#include <vector>

#include "fcp/metrics.hpp"
#include "fcp/model.hpp"
#include "fcp/quantile.hpp"
#include "fcp/scores.hpp"
#include "fcp/sketch.hpp"

namespace fcp {

enum class FederationRuleKind { Federated, Iid, Robust, Uniform, Dp, SingleClient };

/// Quantile rule a federation plan calibrates with. Every rule reduces to a
/// pooled rank that the merged sketch is queried at; SingleClient(k) instead
/// uses only client k's sketch with the plain split-conformal rank.
struct FederationRule {
  FederationRuleKind kind = FederationRuleKind::Federated;
  double delta = 0.0;    // Robust
  double privacy = 1.0;  // Dp
  int client = 0;        // SingleClient

  static FederationRule federated() { return {}; }
  static FederationRule iid() { return {FederationRuleKind::Iid, 0, 1, 0}; }
  static FederationRule robust(double delta) { return {FederationRuleKind::Robust, delta, 1, 0}; }
  static FederationRule uniform() { return {FederationRuleKind::Uniform, 0, 1, 0}; }
  static FederationRule dp(double privacy) { return {FederationRuleKind::Dp, 0, privacy, 0}; }
  static FederationRule single_client(int k) {
    return {FederationRuleKind::SingleClient, 0, 1, k};
  }

  std::string name() const;
};

/// Full experiment description: who the clients are, how much calibration
/// data each holds, and how the conformal threshold is estimated.
struct FederationPlan {
  int num_clients = 0;
  std::vector<std::vector<int>> per_client_classes;
  std::vector<int> per_client_n;
  double alpha = 0.1;
  ScoreFunctionSpec score_spec;
  FederationRule rule;
  SketchKind sketch_kind = SketchKind::exact();
  std::uint64_t seed = 0;

  void validate(int num_classes) const;
};

/// Calibrated set-valued predictor plus provenance: which rule and rank
/// produced the threshold and how many sketch bytes the clients shipped.
struct ConformalPredictor {
  double threshold = 0.0;
  bool vacuous = false;
  double temperature = 1.0;
  ScoreFunctionSpec score_spec;
  FederationRule rule;
  std::int64_t rank = 0;
  std::int64_t total_scores = 0;
  std::uint64_t sketch_bytes_total = 0;
  bool temperature_degenerate = false;
};

/// Deterministic class assignment: a seeded permutation of the classes is
/// dealt round-robin until every class is owned, then clients are topped up
/// to classes_per_client with distinct extras. classes_per_client = J gives
/// every client all classes (the homogeneous control). An assignment that
/// cannot cover every class requires allow_uncovered.
std::vector<std::vector<int>> make_partitions(int num_classes, int num_clients,
                                              int classes_per_client, std::uint64_t seed,
                                              bool allow_uncovered = false);

/// Plan-driven wrapper over the synthetic generator.
std::vector<ClientData> generate_clients(const SyntheticTask& task, const FederationPlan& plan,
                                         int test_per_client = 0, int train_per_client = 0);

/// Runs the calibration protocol: per-client temperature fitting and
/// unweighted averaging, per-client conformal scores on the temperature-
/// scaled probabilities, per-client sketches merged centrally, and one
/// quantile query at the plan rule's rank / N. A rank past N produces a
/// vacuous predictor (full sets) rather than an error.
ConformalPredictor calibrate(const FederationPlan& plan, const std::vector<ClientData>& clients,
                             const ProbabilityModel& model);

struct TestDraw {
  Example example;
  int client_id = 0;
};

/// M draws from the mixture: client k with probability lambda_k, then a
/// uniform pick from that client's test pool. Seeded and deterministic.
std::vector<TestDraw> sample_test_mixture(const std::vector<ClientData>& clients,
                                          const MixtureWeights& weights, int num_draws,
                                          std::uint64_t seed);

/// Applies the predictor to one example: temperature-scaled probabilities,
/// per-class scores, threshold.
PredictionSet predict(const ConformalPredictor& predictor, const ProbabilityModel& model,
                      const Example& example);

/// Prediction + bookkeeping for every draw.
std::vector<EvalRecord> evaluate(const ConformalPredictor& predictor,
                                 const ProbabilityModel& model,
                                 const std::vector<TestDraw>& draws);

/// Re-partitions each client's calibration+test pool into a fresh 50/50
/// split (odd pools give the extra example to test). Train pools pass
/// through. This is the per-trial replication step.
std::vector<ClientData> resplit_pools(const std::vector<ClientData>& clients,
                                      std::uint64_t seed);

}  // namespace fcp
