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

#include "fcp/random.hpp"

namespace fcp {

/// Conformal calibration scores grouped by client. Every client must hold at
/// least one finite, non-negative score.
struct CalibrationScores {
  std::vector<std::vector<double>> per_client;

  int num_clients() const { return static_cast<int>(per_client.size()); }
  std::int64_t total() const;
  void validate() const;
  std::vector<double> pooled_sorted() const;
};

enum class QuantileRule { Federated, Iid, Robust, Uniform, Dp };

std::string quantile_rule_name(QuantileRule rule);

/// A selected calibration threshold. `rank` is 1-based over the ascending
/// pooled scores; a vacuous result carries a +infinity threshold (full
/// prediction sets) instead of failing.
struct QuantileResult {
  double threshold = 0.0;
  std::int64_t rank = 0;
  bool vacuous = false;
  QuantileRule rule = QuantileRule::Federated;
  /// Width of the coverage band for the Uniform rule; 0 for other rules.
  double gap_estimate = 0.0;
};

/// Test-mixture weights over clients plus the uncertainty radius used by the
/// robust rules. Entries must be non-negative and sum to 1 within 1e-9.
struct MixtureWeights {
  std::vector<double> lambda;
  double uncertainty_delta = 0.0;

  void validate() const;
  /// lambda_k proportional to n_k + 1, the default test distribution.
  static MixtureWeights proportional(const std::vector<int>& client_sizes, double delta = 0.0);
  static MixtureWeights uniform(int num_clients, double delta = 0.0);
};

struct RankResult {
  std::int64_t rank = 0;
  bool vacuous = false;
};

/// Pooled rank ceil((1-alpha)(N+K)) for K partially exchangeable clients;
/// vacuous when the rank exceeds N, i.e. alpha < 1/(N/K + 1).
RankResult federated_rank(std::int64_t n_total, int num_clients, double alpha);

/// Classic split-conformal rank ceil((1-alpha)(N+1)).
std::int64_t iid_rank(std::int64_t n_total, double alpha);

/// Rank ceil((N+K)(1-alpha)/(1-delta)) covering mixture weights known only up
/// to a multiplicative slack delta in [0, 1).
RankResult robust_rank(std::int64_t n_total, int num_clients, double alpha, double delta);

/// The rank-th smallest pooled score (order statistic over the multiset);
/// rank > N yields a vacuous result.
QuantileResult exact_quantile(const CalibrationScores& scores, std::int64_t rank);

/// Smallest pooled score q whose worst-case mixture-weighted coverage
/// min over the lower-bounded weight simplex of sum_k w_k m_k(q)/(n_k+1)
/// reaches 1 - alpha, where m_k(q) counts client-k scores <= q. The inner
/// minimum has a closed form: the slack mass delta rides on the client with
/// the smallest m_k(q)/(n_k+1).
QuantileResult weighted_robust_quantile(const CalibrationScores& scores,
                                        const MixtureWeights& weights, double alpha);

/// Smallest pooled score q with (1/K) sum_k m_k(q)/(n_k+1) >= 1 - alpha, for
/// an equally weighted test mixture. `gap_estimate` reports the band width
/// (1/K) sum_k 1/(n_k+1).
QuantileResult uniform_weight_quantile(const CalibrationScores& scores, double alpha);

/// Exponential-mechanism rank selector: picks rank r in [1, N] with
/// probability proportional to exp(-privacy * |r - (1-alpha)N| / 2).
std::int64_t dp_sample_rank(std::int64_t n_total, double alpha, double privacy, Rng& rng);

/// Normalized rank-selection probabilities of the mechanism (for diagnostics
/// and distribution tests).
std::vector<double> dp_rank_distribution(std::int64_t n_total, double alpha, double privacy);

/// Samples a private rank with the seeded generator, then returns that order
/// statistic of the pooled scores.
QuantileResult dp_quantile(const CalibrationScores& scores, double alpha, double privacy,
                           std::uint64_t seed);

}  // namespace fcp
