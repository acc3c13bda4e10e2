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

#include "fcp/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fcp/error.hpp"

namespace fcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// ceil with a 1e-9 slack so products like 0.8 * 10 that land a hair above an
/// integer do not bump the rank.
std::int64_t guarded_ceil(double x) {
  return static_cast<std::int64_t>(std::ceil(x - 1e-9));
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidInputError("alpha: must be in (0, 1)");
  }
}

}  // namespace

std::int64_t CalibrationScores::total() const {
  std::int64_t n = 0;
  for (const auto& c : per_client) n += static_cast<std::int64_t>(c.size());
  return n;
}

void CalibrationScores::validate() const {
  if (per_client.empty()) {
    throw InvalidInputError("scores: need at least one client");
  }
  for (std::size_t k = 0; k < per_client.size(); ++k) {
    if (per_client[k].empty()) {
      throw InvalidInputError("scores: client " + std::to_string(k) + " has no scores");
    }
    for (double s : per_client[k]) {
      if (!std::isfinite(s) || s < 0.0) {
        throw InvalidInputError("scores: client " + std::to_string(k) +
                                " has a negative or non-finite score");
      }
    }
  }
}

std::vector<double> CalibrationScores::pooled_sorted() const {
  std::vector<double> pooled;
  pooled.reserve(static_cast<std::size_t>(total()));
  for (const auto& c : per_client) pooled.insert(pooled.end(), c.begin(), c.end());
  std::sort(pooled.begin(), pooled.end());
  return pooled;
}

std::string quantile_rule_name(QuantileRule rule) {
  switch (rule) {
    case QuantileRule::Federated: return "federated";
    case QuantileRule::Iid: return "iid";
    case QuantileRule::Robust: return "robust";
    case QuantileRule::Uniform: return "uniform";
    case QuantileRule::Dp: return "dp";
  }
  return "?";
}

void MixtureWeights::validate() const {
  if (lambda.empty()) throw InvalidInputError("lambda: empty weight vector");
  double sum = 0.0;
  for (double w : lambda) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidInputError("lambda: entries must be non-negative finite reals");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvalidInputError("lambda: entries sum to " + std::to_string(sum) +
                            ", expected 1 within 1e-9");
  }
  if (!(uncertainty_delta >= 0.0 && uncertainty_delta < 1.0)) {
    throw InvalidInputError("uncertainty_delta: must be in [0, 1)");
  }
}

MixtureWeights MixtureWeights::proportional(const std::vector<int>& client_sizes, double delta) {
  if (client_sizes.empty()) throw InvalidInputError("client_sizes: empty");
  MixtureWeights w;
  double total = 0.0;
  for (int n : client_sizes) {
    if (n < 1) throw InvalidInputError("client_sizes: every client needs n >= 1");
    total += n + 1.0;
  }
  for (int n : client_sizes) w.lambda.push_back((n + 1.0) / total);
  w.uncertainty_delta = delta;
  return w;
}

MixtureWeights MixtureWeights::uniform(int num_clients, double delta) {
  if (num_clients < 1) throw InvalidInputError("num_clients: must be >= 1");
  MixtureWeights w;
  w.lambda.assign(num_clients, 1.0 / num_clients);
  w.uncertainty_delta = delta;
  return w;
}

RankResult federated_rank(std::int64_t n_total, int num_clients, double alpha) {
  check_alpha(alpha);
  if (num_clients < 1 || n_total < num_clients) {
    throw InvalidInputError("federated_rank: need N >= K >= 1");
  }
  const std::int64_t rank = guarded_ceil((1.0 - alpha) * (n_total + num_clients));
  return {rank, rank > n_total};
}

std::int64_t iid_rank(std::int64_t n_total, double alpha) {
  check_alpha(alpha);
  if (n_total < 1) throw InvalidInputError("iid_rank: need N >= 1");
  return guarded_ceil((1.0 - alpha) * (n_total + 1));
}

RankResult robust_rank(std::int64_t n_total, int num_clients, double alpha, double delta) {
  check_alpha(alpha);
  if (num_clients < 1 || n_total < num_clients) {
    throw InvalidInputError("robust_rank: need N >= K >= 1");
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw InvalidInputError("robust_rank: delta must be in [0, 1)");
  }
  const std::int64_t rank = guarded_ceil((1.0 - alpha) * (n_total + num_clients) / (1.0 - delta));
  return {rank, rank > n_total};
}

QuantileResult exact_quantile(const CalibrationScores& scores, std::int64_t rank) {
  scores.validate();
  if (rank < 1) throw InvalidInputError("exact_quantile: rank must be >= 1");
  QuantileResult result;
  result.rule = QuantileRule::Federated;
  result.rank = rank;
  if (rank > scores.total()) {
    result.vacuous = true;
    result.threshold = kInf;
    return result;
  }
  std::vector<double> pooled = scores.pooled_sorted();
  result.threshold = pooled[static_cast<std::size_t>(rank - 1)];
  return result;
}

namespace {

/// Shared scan for the data-dependent rules. Walks the pooled candidates in
/// ascending order (the condition is monotone and the optimum lies on a data
/// point) and returns the first value whose worst-case coverage reaches
/// 1 - alpha.
QuantileResult scan_pooled_candidates(const CalibrationScores& scores, double alpha,
                                      QuantileRule rule, double delta, bool uniform_weights) {
  scores.validate();
  check_alpha(alpha);
  const int k = scores.num_clients();
  const std::int64_t n_total = scores.total();

  // Client sizes and per-client sorted copies for m_k(q) counting.
  std::vector<std::vector<double>> sorted = scores.per_client;
  for (auto& c : sorted) std::sort(c.begin(), c.end());
  std::vector<double> pooled = scores.pooled_sorted();

  std::vector<double> lower_bound(k);  // (1-delta)(n_k+1)/(N+K)
  for (int i = 0; i < k; ++i) {
    lower_bound[i] = (1.0 - delta) * (sorted[i].size() + 1.0) / (n_total + k);
  }

  QuantileResult result;
  result.rule = rule;
  if (uniform_weights) {
    double gap = 0.0;
    for (int i = 0; i < k; ++i) gap += 1.0 / (sorted[i].size() + 1.0);
    result.gap_estimate = gap / k;
  }

  for (double q : pooled) {
    // m_k(q) = |{ s in client k : s <= q }|
    double value;
    if (uniform_weights) {
      value = 0.0;
      for (int i = 0; i < k; ++i) {
        const auto m = std::upper_bound(sorted[i].begin(), sorted[i].end(), q) -
                       sorted[i].begin();
        value += static_cast<double>(m) / (sorted[i].size() + 1.0);
      }
      value /= k;
    } else {
      double base = 0.0;
      double bound_sum = 0.0;
      double min_c = kInf;
      for (int i = 0; i < k; ++i) {
        const auto m = std::upper_bound(sorted[i].begin(), sorted[i].end(), q) -
                       sorted[i].begin();
        const double c = static_cast<double>(m) / (sorted[i].size() + 1.0);
        base += lower_bound[i] * c;
        bound_sum += lower_bound[i];
        min_c = std::min(min_c, c);
      }
      value = base + (1.0 - bound_sum) * min_c;
    }
    if (value >= 1.0 - alpha - 1e-12) {
      result.threshold = q;
      std::int64_t pooled_rank = 0;
      for (int i = 0; i < k; ++i) {
        pooled_rank += std::upper_bound(sorted[i].begin(), sorted[i].end(), q) -
                       sorted[i].begin();
      }
      result.rank = pooled_rank;
      return result;
    }
  }
  result.vacuous = true;
  result.threshold = kInf;
  result.rank = n_total + 1;
  return result;
}

}  // namespace

QuantileResult weighted_robust_quantile(const CalibrationScores& scores,
                                        const MixtureWeights& weights, double alpha) {
  weights.validate();
  if (static_cast<int>(weights.lambda.size()) != scores.num_clients()) {
    throw InvalidInputError("weights: lambda length does not match client count");
  }
  return scan_pooled_candidates(scores, alpha, QuantileRule::Robust,
                                weights.uncertainty_delta, /*uniform_weights=*/false);
}

QuantileResult uniform_weight_quantile(const CalibrationScores& scores, double alpha) {
  return scan_pooled_candidates(scores, alpha, QuantileRule::Uniform, 0.0,
                                /*uniform_weights=*/true);
}

std::vector<double> dp_rank_distribution(std::int64_t n_total, double alpha, double privacy) {
  check_alpha(alpha);
  if (n_total < 1) throw InvalidInputError("dp_rank_distribution: need N >= 1");
  if (!(privacy > 0.0)) throw InvalidInputError("privacy: must be > 0");
  const double target = (1.0 - alpha) * static_cast<double>(n_total);
  // Weights are shifted by the largest exponent before normalization so huge
  // privacy values do not underflow everything to zero.
  std::vector<double> log_w(static_cast<std::size_t>(n_total));
  double max_log = -kInf;
  for (std::int64_t r = 1; r <= n_total; ++r) {
    const double lw = -privacy * std::abs(static_cast<double>(r) - target) / 2.0;
    log_w[static_cast<std::size_t>(r - 1)] = lw;
    max_log = std::max(max_log, lw);
  }
  double sum = 0.0;
  for (double& lw : log_w) {
    lw = std::exp(lw - max_log);
    sum += lw;
  }
  for (double& w : log_w) w /= sum;
  return log_w;
}

std::int64_t dp_sample_rank(std::int64_t n_total, double alpha, double privacy, Rng& rng) {
  const std::vector<double> probs = dp_rank_distribution(n_total, alpha, privacy);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double cum = 0.0;
  for (std::int64_t r = 1; r <= n_total; ++r) {
    cum += probs[static_cast<std::size_t>(r - 1)];
    if (u <= cum) return r;
  }
  return n_total;
}

QuantileResult dp_quantile(const CalibrationScores& scores, double alpha, double privacy,
                           std::uint64_t seed) {
  scores.validate();
  Rng rng = make_rng(seed);
  const std::int64_t rank = dp_sample_rank(scores.total(), alpha, privacy, rng);
  QuantileResult result = exact_quantile(scores, rank);
  result.rule = QuantileRule::Dp;
  return result;
}

}  // namespace fcp
