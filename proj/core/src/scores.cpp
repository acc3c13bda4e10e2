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

#include "fcp/scores.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "fcp/error.hpp"

namespace fcp {

namespace {

constexpr double kProbSumTolerance = 1e-9;
constexpr double kLogTemperatureLo = -4.605170185988091;  // ln 0.01
constexpr double kLogTemperatureHi = 4.605170185988092;   // ln 100
constexpr double kLogTemperatureTol = 1e-4;

void check_logits(const LogitVector& logits) {
  if (logits.size() < 2) {
    throw InvalidInputError("logits: need at least 2 classes, got " +
                            std::to_string(logits.size()));
  }
  for (double v : logits) {
    if (!std::isfinite(v)) throw InvalidInputError("logits: non-finite entry");
  }
}

/// Class indices ordered by descending probability, ties by ascending index.
std::vector<int> descending_order(const std::vector<double>& probs) {
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs[a] > probs[b]; });
  return order;
}

}  // namespace

ProbVector::ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) {
    throw InvalidInputError("probs: need at least 2 classes, got " +
                            std::to_string(probs_.size()));
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidInputError("probs: entry outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance) {
    throw InvalidInputError("probs: entries sum to " + std::to_string(sum) +
                            ", expected 1 within 1e-9");
  }
}

int ProbVector::argmax() const {
  return static_cast<int>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

std::string score_kind_name(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::Lac: return "lac";
    case ScoreKind::Aps: return "aps";
    case ScoreKind::Raps: return "raps";
  }
  return "?";
}

ScoreKind score_kind_from_name(const std::string& name) {
  if (name == "lac") return ScoreKind::Lac;
  if (name == "aps") return ScoreKind::Aps;
  if (name == "raps") return ScoreKind::Raps;
  throw InvalidInputError("score kind: expected lac|aps|raps, got '" + name + "'");
}

bool PredictionSet::contains(int label) const {
  return std::binary_search(labels.begin(), labels.end(), label);
}

ProbVector softmax(const LogitVector& logits, double temperature) {
  check_logits(logits);
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidInputError("temperature: must be a positive finite real");
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp((logits[j] - max_logit) / temperature);
    sum += out[j];
  }
  for (double& v : out) v /= sum;
  return ProbVector(std::move(out));
}

namespace {

/// Mean NLL of softmax(logits / T) with T = exp(log_t).
double mean_nll(const std::vector<LogitVector>& logits, const std::vector<int>& labels,
                double log_t) {
  const double t = std::exp(log_t);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto& l = logits[i];
    const double max_logit = *std::max_element(l.begin(), l.end());
    double sum = 0.0;
    for (double v : l) sum += std::exp((v - max_logit) / t);
    total -= (l[labels[i]] - max_logit) / t - std::log(sum);
  }
  return total / static_cast<double>(logits.size());
}

}  // namespace

TemperatureFit fit_temperature(const std::vector<LogitVector>& logits,
                               const std::vector<int>& labels) {
  if (logits.empty() || logits.size() != labels.size()) {
    throw InvalidInputError("fit_temperature: need matching, non-empty logits and labels");
  }
  const int num_classes = static_cast<int>(logits.front().size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    check_logits(logits[i]);
    if (static_cast<int>(logits[i].size()) != num_classes) {
      throw InvalidInputError("fit_temperature: inconsistent class count across rows");
    }
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw InvalidInputError("fit_temperature: label out of range");
    }
  }
  std::set<int> distinct(labels.begin(), labels.end());
  if (logits.size() < 2 || distinct.size() < 2) {
    return {1.0, true};
  }

  // Coarse scan to locate the basin, then golden-section refinement. The
  // objective is smooth and unimodal in practice but the scan guards against
  // a bad initial bracket.
  constexpr int kScanPoints = 257;
  double best_log_t = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  int best_idx = 0;
  const double step = (kLogTemperatureHi - kLogTemperatureLo) / (kScanPoints - 1);
  for (int i = 0; i < kScanPoints; ++i) {
    const double log_t = kLogTemperatureLo + step * i;
    const double val = mean_nll(logits, labels, log_t);
    if (val < best_val) {
      best_val = val;
      best_log_t = log_t;
      best_idx = i;
    }
  }
  double lo = std::max(kLogTemperatureLo, kLogTemperatureLo + step * (best_idx - 1));
  double hi = std::min(kLogTemperatureHi, kLogTemperatureLo + step * (best_idx + 1));

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = mean_nll(logits, labels, x1);
  double f2 = mean_nll(logits, labels, x2);
  while (hi - lo > kLogTemperatureTol) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = mean_nll(logits, labels, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = mean_nll(logits, labels, x2);
    }
  }
  const double mid = 0.5 * (lo + hi);
  if (mean_nll(logits, labels, mid) < best_val) best_log_t = mid;
  return {std::exp(best_log_t), false};
}

double average_temperatures(const std::vector<double>& client_temps) {
  if (client_temps.empty()) {
    throw InvalidInputError("average_temperatures: empty list");
  }
  double sum = 0.0;
  for (double t : client_temps) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw InvalidInputError("average_temperatures: non-positive temperature");
    }
    sum += t;
  }
  return sum / static_cast<double>(client_temps.size());
}

double conformal_score(const ScoreFunctionSpec& spec, const ProbVector& probs, int label) {
  const auto& p = probs.values();
  if (label < 0 || label >= probs.num_classes()) {
    throw InvalidInputError("score: label " + std::to_string(label) + " out of range [0, " +
                            std::to_string(probs.num_classes()) + ")");
  }
  if (spec.kind == ScoreKind::Lac) {
    return 1.0 - p[label];
  }
  const std::vector<int> order = descending_order(p);
  double cumulative = 0.0;
  int rank = 0;  // 1-based rank of `label` in the descending sort
  for (std::size_t i = 0; i < order.size(); ++i) {
    cumulative += p[order[i]];
    if (order[i] == label) {
      rank = static_cast<int>(i) + 1;
      break;
    }
  }
  if (spec.kind == ScoreKind::Aps) {
    return cumulative;
  }
  if (spec.raps_rank_threshold < 1) {
    throw InvalidInputError("score: raps_rank_threshold must be >= 1");
  }
  if (spec.raps_penalty < 0.0) {
    throw InvalidInputError("score: raps_penalty must be non-negative");
  }
  return cumulative + spec.raps_penalty * std::max(0, rank - spec.raps_rank_threshold);
}

PredictionSet build_prediction_set(const ScoreFunctionSpec& spec, const ProbVector& probs,
                                   double threshold) {
  if (std::isnan(threshold)) {
    throw InvalidInputError("build_prediction_set: threshold is NaN");
  }
  PredictionSet set;
  set.threshold = threshold;
  for (int y = 0; y < probs.num_classes(); ++y) {
    if (conformal_score(spec, probs, y) <= threshold) set.labels.push_back(y);
  }
  if (set.labels.empty()) {
    set.labels.push_back(probs.argmax());
    set.forced_top1 = true;
  }
  return set;
}

}  // namespace fcp
