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

#include <string>
#include <vector>

namespace fcp {

/// Pre-softmax class scores. Must have >= 2 finite entries.
using LogitVector = std::vector<double>;

/// Softmax output over J classes. Construction validates: J >= 2, every entry
/// in [0, 1], entries summing to 1 within 1e-9. Out-of-tolerance inputs are
/// rejected rather than renormalized so ingestion bugs surface early.
class ProbVector {
 public:
  explicit ProbVector(std::vector<double> probs);

  const std::vector<double>& values() const { return probs_; }
  int num_classes() const { return static_cast<int>(probs_.size()); }

  /// Index of the largest probability; ties go to the lowest class index.
  int argmax() const;

 private:
  std::vector<double> probs_;
};

enum class ScoreKind { Lac, Aps, Raps };

std::string score_kind_name(ScoreKind kind);
ScoreKind score_kind_from_name(const std::string& name);

/// Which conformal score to compute. The RAPS fields are ignored unless
/// kind == Raps; `raps_rank_threshold` is the 1-based rank past which the
/// per-rank penalty starts to accrue.
struct ScoreFunctionSpec {
  ScoreKind kind = ScoreKind::Lac;
  double raps_penalty = 0.001;
  int raps_rank_threshold = 1;
};

/// Label subset produced by thresholding per-class scores. Non-empty by
/// construction: when no class passes the threshold, the argmax class is
/// forced in and `forced_top1` is set.
struct PredictionSet {
  std::vector<int> labels;  // ascending class indices
  double threshold = 0.0;
  bool forced_top1 = false;

  bool contains(int label) const;
  int size() const { return static_cast<int>(labels.size()); }
};

/// Numerically stable softmax of logits / temperature (max logit subtracted
/// before exponentiation). temperature must be > 0 and logits finite.
ProbVector softmax(const LogitVector& logits, double temperature = 1.0);

struct TemperatureFit {
  double temperature = 1.0;
  /// Set when the calibration data cannot identify a temperature (fewer than
  /// two distinct labels); the fit falls back to T = 1.
  bool degenerate = false;
};

/// Fits a scaling temperature by minimizing mean negative log-likelihood of
/// softmax(logits / T) over the calibration pairs. The search runs over
/// log T in [ln 0.01, ln 100] to an absolute tolerance of 1e-4 in log T.
TemperatureFit fit_temperature(const std::vector<LogitVector>& logits,
                               const std::vector<int>& labels);

/// Unweighted arithmetic mean of per-client temperatures.
double average_temperatures(const std::vector<double>& client_temps);

/// Conformal score of (probs, label) under `spec`. Lower = more conforming.
///
/// Lac:  1 - probs[label].
/// Aps:  cumulative probability of the descending sort, through the rank of
///       `label` inclusive (deterministic, no randomization).
/// Raps: Aps plus raps_penalty * max(0, rank(label) - raps_rank_threshold),
///       rank 1-based in the descending sort.
/// Probability ties are broken by ascending class index.
double conformal_score(const ScoreFunctionSpec& spec, const ProbVector& probs, int label);

/// All labels whose score is <= threshold; falls back to the argmax class
/// when that set would be empty. threshold may be +infinity (full set) but
/// not NaN.
PredictionSet build_prediction_set(const ScoreFunctionSpec& spec, const ProbVector& probs,
                                   double threshold);

}  // namespace fcp
