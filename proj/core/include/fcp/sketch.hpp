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
#include <variant>
#include <vector>

namespace fcp {

enum class SketchType : std::uint8_t {
  Exact = 0,
  TDigest = 1,
  DdSketch = 2,
  MeanOfClientQuantiles = 3,
};

/// Which summary a QuantileSketch keeps. `compression` applies to TDigest
/// (>= 10); `relative_accuracy` applies to DdSketch ((0, 0.5]).
struct SketchKind {
  SketchType type = SketchType::Exact;
  double compression = 100.0;
  double relative_accuracy = 0.01;

  static SketchKind exact();
  static SketchKind tdigest(double compression = 100.0);
  static SketchKind ddsketch(double relative_accuracy = 0.01);
  static SketchKind mean_of_client_quantiles();

  std::string name() const;
  void validate() const;

  friend bool operator==(const SketchKind& a, const SketchKind& b);
  friend bool operator!=(const SketchKind& a, const SketchKind& b) { return !(a == b); }
};

SketchKind sketch_kind_from_name(const std::string& name);

struct TDigestCentroid {
  double mean = 0.0;
  double weight = 0.0;
};

/// Mergeable approximate-quantile summary. Four kinds behind one interface:
///
///  - Exact: keeps raw values; query(q) is the ceil(qN)-th smallest.
///  - TDigest: centroid sketch with an arcsine scale function, so rank
///    accuracy tightens near the tails. Inserts buffer and compact once the
///    buffer reaches 10x the compression parameter.
///  - DdSketch: logarithmic buckets with a fixed relative value accuracy.
///    Values must be non-negative; values below 1e-9 collapse into the
///    lowest bucket and query as 0.
///  - MeanOfClientQuantiles: records each pre-merge participant's raw values
///    and answers queries with the unweighted mean of per-participant exact
///    quantiles. This deliberately reproduces the biased naive-averaging
///    baseline; no coverage guarantee attaches to it.
///
/// Sketches are single-writer while inserting; queries on a quiescent sketch
/// are safe concurrently.
class QuantileSketch {
 public:
  explicit QuantileSketch(SketchKind kind);

  /// Adds one finite value.
  void insert(double value);

  /// The q-quantile estimate, q in (0, 1]. Throws EmptySketchError when no
  /// values were inserted.
  double query(double q) const;

  std::uint64_t count() const { return count_; }
  const SketchKind& kind() const { return kind_; }

  /// Canonical centroid list (buffered values folded in). TDigest only.
  std::vector<TDigestCentroid> tdigest_centroids() const;

  friend QuantileSketch merge(const QuantileSketch& a, const QuantileSketch& b);
  friend struct SketchCodec;

 private:
  struct ExactState {
    std::vector<double> values;
  };
  struct TDigestState {
    std::vector<TDigestCentroid> centroids;  // sorted by mean
    std::vector<double> buffer;
  };
  struct DdState {
    std::map<std::int32_t, std::uint64_t> buckets;  // includes the zero bucket
  };
  struct MeanState {
    std::vector<std::vector<double>> participants;
  };

  SketchKind kind_;
  std::uint64_t count_ = 0;
  std::variant<ExactState, TDigestState, DdState, MeanState> state_;
};

/// Merged summary over both inputs. Kinds (including parameters) must match.
QuantileSketch merge(const QuantileSketch& a, const QuantileSketch& b);

/// Wire form of one client's sketch plus the byte accounting used for
/// communication measurements.
struct SketchEnvelope {
  std::vector<std::uint8_t> bytes;
  std::size_t byte_length = 0;
  std::string client_id;
};

/// Versioned little-endian binary layout:
///   magic "FCSK" | version u8 | kind tag u8 | kind parameter f64 (TDigest:
///   compression, DdSketch: relative accuracy, none otherwise) | count u64 |
///   payload. Payloads: TDigest = centroid count u32 + (mean f64, weight f64)
///   pairs sorted by mean; DdSketch = bucket count u32 + (index i32, count
///   u64) pairs ascending (lowest-bucket sentinel INT32_MIN first if
///   present); Exact = raw f64 values; MeanOfClientQuantiles = participant
///   count u32 + per participant (value count u64 + raw f64 values).
SketchEnvelope serialize(const QuantileSketch& sketch, std::string client_id = {});

/// Inverse of serialize. Throws DecodeError with the failing byte offset on
/// corrupt or truncated input. Round trips preserve all query results.
QuantileSketch deserialize(const SketchEnvelope& envelope);
QuantileSketch deserialize_bytes(const std::uint8_t* data, std::size_t size);

/// Empirical rank error of the sketch against the exactly inserted values:
/// the max over the grid of the distance between q*N and the rank span the
/// queried value occupies in the sorted reference, divided by N. This is the
/// epsilon of an "epsilon-approximate quantile" measured after the fact.
double achieved_epsilon(const QuantileSketch& sketch, const std::vector<double>& reference_values,
                        const std::vector<double>& q_grid);

}  // namespace fcp
