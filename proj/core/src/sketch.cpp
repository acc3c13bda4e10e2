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

#include "fcp/sketch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "fcp/error.hpp"

namespace fcp {

namespace {

constexpr std::uint8_t kFormatVersion = 1;
constexpr char kMagic[4] = {'F', 'C', 'S', 'K'};
constexpr std::int32_t kDdLowestBucket = std::numeric_limits<std::int32_t>::min();
constexpr double kDdMinIndexable = 1e-9;

/// Rank targeted by a quantile level: ceil(qN) with a 1e-9 slack so levels
/// passed as rank/N recover the intended rank.
std::int64_t target_rank(double q, std::uint64_t n) {
  const std::int64_t r = static_cast<std::int64_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
  return std::clamp<std::int64_t>(r, 1, static_cast<std::int64_t>(n));
}

void check_quantile_level(double q) {
  if (!(q > 0.0 && q <= 1.0)) {
    throw InvalidInputError("query: quantile level must be in (0, 1]");
  }
}

double sorted_order_statistic(const std::vector<double>& sorted, double q) {
  const std::int64_t rank = target_rank(q, sorted.size());
  return sorted[static_cast<std::size_t>(rank - 1)];
}

// ---------------------------------------------------------------------------
// TDigest internals

/// Arcsine scale function. One k-unit per centroid keeps centroid weights
/// small near q = 0 and q = 1 and large in the middle.
double tdigest_scale(double q, double compression) {
  q = std::clamp(q, 0.0, 1.0);
  return compression / (2.0 * std::numbers::pi) * std::asin(2.0 * q - 1.0);
}

/// Greedy left-to-right recluster of sorted (mean, weight) points under the
/// scale-function budget. Input must be sorted by mean.
std::vector<TDigestCentroid> tdigest_compact(std::vector<TDigestCentroid> points,
                                             double compression) {
  if (points.size() <= 1) return points;
  double total = 0.0;
  for (const auto& p : points) total += p.weight;

  std::vector<TDigestCentroid> out;
  double cum = 0.0;  // weight fully to the left of the open cluster
  TDigestCentroid open = points.front();
  double open_sum = open.mean * open.weight;
  double k_left = tdigest_scale(0.0, compression);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& p = points[i];
    const double q_right = (cum + open.weight + p.weight) / total;
    if (tdigest_scale(q_right, compression) - k_left <= 1.0) {
      open_sum += p.mean * p.weight;
      open.weight += p.weight;
      open.mean = open_sum / open.weight;
    } else {
      out.push_back(open);
      cum += open.weight;
      open = p;
      open_sum = p.mean * p.weight;
      k_left = tdigest_scale(cum / total, compression);
    }
  }
  out.push_back(open);
  return out;
}

std::vector<TDigestCentroid> tdigest_view(const std::vector<TDigestCentroid>& centroids,
                                          const std::vector<double>& buffer,
                                          double compression) {
  if (buffer.empty()) return centroids;
  std::vector<TDigestCentroid> merged = centroids;
  merged.reserve(merged.size() + buffer.size());
  for (double v : buffer) merged.push_back({v, 1.0});
  std::sort(merged.begin(), merged.end(),
            [](const TDigestCentroid& a, const TDigestCentroid& b) { return a.mean < b.mean; });
  return tdigest_compact(std::move(merged), compression);
}

/// Interpolated quantile over the canonical centroid list. Targets outside
/// the first/last centroid midpoints clamp to the extreme means, so queries
/// are a pure function of the centroids (what the wire format carries).
double tdigest_query(const std::vector<TDigestCentroid>& centroids, double q) {
  double total = 0.0;
  for (const auto& c : centroids) total += c.weight;
  const double target = q * total;

  double cum = 0.0;
  double prev_mid = 0.5 * centroids.front().weight;
  if (target <= prev_mid) return centroids.front().mean;
  for (std::size_t i = 1; i < centroids.size(); ++i) {
    cum += centroids[i - 1].weight;
    const double mid = cum + 0.5 * centroids[i].weight;
    if (target <= mid) {
      const double t = (target - prev_mid) / (mid - prev_mid);
      return centroids[i - 1].mean + t * (centroids[i].mean - centroids[i - 1].mean);
    }
    prev_mid = mid;
  }
  return centroids.back().mean;
}

// ---------------------------------------------------------------------------
// DdSketch internals

std::int32_t dd_bucket_index(double value, double gamma_log) {
  if (value < kDdMinIndexable) return kDdLowestBucket;
  return static_cast<std::int32_t>(std::ceil(std::log(value) / gamma_log - 1e-12));
}

double dd_bucket_value(std::int32_t index, double gamma) {
  if (index == kDdLowestBucket) return 0.0;
  return 2.0 * std::pow(gamma, index) / (gamma + 1.0);
}

// ---------------------------------------------------------------------------
// Little-endian packing

struct ByteWriter {
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

struct ByteReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset = 0;

  void require(std::size_t n, const char* what) {
    if (offset + n > size) throw DecodeError(std::string("truncated ") + what, offset);
  }
  std::uint8_t u8(const char* what) {
    require(1, what);
    return data[offset++];
  }
  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[offset + i]) << (8 * i);
    offset += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    require(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[offset + i]) << (8 * i);
    offset += 8;
    return v;
  }
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
};

}  // namespace

// ---------------------------------------------------------------------------
// SketchKind

SketchKind SketchKind::exact() { return {SketchType::Exact, 0.0, 0.0}; }

SketchKind SketchKind::tdigest(double compression) {
  SketchKind k{SketchType::TDigest, compression, 0.0};
  k.validate();
  return k;
}

SketchKind SketchKind::ddsketch(double relative_accuracy) {
  SketchKind k{SketchType::DdSketch, 0.0, relative_accuracy};
  k.validate();
  return k;
}

SketchKind SketchKind::mean_of_client_quantiles() {
  return {SketchType::MeanOfClientQuantiles, 0.0, 0.0};
}

void SketchKind::validate() const {
  if (type == SketchType::TDigest && !(compression >= 10.0)) {
    throw InvalidInputError("sketch: tdigest compression must be >= 10");
  }
  if (type == SketchType::DdSketch &&
      !(relative_accuracy > 0.0 && relative_accuracy <= 0.5)) {
    throw InvalidInputError("sketch: ddsketch relative accuracy must be in (0, 0.5]");
  }
}

std::string SketchKind::name() const {
  switch (type) {
    case SketchType::Exact: return "exact";
    case SketchType::TDigest: return "tdigest";
    case SketchType::DdSketch: return "ddsketch";
    case SketchType::MeanOfClientQuantiles: return "mean";
  }
  return "?";
}

SketchKind sketch_kind_from_name(const std::string& name) {
  if (name == "exact") return SketchKind::exact();
  if (name == "tdigest") return SketchKind::tdigest();
  if (name == "ddsketch") return SketchKind::ddsketch();
  if (name == "mean") return SketchKind::mean_of_client_quantiles();
  throw InvalidInputError("sketch kind: expected exact|tdigest|ddsketch|mean, got '" + name +
                          "'");
}

bool operator==(const SketchKind& a, const SketchKind& b) {
  if (a.type != b.type) return false;
  switch (a.type) {
    case SketchType::TDigest: return a.compression == b.compression;
    case SketchType::DdSketch: return a.relative_accuracy == b.relative_accuracy;
    default: return true;
  }
}

// ---------------------------------------------------------------------------
// QuantileSketch

QuantileSketch::QuantileSketch(SketchKind kind) : kind_(kind) {
  kind_.validate();
  switch (kind_.type) {
    case SketchType::Exact: state_ = ExactState{}; break;
    case SketchType::TDigest: state_ = TDigestState{}; break;
    case SketchType::DdSketch: state_ = DdState{}; break;
    case SketchType::MeanOfClientQuantiles: state_ = MeanState{{{}}}; break;
  }
}

void QuantileSketch::insert(double value) {
  if (!std::isfinite(value)) {
    throw InvalidInputError("insert: value must be finite");
  }
  switch (kind_.type) {
    case SketchType::Exact:
      std::get<ExactState>(state_).values.push_back(value);
      break;
    case SketchType::TDigest: {
      auto& st = std::get<TDigestState>(state_);
      st.buffer.push_back(value);
      if (st.buffer.size() >= static_cast<std::size_t>(10.0 * kind_.compression)) {
        st.centroids = tdigest_view(st.centroids, st.buffer, kind_.compression);
        st.buffer.clear();
      }
      break;
    }
    case SketchType::DdSketch: {
      if (value < 0.0) {
        throw InvalidInputError("insert: ddsketch requires non-negative values");
      }
      auto& st = std::get<DdState>(state_);
      st.buckets[dd_bucket_index(value, std::log((1.0 + kind_.relative_accuracy) /
                                                 (1.0 - kind_.relative_accuracy)))] += 1;
      break;
    }
    case SketchType::MeanOfClientQuantiles:
      std::get<MeanState>(state_).participants.front().push_back(value);
      break;
  }
  ++count_;
}

double QuantileSketch::query(double q) const {
  check_quantile_level(q);
  if (count_ == 0) throw EmptySketchError("query: sketch holds no values");
  switch (kind_.type) {
    case SketchType::Exact: {
      std::vector<double> sorted = std::get<ExactState>(state_).values;
      std::sort(sorted.begin(), sorted.end());
      return sorted_order_statistic(sorted, q);
    }
    case SketchType::TDigest: {
      const auto& st = std::get<TDigestState>(state_);
      return tdigest_query(tdigest_view(st.centroids, st.buffer, kind_.compression), q);
    }
    case SketchType::DdSketch: {
      const auto& st = std::get<DdState>(state_);
      const std::int64_t rank = target_rank(q, count_);
      const double gamma =
          (1.0 + kind_.relative_accuracy) / (1.0 - kind_.relative_accuracy);
      std::int64_t cum = 0;
      for (const auto& [index, n] : st.buckets) {
        cum += static_cast<std::int64_t>(n);
        if (cum >= rank) return dd_bucket_value(index, gamma);
      }
      return dd_bucket_value(st.buckets.rbegin()->first, gamma);
    }
    case SketchType::MeanOfClientQuantiles: {
      const auto& st = std::get<MeanState>(state_);
      double sum = 0.0;
      int live = 0;
      for (const auto& values : st.participants) {
        if (values.empty()) continue;
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        sum += sorted_order_statistic(sorted, q);
        ++live;
      }
      return sum / live;
    }
  }
  throw InvalidInputError("query: unknown sketch kind");
}

std::vector<TDigestCentroid> QuantileSketch::tdigest_centroids() const {
  if (kind_.type != SketchType::TDigest) {
    throw InvalidInputError("tdigest_centroids: not a tdigest sketch");
  }
  const auto& st = std::get<TDigestState>(state_);
  return tdigest_view(st.centroids, st.buffer, kind_.compression);
}

QuantileSketch merge(const QuantileSketch& a, const QuantileSketch& b) {
  if (a.kind_ != b.kind_) {
    throw InvalidInputError("merge: sketch kinds (and parameters) must match");
  }
  QuantileSketch out(a.kind_);
  out.count_ = a.count_ + b.count_;
  switch (a.kind_.type) {
    case SketchType::Exact: {
      auto& values = std::get<QuantileSketch::ExactState>(out.state_).values;
      values = std::get<QuantileSketch::ExactState>(a.state_).values;
      const auto& bv = std::get<QuantileSketch::ExactState>(b.state_).values;
      values.insert(values.end(), bv.begin(), bv.end());
      break;
    }
    case SketchType::TDigest: {
      const auto& sa = std::get<QuantileSketch::TDigestState>(a.state_);
      const auto& sb = std::get<QuantileSketch::TDigestState>(b.state_);
      std::vector<TDigestCentroid> merged = tdigest_view(sa.centroids, sa.buffer,
                                                         a.kind_.compression);
      const std::vector<TDigestCentroid> other =
          tdigest_view(sb.centroids, sb.buffer, b.kind_.compression);
      merged.insert(merged.end(), other.begin(), other.end());
      std::sort(merged.begin(), merged.end(), [](const TDigestCentroid& x,
                                                 const TDigestCentroid& y) {
        return x.mean < y.mean;
      });
      std::get<QuantileSketch::TDigestState>(out.state_).centroids =
          tdigest_compact(std::move(merged), a.kind_.compression);
      break;
    }
    case SketchType::DdSketch: {
      auto& buckets = std::get<QuantileSketch::DdState>(out.state_).buckets;
      buckets = std::get<QuantileSketch::DdState>(a.state_).buckets;
      for (const auto& [index, n] : std::get<QuantileSketch::DdState>(b.state_).buckets) {
        buckets[index] += n;
      }
      break;
    }
    case SketchType::MeanOfClientQuantiles: {
      auto& parts = std::get<QuantileSketch::MeanState>(out.state_).participants;
      parts.clear();
      for (const auto& p : std::get<QuantileSketch::MeanState>(a.state_).participants) {
        if (!p.empty()) parts.push_back(p);
      }
      for (const auto& p : std::get<QuantileSketch::MeanState>(b.state_).participants) {
        if (!p.empty()) parts.push_back(p);
      }
      if (parts.empty()) parts.push_back({});
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

struct SketchCodec {
  static SketchEnvelope encode(const QuantileSketch& s, std::string client_id) {
    ByteWriter w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u8(kFormatVersion);
    w.u8(static_cast<std::uint8_t>(s.kind_.type));
    switch (s.kind_.type) {
      case SketchType::TDigest: w.f64(s.kind_.compression); break;
      case SketchType::DdSketch: w.f64(s.kind_.relative_accuracy); break;
      default: break;
    }
    w.u64(s.count_);
    switch (s.kind_.type) {
      case SketchType::Exact: {
        for (double v : std::get<QuantileSketch::ExactState>(s.state_).values) w.f64(v);
        break;
      }
      case SketchType::TDigest: {
        const auto& st = std::get<QuantileSketch::TDigestState>(s.state_);
        const auto centroids = tdigest_view(st.centroids, st.buffer, s.kind_.compression);
        w.u32(static_cast<std::uint32_t>(centroids.size()));
        for (const auto& c : centroids) {
          w.f64(c.mean);
          w.f64(c.weight);
        }
        break;
      }
      case SketchType::DdSketch: {
        const auto& buckets = std::get<QuantileSketch::DdState>(s.state_).buckets;
        w.u32(static_cast<std::uint32_t>(buckets.size()));
        for (const auto& [index, n] : buckets) {
          w.i32(index);
          w.u64(n);
        }
        break;
      }
      case SketchType::MeanOfClientQuantiles: {
        const auto& parts = std::get<QuantileSketch::MeanState>(s.state_).participants;
        std::vector<const std::vector<double>*> live;
        for (const auto& p : parts) {
          if (!p.empty()) live.push_back(&p);
        }
        w.u32(static_cast<std::uint32_t>(live.size()));
        for (const auto* p : live) {
          w.u64(p->size());
          for (double v : *p) w.f64(v);
        }
        break;
      }
    }
    SketchEnvelope env;
    env.bytes = std::move(w.bytes);
    env.byte_length = env.bytes.size();
    env.client_id = std::move(client_id);
    return env;
  }

  static QuantileSketch decode(const std::uint8_t* data, std::size_t size) {
    ByteReader r{data, size};
    r.require(4, "magic");
    if (std::memcmp(data, kMagic, 4) != 0) throw DecodeError("bad magic", 0);
    r.offset = 4;
    const std::uint8_t version = r.u8("version");
    if (version != kFormatVersion) {
      throw DecodeError("unsupported format version " + std::to_string(version), 4);
    }
    const std::uint8_t tag = r.u8("kind tag");
    if (tag > static_cast<std::uint8_t>(SketchType::MeanOfClientQuantiles)) {
      throw DecodeError("unknown kind tag " + std::to_string(tag), 5);
    }
    const SketchType type = static_cast<SketchType>(tag);

    SketchKind kind;
    switch (type) {
      case SketchType::Exact: kind = SketchKind::exact(); break;
      case SketchType::TDigest: kind = SketchKind::tdigest(r.f64("compression")); break;
      case SketchType::DdSketch: kind = SketchKind::ddsketch(r.f64("relative accuracy")); break;
      case SketchType::MeanOfClientQuantiles:
        kind = SketchKind::mean_of_client_quantiles();
        break;
    }
    QuantileSketch s(kind);
    s.count_ = r.u64("count");
    switch (type) {
      case SketchType::Exact: {
        auto& values = std::get<QuantileSketch::ExactState>(s.state_).values;
        values.reserve(s.count_);
        for (std::uint64_t i = 0; i < s.count_; ++i) values.push_back(r.f64("value"));
        break;
      }
      case SketchType::TDigest: {
        auto& st = std::get<QuantileSketch::TDigestState>(s.state_);
        const std::uint32_t n = r.u32("centroid count");
        double weight_sum = 0.0;
        double prev_mean = -std::numeric_limits<double>::infinity();
        for (std::uint32_t i = 0; i < n; ++i) {
          const std::size_t at = r.offset;
          TDigestCentroid c{r.f64("centroid mean"), r.f64("centroid weight")};
          if (!std::isfinite(c.mean) || !(c.weight > 0.0) || c.mean < prev_mean) {
            throw DecodeError("invalid centroid", at);
          }
          prev_mean = c.mean;
          weight_sum += c.weight;
          st.centroids.push_back(c);
        }
        if (std::llround(weight_sum) != static_cast<long long>(s.count_)) {
          throw DecodeError("centroid weights disagree with count", r.offset);
        }
        break;
      }
      case SketchType::DdSketch: {
        auto& st = std::get<QuantileSketch::DdState>(s.state_);
        const std::uint32_t n = r.u32("bucket count");
        std::uint64_t total = 0;
        for (std::uint32_t i = 0; i < n; ++i) {
          const std::size_t at = r.offset;
          const std::int32_t index = r.i32("bucket index");
          const std::uint64_t c = r.u64("bucket count");
          if (c == 0 || st.buckets.count(index)) throw DecodeError("invalid bucket", at);
          st.buckets[index] = c;
          total += c;
        }
        if (total != s.count_) throw DecodeError("bucket counts disagree with count", r.offset);
        break;
      }
      case SketchType::MeanOfClientQuantiles: {
        auto& st = std::get<QuantileSketch::MeanState>(s.state_);
        st.participants.clear();
        const std::uint32_t parts = r.u32("participant count");
        std::uint64_t total = 0;
        for (std::uint32_t i = 0; i < parts; ++i) {
          const std::uint64_t n = r.u64("participant value count");
          std::vector<double> values;
          values.reserve(n);
          for (std::uint64_t j = 0; j < n; ++j) values.push_back(r.f64("value"));
          total += n;
          st.participants.push_back(std::move(values));
        }
        if (st.participants.empty()) st.participants.push_back({});
        if (total != s.count_) {
          throw DecodeError("participant counts disagree with count", r.offset);
        }
        break;
      }
    }
    if (r.offset != size) throw DecodeError("trailing bytes", r.offset);
    return s;
  }
};

SketchEnvelope serialize(const QuantileSketch& sketch, std::string client_id) {
  return SketchCodec::encode(sketch, std::move(client_id));
}

QuantileSketch deserialize(const SketchEnvelope& envelope) {
  return SketchCodec::decode(envelope.bytes.data(), envelope.bytes.size());
}

QuantileSketch deserialize_bytes(const std::uint8_t* data, std::size_t size) {
  return SketchCodec::decode(data, size);
}

// ---------------------------------------------------------------------------
// Rank-error measurement

double achieved_epsilon(const QuantileSketch& sketch, const std::vector<double>& reference_values,
                        const std::vector<double>& q_grid) {
  if (reference_values.empty() || reference_values.size() != sketch.count()) {
    throw InvalidInputError("achieved_epsilon: reference must be exactly the inserted values");
  }
  std::vector<double> sorted = reference_values;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());

  double worst = 0.0;
  for (double q : q_grid) {
    check_quantile_level(q);
    const double value = sketch.query(q);
    const auto lo =
        std::lower_bound(sorted.begin(), sorted.end(), value) - sorted.begin();
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), value) - sorted.begin();
    // The value occupies ranks [lo+1, hi] when present; a value between two
    // order statistics acts as a cut with fractional rank in [lo, lo+1].
    const double rank_lo = hi > lo ? lo + 1.0 : static_cast<double>(lo);
    const double rank_hi = hi > lo ? static_cast<double>(hi) : lo + 1.0;
    const double target = q * n;
    double err = 0.0;
    if (target < rank_lo) err = rank_lo - target;
    if (target > rank_hi) err = target - rank_hi;
    worst = std::max(worst, err / n);
  }
  return worst;
}

}  // namespace fcp
