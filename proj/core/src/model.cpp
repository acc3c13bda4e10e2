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

#include "fcp/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fcp/error.hpp"
#include "fcp/random.hpp"

namespace fcp {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& token, std::size_t line) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError("expected a finite decimal number, got '" + token + "'", line);
  }
  return value;
}

int parse_int(const std::string& token, std::size_t line) {
  int value = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("expected an integer, got '" + token + "'", line);
  }
  return value;
}

struct ScoreRow {
  std::string client_id;
  std::string example_id;
  int true_label = 0;
  LogitVector logits;
};

LoadedScores assemble(std::vector<ScoreRow> rows, int num_classes) {
  LoadedScores out;
  out.num_classes = num_classes;

  std::unordered_map<std::string, LogitVector> table;
  std::map<std::string, int> client_index;
  std::vector<std::string> client_order;
  for (auto& row : rows) {
    table[row.example_id] = row.logits;
    if (!client_index.count(row.client_id)) {
      client_index[row.client_id] = static_cast<int>(client_order.size());
      client_order.push_back(row.client_id);
    }
  }
  out.clients.resize(client_order.size());
  for (std::size_t k = 0; k < client_order.size(); ++k) {
    out.clients[k].client_id = static_cast<int>(k);
  }
  for (auto& row : rows) {
    Example ex;
    ex.id = std::move(row.example_id);
    ex.label = row.true_label;
    out.clients[client_index[row.client_id]].calibration.push_back(std::move(ex));
    out.rows_per_client[row.client_id] += 1;
  }
  out.model = ProbabilityModel::lookup(std::move(table), num_classes);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// SyntheticTask

void SyntheticTask::validate() const {
  if (num_classes < 2) throw InvalidInputError("task: need at least 2 classes");
  if (feature_dim < 2) throw InvalidInputError("task: need feature_dim >= 2");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw InvalidInputError("task: noise_sigma must be a non-negative real");
  }
  if (static_cast<int>(class_means.size()) != num_classes) {
    throw InvalidInputError("task: need one mean per class");
  }
  for (int a = 0; a < num_classes; ++a) {
    if (static_cast<int>(class_means[a].size()) != feature_dim) {
      throw InvalidInputError("task: mean dimension mismatch");
    }
    for (int b = 0; b < a; ++b) {
      if (class_means[a] == class_means[b]) {
        throw InvalidInputError("task: class means must be pairwise distinct");
      }
    }
  }
}

SyntheticTask SyntheticTask::make(int num_classes, int feature_dim, double mean_spread,
                                  double noise_sigma, std::uint64_t seed) {
  SyntheticTask task;
  task.num_classes = num_classes;
  task.feature_dim = feature_dim;
  task.noise_sigma = noise_sigma;
  task.seed = seed;
  Rng rng = make_rng(mix_seed(seed, 0x4d45414e));
  std::uniform_real_distribution<double> unif(-mean_spread, mean_spread);
  task.class_means.resize(num_classes);
  for (auto& mean : task.class_means) {
    mean.resize(feature_dim);
    for (double& v : mean) v = unif(rng);
  }
  task.validate();
  return task;
}

// ---------------------------------------------------------------------------
// ProbabilityModel

ProbabilityModel ProbabilityModel::linear(int num_classes, int feature_dim,
                                          std::vector<double> weights) {
  if (num_classes < 2 || feature_dim < 1) {
    throw InvalidInputError("model: need num_classes >= 2 and feature_dim >= 1");
  }
  if (weights.size() != static_cast<std::size_t>(num_classes) * (feature_dim + 1)) {
    throw InvalidInputError("model: weights must be num_classes x (feature_dim + 1)");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw InvalidInputError("model: non-finite weight");
  }
  ProbabilityModel m;
  m.lookup_ = false;
  m.num_classes_ = num_classes;
  m.feature_dim_ = feature_dim;
  m.weights_ = std::move(weights);
  return m;
}

ProbabilityModel ProbabilityModel::lookup(std::unordered_map<std::string, LogitVector> table,
                                          int num_classes) {
  ProbabilityModel m;
  m.lookup_ = true;
  m.num_classes_ = num_classes;
  m.table_ = std::move(table);
  return m;
}

LogitVector ProbabilityModel::logits(const Example& x) const {
  if (lookup_) {
    auto it = table_.find(x.id);
    if (it == table_.end()) {
      throw InvalidInputError("lookup model: unknown example id '" + x.id + "'");
    }
    return it->second;
  }
  if (static_cast<int>(x.features.size()) != feature_dim_) {
    throw InvalidInputError("model: feature dimension mismatch");
  }
  LogitVector out(num_classes_);
  for (int j = 0; j < num_classes_; ++j) {
    const double* row = weights_.data() + static_cast<std::size_t>(j) * (feature_dim_ + 1);
    double z = row[feature_dim_];  // bias
    for (int i = 0; i < feature_dim_; ++i) z += row[i] * x.features[i];
    out[j] = z;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Client generation

std::vector<ClientData> generate_clients(const SyntheticTask& task,
                                         const std::vector<std::vector<int>>& per_client_classes,
                                         const std::vector<int>& per_client_n,
                                         int test_per_client, int train_per_client) {
  task.validate();
  if (per_client_classes.empty() || per_client_classes.size() != per_client_n.size()) {
    throw InvalidInputError("generate_clients: class sets and sizes must match, non-empty");
  }
  for (std::size_t k = 0; k < per_client_classes.size(); ++k) {
    if (per_client_classes[k].empty()) {
      throw InvalidInputError("generate_clients: client " + std::to_string(k) +
                              " has an empty class set");
    }
    for (int c : per_client_classes[k]) {
      if (c < 0 || c >= task.num_classes) {
        throw InvalidInputError("generate_clients: class index out of range");
      }
    }
    if (per_client_n[k] < 1) {
      throw InvalidInputError("generate_clients: every client needs n >= 1");
    }
  }

  std::vector<ClientData> clients(per_client_classes.size());
  for (std::size_t k = 0; k < clients.size(); ++k) {
    ClientData& client = clients[k];
    client.client_id = static_cast<int>(k);
    Rng rng = make_rng(mix_seed(task.seed, 0xC11E0000ULL + k));
    std::uniform_int_distribution<std::size_t> pick(0, per_client_classes[k].size() - 1);
    std::normal_distribution<double> noise(0.0, 1.0);

    auto draw = [&](const std::string& tag, int index) {
      Example ex;
      ex.id = "c" + std::to_string(k) + "_" + tag + "_" + std::to_string(index);
      ex.label = per_client_classes[k][pick(rng)];
      ex.features.resize(task.feature_dim);
      for (int d = 0; d < task.feature_dim; ++d) {
        ex.features[d] = task.class_means[ex.label][d] + task.noise_sigma * noise(rng);
      }
      return ex;
    };

    const int n_cal = per_client_n[k];
    const int n_test = test_per_client > 0 ? test_per_client : n_cal;
    const int n_train = train_per_client > 0 ? train_per_client : n_cal;
    for (int i = 0; i < n_train; ++i) client.train.push_back(draw("train", i));
    for (int i = 0; i < n_cal; ++i) client.calibration.push_back(draw("cal", i));
    for (int i = 0; i < n_test; ++i) client.test.push_back(draw("test", i));
  }
  return clients;
}

// ---------------------------------------------------------------------------
// Toy federated trainer

namespace {

/// Mean cross-entropy of the linear model on a pool; also accumulates the
/// gradient when `grad` is non-null.
double linear_loss_and_grad(const std::vector<double>& weights, int num_classes, int feature_dim,
                            const std::vector<Example>& pool, std::vector<double>* grad) {
  const int cols = feature_dim + 1;
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  double loss = 0.0;
  std::vector<double> z(num_classes);
  for (const Example& ex : pool) {
    for (int j = 0; j < num_classes; ++j) {
      const double* row = weights.data() + static_cast<std::size_t>(j) * cols;
      double v = row[feature_dim];
      for (int i = 0; i < feature_dim; ++i) v += row[i] * ex.features[i];
      z[j] = v;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (int j = 0; j < num_classes; ++j) {
      z[j] = std::exp(z[j] - zmax);
      sum += z[j];
    }
    loss -= std::log(z[ex.label] / sum);
    if (grad) {
      for (int j = 0; j < num_classes; ++j) {
        const double residual = z[j] / sum - (j == ex.label ? 1.0 : 0.0);
        double* row = grad->data() + static_cast<std::size_t>(j) * cols;
        for (int i = 0; i < feature_dim; ++i) row[i] += residual * ex.features[i];
        row[feature_dim] += residual;
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(pool.size());
  if (grad) {
    for (double& g : *grad) g *= inv_n;
  }
  return loss * inv_n;
}

}  // namespace

ProbabilityModel train_fedavg_linear(const std::vector<ClientData>& clients, int num_classes,
                                     int rounds, int local_steps, double learning_rate,
                                     std::uint64_t seed, std::vector<double>* round_losses) {
  if (clients.empty()) throw InvalidInputError("train: need at least one client");
  if (num_classes < 2) throw InvalidInputError("train: need num_classes >= 2");
  if (rounds < 0 || local_steps < 1) {
    throw InvalidInputError("train: rounds must be >= 0 and local_steps >= 1");
  }
  if (!(learning_rate > 0.0)) throw InvalidInputError("train: learning_rate must be > 0");
  int feature_dim = -1;
  std::int64_t total_n = 0;
  for (const ClientData& c : clients) {
    if (c.train.empty()) {
      throw InvalidInputError("train: client " + std::to_string(c.client_id) +
                              " has no training examples");
    }
    for (const Example& ex : c.train) {
      if (feature_dim < 0) feature_dim = static_cast<int>(ex.features.size());
      if (static_cast<int>(ex.features.size()) != feature_dim) {
        throw InvalidInputError("train: inconsistent feature dimension");
      }
      if (ex.label < 0 || ex.label >= num_classes) {
        throw InvalidInputError("train: label out of range");
      }
    }
    total_n += static_cast<std::int64_t>(c.train.size());
  }

  const int cols = feature_dim + 1;
  const std::size_t n_weights = static_cast<std::size_t>(num_classes) * cols;
  std::vector<double> global(n_weights);
  {
    Rng rng = make_rng(mix_seed(seed, 0x7261494e));
    std::normal_distribution<double> init(0.0, 0.01);
    for (double& w : global) w = init(rng);
  }
  if (round_losses) round_losses->clear();

  std::vector<double> grad(n_weights);
  std::vector<double> averaged(n_weights);
  std::vector<double> local(n_weights);
  for (int round = 0; round < rounds; ++round) {
    std::fill(averaged.begin(), averaged.end(), 0.0);
    for (const ClientData& c : clients) {
      local = global;
      for (int step = 0; step < local_steps; ++step) {
        const double loss =
            linear_loss_and_grad(local, num_classes, feature_dim, c.train, &grad);
        if (!std::isfinite(loss)) {
          throw TrainingError("training diverged to a non-finite loss", round);
        }
        for (std::size_t i = 0; i < n_weights; ++i) local[i] -= learning_rate * grad[i];
      }
      const double share = static_cast<double>(c.train.size()) / static_cast<double>(total_n);
      for (std::size_t i = 0; i < n_weights; ++i) averaged[i] += share * local[i];
    }
    global = averaged;
    if (round_losses) {
      double loss = 0.0;
      for (const ClientData& c : clients) {
        loss += linear_loss_and_grad(global, num_classes, feature_dim, c.train, nullptr) *
                (static_cast<double>(c.train.size()) / static_cast<double>(total_n));
      }
      if (!std::isfinite(loss)) {
        throw TrainingError("training diverged to a non-finite loss", round);
      }
      round_losses->push_back(loss);
    }
  }
  return ProbabilityModel::linear(num_classes, feature_dim, std::move(global));
}

// ---------------------------------------------------------------------------
// Score-file ingestion

LoadedScores load_score_file(const std::string& path, ScoreFileFormat format) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);

  std::vector<ScoreRow> rows;
  std::unordered_map<std::string, std::size_t> seen_ids;  // example id -> line
  int num_classes = -1;
  std::string line;
  std::size_t line_no = 0;

  if (format == ScoreFileFormat::Csv) {
    if (!std::getline(in, line)) throw ParseError("missing header", 1);
    ++line_no;
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 5 || header[0] != "client_id" || header[1] != "example_id" ||
        header[2] != "true_label") {
      throw ParseError(
          "header must be client_id,example_id,true_label,logit_0,...,logit_{J-1}", 1);
    }
    num_classes = static_cast<int>(header.size()) - 3;
    for (int j = 0; j < num_classes; ++j) {
      if (header[3 + j] != "logit_" + std::to_string(j)) {
        throw ParseError("unexpected logit column '" + header[3 + j] + "'", 1);
      }
    }
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::vector<std::string> fields = split_csv_line(line);
      if (static_cast<int>(fields.size()) != num_classes + 3) {
        throw FormatError("line " + std::to_string(line_no) + ": expected " +
                          std::to_string(num_classes + 3) + " columns, got " +
                          std::to_string(fields.size()));
      }
      ScoreRow row;
      row.client_id = fields[0];
      row.example_id = fields[1];
      row.true_label = parse_int(fields[2], line_no);
      for (int j = 0; j < num_classes; ++j) {
        row.logits.push_back(parse_double(fields[3 + j], line_no));
      }
      if (row.true_label < 0 || row.true_label >= num_classes) {
        throw ParseError("label " + std::to_string(row.true_label) + " out of range [0, " +
                             std::to_string(num_classes) + ")",
                         line_no);
      }
      if (!seen_ids.emplace(row.example_id, line_no).second) {
        throw ParseError("duplicate example_id '" + row.example_id + "'", line_no);
      }
      rows.push_back(std::move(row));
    }
  } else {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json doc;
      try {
        doc = json::parse(line);
      } catch (const json::exception& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
      }
      if (!doc.is_object() || !doc.contains("client_id") || !doc.contains("example_id") ||
          !doc.contains("true_label") || !doc.contains("logits")) {
        throw ParseError("object needs client_id, example_id, true_label, logits", line_no);
      }
      if (!doc["client_id"].is_string() || !doc["example_id"].is_string() ||
          !doc["true_label"].is_number_integer() || !doc["logits"].is_array()) {
        throw ParseError("mistyped field", line_no);
      }
      ScoreRow row;
      row.client_id = doc["client_id"].get<std::string>();
      row.example_id = doc["example_id"].get<std::string>();
      row.true_label = doc["true_label"].get<int>();
      for (const auto& v : doc["logits"]) {
        if (!v.is_number()) throw ParseError("logits must be numbers", line_no);
        row.logits.push_back(v.get<double>());
        if (!std::isfinite(row.logits.back())) {
          throw ParseError("non-finite logit", line_no);
        }
      }
      if (row.logits.size() < 2) throw ParseError("need at least 2 logits", line_no);
      if (num_classes < 0) {
        num_classes = static_cast<int>(row.logits.size());
      } else if (static_cast<int>(row.logits.size()) != num_classes) {
        throw FormatError("line " + std::to_string(line_no) + ": expected " +
                          std::to_string(num_classes) + " logits, got " +
                          std::to_string(row.logits.size()));
      }
      if (row.true_label < 0 || row.true_label >= num_classes) {
        throw ParseError("label " + std::to_string(row.true_label) + " out of range [0, " +
                             std::to_string(num_classes) + ")",
                         line_no);
      }
      if (!seen_ids.emplace(row.example_id, line_no).second) {
        throw ParseError("duplicate example_id '" + row.example_id + "'", line_no);
      }
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) throw ParseError("file holds no data rows", line_no);
  return assemble(std::move(rows), num_classes);
}

}  // namespace fcp
