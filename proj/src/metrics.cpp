// Copyright 2026 The roadcond Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "roadcond/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "roadcond/ingest.hpp"

namespace roadcond {

ConfusionMatrix::ConfusionMatrix(std::size_t n_classes) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::size_t count) {
  if (truth >= n_ || predicted >= n_) throw std::out_of_range("class index outside confusion matrix");
  counts_[truth * n_ + predicted] += count;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw std::invalid_argument("confusion matrices differ in size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (std::size_t c : counts_) t += c;
  return t;
}

std::size_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::size_t t = 0;
  for (std::size_t p = 0; p < n_; ++p) t += (*this)(truth, p);
  return t;
}

std::size_t ConfusionMatrix::correct() const {
  std::size_t t = 0;
  for (std::size_t c = 0; c < n_; ++c) t += (*this)(c, c);
  return t;
}

ConfusionMatrix confusion(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                          std::size_t n_classes) {
  if (labels.size() != predictions.size()) throw std::invalid_argument("label/prediction length mismatch");
  if (labels.empty()) throw std::invalid_argument("confusion matrix of no observations");
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) cm.add(labels[i], predictions[i]);
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw std::invalid_argument("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.correct()) / static_cast<double>(total);
}

std::vector<std::optional<double>> recall_per_class(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.n_classes());
  for (std::size_t c = 0; c < cm.n_classes(); ++c) {
    if (const std::size_t row = cm.row_total(c); row > 0) {
      out[c] = static_cast<double>(cm(c, c)) / static_cast<double>(row);
    }
  }
  return out;
}

std::vector<std::optional<double>> precision_per_class(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.n_classes());
  for (std::size_t p = 0; p < cm.n_classes(); ++p) {
    std::size_t col = 0;
    for (std::size_t t = 0; t < cm.n_classes(); ++t) col += cm(t, p);
    if (col > 0) out[p] = static_cast<double>(cm(p, p)) / static_cast<double>(col);
  }
  return out;
}

std::vector<std::optional<double>> f1_per_class(const ConfusionMatrix& cm) {
  const auto r = recall_per_class(cm);
  const auto p = precision_per_class(cm);
  std::vector<std::optional<double>> out(cm.n_classes());
  for (std::size_t c = 0; c < cm.n_classes(); ++c) {
    if (r[c] && p[c]) out[c] = (*r[c] + *p[c]) > 0.0 ? 2.0 * *r[c] * *p[c] / (*r[c] + *p[c]) : 0.0;
  }
  return out;
}

double average_recall(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : recall_per_class(cm)) {
    if (r) {
      sum += *r;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("average recall undefined: no class has true instances");
  return sum / static_cast<double>(n);
}

std::optional<double> adjacent_error_fraction(const ConfusionMatrix& cm, const AdjacencyMap& adjacency) {
  std::size_t errors = 0, adjacent = 0;
  for (std::size_t t = 0; t < cm.n_classes(); ++t) {
    for (std::size_t p = 0; p < cm.n_classes(); ++p) {
      if (t == p) continue;
      errors += cm(t, p);
      if (adjacency.contains(t, p)) adjacent += cm(t, p);
    }
  }
  if (errors == 0) return std::nullopt;
  return static_cast<double>(adjacent) / static_cast<double>(errors);
}

std::string select_model(std::span<const SelectionCandidate> candidates, double tau) {
  if (candidates.empty()) throw std::invalid_argument("model selection over no candidates");
  if (tau < 0.0) throw std::invalid_argument("selection tolerance must be nonnegative");
  double best_recall = candidates.front().average_recall;
  for (const auto& c : candidates) best_recall = std::max(best_recall, c.average_recall);
  const SelectionCandidate* winner = nullptr;
  for (const auto& c : candidates) {
    if (c.average_recall < best_recall - tau) continue;
    if (!winner || c.accuracy > winner->accuracy || (c.accuracy == winner->accuracy && c.id < winner->id)) {
      winner = &c;
    }
  }
  return winner->id;
}

ReliabilityReport reliability(std::span<const std::pair<double, bool>> pairs, std::size_t bins) {
  if (pairs.empty()) throw std::invalid_argument("reliability of no predictions");
  if (bins == 0) throw std::invalid_argument("reliability needs at least one bin");
  std::vector<double> prob_sum(bins, 0.0), hits(bins, 0.0);
  ReliabilityReport r;
  r.bins.resize(bins);
  for (const auto& [p, outcome] : pairs) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, p) * static_cast<double>(bins)));
    prob_sum[b] += p;
    hits[b] += outcome ? 1.0 : 0.0;
    ++r.bins[b].count;
  }
  const auto total = static_cast<double>(pairs.size());
  for (std::size_t b = 0; b < bins; ++b) {
    auto& bin = r.bins[b];
    if (bin.count == 0) continue;
    const auto n = static_cast<double>(bin.count);
    bin.mean_probability = prob_sum[b] / n;
    bin.frequency = hits[b] / n;
    r.ece += (n / total) * std::abs(bin.mean_probability - bin.frequency);
  }
  return r;
}

EvalReport evaluate(std::span<const LabelledPrediction> predictions, const AdjacencyMap& adjacency) {
  if (predictions.empty()) throw std::invalid_argument("evaluation over no predictions");
  EvalReport r;
  std::map<std::string, std::size_t> stratum_correct;
  for (const auto& p : predictions) {
    r.confusion.add(p.truth, p.predicted);
    const std::string q(to_string(p.quality));
    ++r.stratum_count[q];
    if (p.truth == p.predicted) ++stratum_correct[q];
  }
  r.count = predictions.size();
  r.accuracy = accuracy(r.confusion);
  r.recall = recall_per_class(r.confusion);
  r.average_recall = average_recall(r.confusion);
  r.adjacent_error_fraction = adjacent_error_fraction(r.confusion, adjacency);
  for (const auto& [q, n] : r.stratum_count) {
    r.stratum_accuracy[q] = static_cast<double>(stratum_correct[q]) / static_cast<double>(n);
  }
  return r;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string optional_text(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("undefined");
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json recall = nlohmann::json::object();
  nlohmann::json matrix = nlohmann::json::array();
  for (std::size_t c = 0; c < r.recall.size(); ++c) {
    recall[std::string(to_string(surface_class_at(c)))] = optional_json(r.recall[c]);
    std::vector<std::size_t> row;
    for (std::size_t p = 0; p < r.confusion.n_classes(); ++p) row.push_back(r.confusion(c, p));
    matrix.push_back(row);
  }
  return {{"count", r.count},
          {"accuracy", r.accuracy},
          {"average_recall", r.average_recall},
          {"recall", recall},
          {"adjacent_error_fraction", optional_json(r.adjacent_error_fraction)},
          {"stratum_accuracy", r.stratum_accuracy},
          {"stratum_count", r.stratum_count},
          {"confusion", matrix}};
}

EvalReport eval_report_from_json(const nlohmann::json& j, const AdjacencyMap& adjacency) {
  try {
    const auto matrix = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    EvalReport r;
    r.confusion = ConfusionMatrix(matrix.size());
    for (std::size_t t = 0; t < matrix.size(); ++t) {
      if (matrix[t].size() != matrix.size()) throw std::invalid_argument("confusion matrix is not square");
      for (std::size_t p = 0; p < matrix.size(); ++p) r.confusion.add(t, p, matrix[t][p]);
    }
    r.count = r.confusion.total();
    r.accuracy = accuracy(r.confusion);
    r.recall = recall_per_class(r.confusion);
    r.average_recall = average_recall(r.confusion);
    r.adjacent_error_fraction = adjacent_error_fraction(r.confusion, adjacency);
    r.stratum_accuracy = j.at("stratum_accuracy").get<std::map<std::string, double>>();
    r.stratum_count = j.at("stratum_count").get<std::map<std::string, std::size_t>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed evaluation report: ") + e.what());
  }
}

std::string to_text(const EvalReport& r, const std::string& title) {
  std::ostringstream out;
  out << title << "\n";
  out << "  observations:      " << r.count << "\n";
  out << "  accuracy:          " << format_double(r.accuracy) << "\n";
  out << "  average recall:    " << format_double(r.average_recall) << "\n";
  out << "  adjacent errors:   " << optional_text(r.adjacent_error_fraction) << "\n";
  for (std::size_t c = 0; c < r.recall.size(); ++c) {
    out << "  recall " << to_string(surface_class_at(c)) << ": " << optional_text(r.recall[c]) << "\n";
  }
  for (const auto& [q, a] : r.stratum_accuracy) {
    out << "  accuracy (" << q << " quality, n=" << r.stratum_count.at(q) << "): " << format_double(a) << "\n";
  }
  return out.str();
}

std::string to_table_rows(const EvalReport& r, const std::string& prefix) {
  std::string out;
  auto row = [&](const std::string& metric, const std::string& stratum, const std::string& value) {
    out += prefix + ',' + metric + ',' + stratum + ',' + value + '\n';
  };
  row("count", "all", std::to_string(r.count));
  row("accuracy", "all", format_double(r.accuracy));
  row("average_recall", "all", format_double(r.average_recall));
  row("adjacent_error_fraction", "all", optional_text(r.adjacent_error_fraction));
  for (std::size_t c = 0; c < r.recall.size(); ++c) {
    row("recall_" + std::string(to_string(surface_class_at(c))), "all", optional_text(r.recall[c]));
  }
  for (const auto& [q, a] : r.stratum_accuracy) row("accuracy", q, format_double(a));
  return out;
}

}  // namespace roadcond
