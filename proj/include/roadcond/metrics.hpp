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

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "roadcond/domain.hpp"

namespace roadcond {

// Rows are true labels, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t n_classes = kNumSurfaceClasses);

  std::size_t n_classes() const { return n_; }
  std::size_t operator()(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }
  void add(std::size_t truth, std::size_t predicted, std::size_t count = 1);
  void merge(const ConfusionMatrix& other);

  std::size_t total() const;
  std::size_t row_total(std::size_t truth) const;
  std::size_t correct() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

// Throws std::invalid_argument on length mismatch or empty input.
ConfusionMatrix confusion(std::span<const std::size_t> labels, std::span<const std::size_t> predictions,
                          std::size_t n_classes = kNumSurfaceClasses);

// Throws std::invalid_argument for an empty matrix.
double accuracy(const ConfusionMatrix& cm);
// nullopt for classes with no true instances.
std::vector<std::optional<double>> recall_per_class(const ConfusionMatrix& cm);
std::vector<std::optional<double>> precision_per_class(const ConfusionMatrix& cm);
std::vector<std::optional<double>> f1_per_class(const ConfusionMatrix& cm);
// Mean of the defined recalls. Throws std::invalid_argument if none is defined.
double average_recall(const ConfusionMatrix& cm);
// Share of errors that land in an adjacent class; nullopt when there are no
// errors.
std::optional<double> adjacent_error_fraction(const ConfusionMatrix& cm, const AdjacencyMap& adjacency);

struct SelectionCandidate {
  std::string id;
  double average_recall = 0.0;
  double accuracy = 0.0;
};

// Shortlists candidates within `tau` of the best average recall, then picks
// the highest accuracy; remaining ties go to the lexicographically lowest id.
// Throws std::invalid_argument for an empty list or negative tau.
std::string select_model(std::span<const SelectionCandidate> candidates, double tau = 0.01);

struct ReliabilityBin {
  double mean_probability = 0.0;
  double frequency = 0.0;
  std::size_t count = 0;
};

struct ReliabilityReport {
  std::vector<ReliabilityBin> bins;
  double ece = 0.0;
};

// Equal-width bins on [0,1]; ECE = sum (count/total) |mean prob - frequency|.
// Throws std::invalid_argument for empty input or zero bins.
ReliabilityReport reliability(std::span<const std::pair<double, bool>> pairs, std::size_t bins = 10);

struct EvalReport {
  ConfusionMatrix confusion{kNumSurfaceClasses};
  double accuracy = 0.0;
  std::vector<std::optional<double>> recall;
  double average_recall = 0.0;
  std::optional<double> adjacent_error_fraction;
  std::map<std::string, double> stratum_accuracy;  // keyed by quality name
  std::map<std::string, std::size_t> stratum_count;
  std::size_t count = 0;
};

struct LabelledPrediction {
  std::size_t truth = 0;
  std::size_t predicted = 0;
  SiteQuality quality = SiteQuality::kHigh;
};

EvalReport evaluate(std::span<const LabelledPrediction> predictions, const AdjacencyMap& adjacency);

nlohmann::json to_json(const EvalReport& r);
// Rebuilds a report written by to_json; derived rates are recomputed from the
// confusion matrix. Throws std::invalid_argument on malformed input.
EvalReport eval_report_from_json(const nlohmann::json& j, const AdjacencyMap& adjacency);
// Human-readable block.
std::string to_text(const EvalReport& r, const std::string& title);
// Machine-readable rows "metric,stratum,value" (no header).
std::string to_table_rows(const EvalReport& r, const std::string& prefix);

}  // namespace roadcond
