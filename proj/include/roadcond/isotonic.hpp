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
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "roadcond/domain.hpp"

namespace roadcond {

// Pool-adjacent-violators on a sequence already sorted by its abscissa:
// returns the nondecreasing sequence minimising sum w_i (y_i - f_i)^2.
// Throws std::invalid_argument on size mismatch or nonpositive weights.
std::vector<double> pava(std::span<const double> y, std::span<const double> w);

struct IsotonicPair {
  double score = 0.0;
  double outcome = 0.0;
  double weight = 1.0;
};

// Monotone map fitted by isotonic regression. Evaluation interpolates
// linearly between breakpoints and clamps outside [x_min, x_max].
class IsotonicCalibrator {
 public:
  IsotonicCalibrator() = default;  // unfitted
  // Throws std::invalid_argument unless x is strictly ascending, y is
  // nondecreasing and within [0,1], and both have the same nonzero length.
  IsotonicCalibrator(std::vector<double> x, std::vector<double> y);

  static IsotonicCalibrator identity();

  bool fitted() const { return !x_.empty(); }
  // Throws std::logic_error when unfitted.
  double operator()(double score) const;

  const std::vector<double>& breakpoints() const { return x_; }
  const std::vector<double>& values() const { return y_; }

  bool operator==(const IsotonicCalibrator&) const = default;

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

struct IsotonicFit {
  IsotonicCalibrator calibrator;
  // Fitted value for every input pair, in input order.
  std::vector<double> fitted;
};

// Pairs are sorted by score; pairs with equal scores are pooled first
// (weighted mean outcome, summed weight). Throws std::invalid_argument for
// fewer than two pairs.
IsotonicFit fit_isotonic(std::span<const IsotonicPair> pairs);

inline constexpr double kCalibrationFloor = 1e-6;

// One-vs-rest calibration: each entry goes through its class calibrator, is
// clamped to [1e-6, 1] and the vector is renormalised to sum 1.
// Throws std::logic_error if any calibrator is unfitted.
std::vector<double> calibrate(std::span<const IsotonicCalibrator> calibrators,
                              std::span<const double> raw);
ClassProbabilities calibrate(std::span<const IsotonicCalibrator> calibrators,
                             const ClassProbabilities& raw);

// Fits one calibrator per class from rows of predicted probabilities and
// the true class index of each row.
std::vector<IsotonicCalibrator> fit_class_calibrators(
    const std::vector<std::vector<double>>& predictions, std::span<const std::size_t> labels,
    std::size_t n_classes);

nlohmann::json to_json(const IsotonicCalibrator& c);
IsotonicCalibrator calibrator_from_json(const nlohmann::json& j);

// Two-column table ("score,calibrated") for inspection.
std::string calibrator_table(const IsotonicCalibrator& c);

}  // namespace roadcond
