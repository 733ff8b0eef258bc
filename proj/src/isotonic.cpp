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

#include "roadcond/isotonic.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "roadcond/ingest.hpp"

namespace roadcond {

std::vector<double> pava(std::span<const double> y, std::span<const double> w) {
  if (y.size() != w.size()) throw std::invalid_argument("pava: value/weight size mismatch");
  struct Block {
    double mean;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(w[i] > 0.0)) throw std::invalid_argument("pava: weights must be positive");
    blocks.push_back({y[i], w[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      const Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const double weight = prev.weight + top.weight;
      prev.mean = (prev.mean * prev.weight + top.mean * top.weight) / weight;
      prev.weight = weight;
      prev.count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.mean);
  return out;
}

IsotonicCalibrator::IsotonicCalibrator(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  if (x_.empty() || x_.size() != y_.size()) {
    throw std::invalid_argument("calibrator needs matching nonempty breakpoints and values");
  }
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (!(y_[i] >= 0.0 && y_[i] <= 1.0)) throw std::invalid_argument("calibrator value outside [0,1]");
    if (i > 0 && !(x_[i] > x_[i - 1])) throw std::invalid_argument("breakpoints not strictly ascending");
    if (i > 0 && y_[i] < y_[i - 1]) throw std::invalid_argument("calibrator values decrease");
  }
}

IsotonicCalibrator IsotonicCalibrator::identity() { return IsotonicCalibrator({0.0, 1.0}, {0.0, 1.0}); }

double IsotonicCalibrator::operator()(double score) const {
  if (!fitted()) throw std::logic_error("isotonic calibrator is not fitted");
  if (score <= x_.front()) return y_.front();
  if (score >= x_.back()) return y_.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), score) - x_.begin());
  const std::size_t lo = hi - 1;
  const double t = (score - x_[lo]) / (x_[hi] - x_[lo]);
  return y_[lo] + t * (y_[hi] - y_[lo]);
}

IsotonicFit fit_isotonic(std::span<const IsotonicPair> pairs) {
  if (pairs.size() < 2) throw std::invalid_argument("isotonic fit needs at least two pairs");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pairs[a].score < pairs[b].score; });

  std::vector<double> xs, ys, ws;
  std::vector<std::size_t> group_of(pairs.size());
  for (std::size_t idx : order) {
    const auto& p = pairs[idx];
    if (!(p.weight > 0.0)) throw std::invalid_argument("isotonic pair weight must be positive");
    if (xs.empty() || p.score != xs.back()) {
      xs.push_back(p.score);
      ys.push_back(p.outcome * p.weight);
      ws.push_back(p.weight);
    } else {
      ys.back() += p.outcome * p.weight;
      ws.back() += p.weight;
    }
    group_of[idx] = xs.size() - 1;
  }
  for (std::size_t g = 0; g < ys.size(); ++g) ys[g] /= ws[g];
  std::vector<double> fit = pava(ys, ws);
  for (double& v : fit) v = std::clamp(v, 0.0, 1.0);

  IsotonicFit out;
  out.fitted.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out.fitted[i] = fit[group_of[i]];
  out.calibrator = IsotonicCalibrator(std::move(xs), std::move(fit));
  return out;
}

std::vector<double> calibrate(std::span<const IsotonicCalibrator> calibrators,
                              std::span<const double> raw) {
  if (calibrators.size() != raw.size()) {
    throw std::invalid_argument("calibrator count does not match class count");
  }
  std::vector<double> out(raw.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < raw.size(); ++c) {
    out[c] = std::clamp(calibrators[c](raw[c]), kCalibrationFloor, 1.0);
    sum += out[c];
  }
  for (double& v : out) v /= sum;
  return out;
}

ClassProbabilities calibrate(std::span<const IsotonicCalibrator> calibrators,
                             const ClassProbabilities& raw) {
  const auto v = calibrate(calibrators, raw.span());
  std::array<double, kNumSurfaceClasses> p{};
  std::copy(v.begin(), v.end(), p.begin());
  return ClassProbabilities::normalized(p);
}

std::vector<IsotonicCalibrator> fit_class_calibrators(
    const std::vector<std::vector<double>>& predictions, std::span<const std::size_t> labels,
    std::size_t n_classes) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("prediction/label count mismatch");
  }
  std::vector<IsotonicCalibrator> out;
  std::vector<IsotonicPair> pairs(predictions.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      pairs[i] = {predictions[i].at(c), labels[i] == c ? 1.0 : 0.0, 1.0};
    }
    out.push_back(fit_isotonic(pairs).calibrator);
  }
  return out;
}

nlohmann::json to_json(const IsotonicCalibrator& c) {
  return nlohmann::json{{"x", c.breakpoints()}, {"y", c.values()}};
}

IsotonicCalibrator calibrator_from_json(const nlohmann::json& j) {
  return IsotonicCalibrator(j.at("x").get<std::vector<double>>(), j.at("y").get<std::vector<double>>());
}

std::string calibrator_table(const IsotonicCalibrator& c) {
  std::string out = "score,calibrated\n";
  for (std::size_t i = 0; i < c.breakpoints().size(); ++i) {
    out += format_double(c.breakpoints()[i]) + ',' + format_double(c.values()[i]) + '\n';
  }
  return out;
}

}  // namespace roadcond
