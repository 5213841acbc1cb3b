/*
 * Copyright 2026 The edgemix Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *       http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <tuple>
#include <vector>

#include "edgemix/box.hpp"
#include "edgemix/error.hpp"

namespace edgemix {

inline constexpr double kDefaultIouThreshold = 0.5;

struct MatchCounts {
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t truth = 0;

  double precision() const noexcept { return predicted ? static_cast<double>(matched) / predicted : 1.0; }
  double recall() const noexcept { return truth ? static_cast<double>(matched) / truth : 1.0; }
};

// One-to-one greedy matching in descending IoU order; ties broken by
// (predicted index, truth index).
inline MatchCounts match_boxes(std::span<const LabeledBox> predicted, std::span<const LabeledBox> truth,
                               double iou_threshold = kDefaultIouThreshold) {
  MatchCounts c{0, predicted.size(), truth.size()};
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const double v = iou(predicted[i].box, truth[j].box);
      if (v >= iou_threshold && v > 0.0) pairs.emplace_back(v, i, j);
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  std::vector<bool> used_p(predicted.size(), false), used_t(truth.size(), false);
  for (const auto& [v, i, j] : pairs) {
    if (used_p[i] || used_t[j]) continue;
    used_p[i] = used_t[j] = true;
    ++c.matched;
  }
  return c;
}

// 1 when both lists are empty, 0 when exactly one is.
inline double f1_match(std::span<const LabeledBox> predicted, std::span<const LabeledBox> truth,
                       double iou_threshold = kDefaultIouThreshold) {
  if (predicted.empty() && truth.empty()) return 1.0;
  if (predicted.empty() || truth.empty()) return 0.0;
  const auto c = match_boxes(predicted, truth, iou_threshold);
  return 2.0 * static_cast<double>(c.matched) / static_cast<double>(c.predicted + c.truth);
}

// Linear interpolation between order statistics (the common "type 7" rule).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw InvalidArgument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level must be in [0,1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

struct RegressionMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // percent, over samples with non-zero truth
  double r2 = 0.0;
};

inline RegressionMetrics regression_metrics(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.size() != predicted.size() || truth.empty()) {
    throw InvalidArgument("regression_metrics needs equal-length, non-empty samples");
  }
  const double n = static_cast<double>(truth.size());
  const double ybar = mean(truth);
  double abs = 0.0, sq = 0.0, ape = 0.0, tot = 0.0;
  std::size_t ape_n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = predicted[i] - truth[i];
    abs += std::abs(e);
    sq += e * e;
    tot += (truth[i] - ybar) * (truth[i] - ybar);
    if (std::abs(truth[i]) > 1e-9) {
      ape += std::abs(e / truth[i]);
      ++ape_n;
    }
  }
  RegressionMetrics m;
  m.mae = abs / n;
  m.rmse = std::sqrt(sq / n);
  m.mape = ape_n ? 100.0 * ape / static_cast<double>(ape_n) : 0.0;
  m.r2 = tot > 0.0 ? 1.0 - sq / tot : 0.0;
  return m;
}

}  // namespace edgemix
