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

// Offload configuration selection: Pareto frontier over (estimated latency,
// estimated accuracy), then the minimum-latency point when the client is in a
// hurry, otherwise the knee point.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "edgemix/error.hpp"
#include "edgemix/estimator.hpp"

namespace edgemix {

struct EvaluatedConfig {
  Configuration config;
  double latency_hat = 0.0;
  double accuracy_hat = 0.0;
  std::size_t index = 0;  // position in enumeration order
};

struct RuntimeState {
  int eta = 0;         // frames since the last offloaded frame
  double kappa = 1.0;  // tracking retention ratio
};

struct SelectionThresholds {
  int delta_eta = 30;
  double delta_kappa = 0.7;
};

enum class SelectionBranch { kSingleton, kUrgent, kKnee };

inline const char* branch_name(SelectionBranch b) noexcept {
  switch (b) {
    case SelectionBranch::kSingleton: return "singleton";
    case SelectionBranch::kUrgent: return "urgent";
    case SelectionBranch::kKnee: return "knee";
  }
  return "?";
}

// tau_d in {0,1,2} x lambda x beta, except tau_d = 0 pins beta to 0.
inline std::vector<Configuration> enumerate_candidates(std::span<const int> lambda_set, std::span<const int> beta_set,
                                                       std::span<const int> tau_set = std::array{0, 1, 2}) {
  if (lambda_set.empty() || beta_set.empty() || tau_set.empty()) {
    throw InvalidArgument("enumerate_candidates: empty candidate set");
  }
  std::vector<Configuration> out;
  for (int tau : tau_set) {
    if (tau == 0) {
      for (int q : lambda_set) out.push_back({0, q, 0});
      continue;
    }
    for (int q : lambda_set) {
      for (int b : beta_set) out.push_back({tau, q, b});
    }
  }
  for (const auto& c : out) validate(c);
  return out;
}

inline std::vector<Configuration> default_candidates() { return enumerate_candidates(kLambdaSet, kBetaSet); }

// Non-dominated set, sorted by latency ascending. Exact duplicates keep the
// earliest in enumeration order.
inline std::vector<EvaluatedConfig> pareto_frontier(std::span<const EvaluatedConfig> evaluated) {
  if (evaluated.empty()) throw InvalidArgument("pareto_frontier: empty input");
  std::vector<EvaluatedConfig> sorted(evaluated.begin(), evaluated.end());
  std::sort(sorted.begin(), sorted.end(), [](const EvaluatedConfig& a, const EvaluatedConfig& b) {
    if (a.latency_hat != b.latency_hat) return a.latency_hat < b.latency_hat;
    if (a.accuracy_hat != b.accuracy_hat) return a.accuracy_hat > b.accuracy_hat;
    return a.index < b.index;
  });
  std::vector<EvaluatedConfig> front;
  for (const auto& e : sorted) {
    if (front.empty() || e.accuracy_hat > front.back().accuracy_hat) front.push_back(e);
  }
  return front;
}

inline constexpr double kKneeTieEpsilon = 1e-12;

// Perpendicular distance of each min-max normalized point from the chord
// joining the two extremes; the farthest wins, ties toward lower latency.
inline EvaluatedConfig knee_point(std::span<const EvaluatedConfig> frontier) {
  if (frontier.size() < 2) throw InvalidArgument("knee_point: frontier needs at least two points");
  const auto& lo = frontier.front();
  const auto& hi = frontier.back();
  const double t_range = hi.latency_hat - lo.latency_hat;
  double a_min = frontier.front().accuracy_hat, a_max = a_min;
  for (const auto& e : frontier) {
    a_min = std::min(a_min, e.accuracy_hat);
    a_max = std::max(a_max, e.accuracy_hat);
  }
  const double a_range = a_max - a_min;
  auto norm = [&](const EvaluatedConfig& e) {
    const double t = t_range > 0 ? (e.latency_hat - lo.latency_hat) / t_range : 0.0;
    const double a = a_range > 0 ? (e.accuracy_hat - a_min) / a_range : 0.0;
    return std::pair{t, a};
  };
  const auto [x0, y0] = norm(lo);
  const auto [x1, y1] = norm(hi);
  const double dx = x1 - x0, dy = y1 - y0;
  const double len = std::hypot(dx, dy);
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < frontier.size(); ++i) {
    const auto [x, y] = norm(frontier[i]);
    const double d = len > 0 ? std::abs(dy * (x - x0) - dx * (y - y0)) / len : 0.0;
    if (d > best_d + kKneeTieEpsilon) {
      best_d = d;
      best = i;
    }
  }
  return frontier[best];
}

struct Selection {
  EvaluatedConfig chosen;
  SelectionBranch branch = SelectionBranch::kSingleton;
  std::vector<EvaluatedConfig> frontier;
};

inline Selection select_configuration(std::span<const EvaluatedConfig> evaluated, const RuntimeState& state,
                                      const SelectionThresholds& th = {}) {
  Selection s;
  s.frontier = pareto_frontier(evaluated);
  if (s.frontier.size() == 1) {
    s.chosen = s.frontier.front();
    s.branch = SelectionBranch::kSingleton;
  } else if (state.kappa < th.delta_kappa || state.eta > th.delta_eta) {
    s.chosen = s.frontier.front();  // frontier is sorted by latency
    s.branch = SelectionBranch::kUrgent;
  } else {
    s.chosen = knee_point(s.frontier);
    s.branch = SelectionBranch::kKnee;
  }
  return s;
}

}  // namespace edgemix
