#pragma once

// Brute-force references for the selection algorithm, shared by the unit
// tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "edgemix/optimizer.hpp"

namespace edgemix::oracle {

inline EvaluatedConfig ec(double t, double a, std::size_t i) { return {Configuration{2, 95, static_cast<int>(i % 5)}, t, a, i}; }

// O(n^2) dominance filter; exact duplicates keep the lowest index.
inline std::vector<EvaluatedConfig> brute_frontier(const std::vector<EvaluatedConfig>& z) {
  std::vector<EvaluatedConfig> out;
  for (const auto& a : z) {
    bool dominated = false;
    for (const auto& b : z) {
      const bool dom = b.latency_hat <= a.latency_hat && b.accuracy_hat >= a.accuracy_hat &&
                       (b.latency_hat < a.latency_hat || b.accuracy_hat > a.accuracy_hat);
      const bool dup_first = b.latency_hat == a.latency_hat && b.accuracy_hat == a.accuracy_hat && b.index < a.index;
      if (dom || dup_first) {
        dominated = true;
        break;
      }
    }
    if (!dominated) out.push_back(a);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.latency_hat < y.latency_hat; });
  return out;
}

inline std::size_t brute_knee(const std::vector<EvaluatedConfig>& f) {
  const double t0 = f.front().latency_hat, t1 = f.back().latency_hat;
  double amin = 1e300, amax = -1e300;
  for (const auto& e : f) {
    amin = std::min(amin, e.accuracy_hat);
    amax = std::max(amax, e.accuracy_hat);
  }
  auto nx = [&](const EvaluatedConfig& e) { return t1 > t0 ? (e.latency_hat - t0) / (t1 - t0) : 0.0; };
  auto ny = [&](const EvaluatedConfig& e) { return amax > amin ? (e.accuracy_hat - amin) / (amax - amin) : 0.0; };
  const double ax = nx(f.front()), ay = ny(f.front()), bx = nx(f.back()), by = ny(f.back());
  std::vector<double> d;
  for (const auto& e : f) {
    const double px = nx(e) - ax, py = ny(e) - ay, cx = bx - ax, cy = by - ay;
    const double len2 = cx * cx + cy * cy;
    if (len2 == 0) {
      d.push_back(0.0);
      continue;
    }
    // distance from the projection onto the chord
    const double s = (px * cx + py * cy) / len2;
    d.push_back(std::hypot(px - s * cx, py - s * cy));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (d[i] > d[best] + 1e-12) best = i;
  }
  return best;
}

inline EvaluatedConfig brute_select(const std::vector<EvaluatedConfig>& z, int eta, double kappa) {
  const auto f = brute_frontier(z);
  if (f.size() == 1) return f[0];
  if (kappa < 0.7 || eta > 30) return f[0];
  return f[brute_knee(f)];
}

inline std::vector<EvaluatedConfig> random_instance(std::mt19937_64& rng, bool coarse) {
  std::uniform_int_distribution<int> size(1, 20);
  const int n = size(rng);
  std::vector<EvaluatedConfig> z;
  for (int i = 0; i < n; ++i) {
    double t, a;
    if (coarse) {
      t = 50.0 + 10.0 * static_cast<double>(rng() % 8);
      a = 0.1 * static_cast<double>(rng() % 8);
    } else {
      t = std::uniform_real_distribution<double>(20.0, 500.0)(rng);
      a = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }
    z.push_back(ec(t, a, static_cast<std::size_t>(i)));
  }
  return z;
}

inline bool same(const EvaluatedConfig& a, const EvaluatedConfig& b) {
  return a.index == b.index && a.latency_hat == b.latency_hat && a.accuracy_hat == b.accuracy_hat &&
         a.config == b.config;
}

}  // namespace edgemix::oracle
