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

// Region motion analysis and SBR / CMR / DOR classification.

#include <cmath>
#include <span>
#include <vector>

#include "edgemix/box.hpp"
#include "edgemix/error.hpp"
#include "edgemix/grid.hpp"

namespace edgemix {

struct MotionReport {
  std::vector<double> m;  // share of the frame's foreground in each region
  double m_frame = 0.0;   // foreground share of all padded pixels
};

struct RelevanceReport {
  std::vector<double> rho;  // share of objects overlapping each region
  double mean_rho = 0.0;
  double std_rho = 0.0;     // population std over all regions
};

inline MotionReport analyze_motion(std::span<const std::int64_t> foreground_px, const GridGeometry& geom) {
  if (foreground_px.size() != static_cast<std::size_t>(geom.region_count)) {
    throw InvalidArgument("analyze_motion: foreground vector does not match geometry");
  }
  MotionReport r;
  r.m.assign(foreground_px.size(), 0.0);
  std::int64_t total = 0;
  for (auto px : foreground_px) total += px;
  if (total > 0) {
    for (std::size_t j = 0; j < foreground_px.size(); ++j) {
      r.m[j] = static_cast<double>(foreground_px[j]) / static_cast<double>(total);
    }
  }
  r.m_frame = static_cast<double>(total) / static_cast<double>(geom.padded_area_px());
  return r;
}

inline RelevanceReport compute_relevance(std::span<const LabeledBox> boxes, const GridGeometry& geom) {
  RelevanceReport r;
  r.rho.assign(geom.region_count, 0.0);
  if (!boxes.empty()) {
    const double n = static_cast<double>(boxes.size());
    for (int j = 0; j < geom.region_count; ++j) {
      const Box region = geom.region_box(j);
      int hits = 0;
      for (const auto& b : boxes) hits += overlaps(b.box, region) ? 1 : 0;
      r.rho[j] = hits / n;
    }
  }
  double sum = 0.0;
  for (double v : r.rho) sum += v;
  r.mean_rho = sum / geom.region_count;
  double ss = 0.0;
  for (double v : r.rho) ss += (v - r.mean_rho) * (v - r.mean_rho);
  r.std_rho = std::sqrt(ss / geom.region_count);
  return r;
}

// SBR if m_j < delta_m; otherwise DOR if rho_j > delta_rho; otherwise CMR.
inline RegionTypeMap classify_regions(const MotionReport& motion, const RelevanceReport& relevance, double delta_m,
                                      double delta_rho) {
  if (motion.m.size() != relevance.rho.size()) {
    throw InvalidArgument("classify_regions: motion and relevance lengths differ");
  }
  RegionTypeMap types(motion.m.size());
  for (std::size_t j = 0; j < types.size(); ++j) {
    if (motion.m[j] < delta_m) {
      types[j] = RegionType::kSbr;
    } else if (relevance.rho[j] > delta_rho) {
      types[j] = RegionType::kDor;
    } else {
      types[j] = RegionType::kCmr;
    }
  }
  return types;
}

// m^d: summed motion of the regions a mask downsamples.
inline double masked_motion(const MotionReport& motion, const DownsampleMask& mask) {
  double s = 0.0;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask.test(j)) s += motion.m[j];
  }
  return s;
}

}  // namespace edgemix
