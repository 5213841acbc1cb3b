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
#include <cstdint>
#include <optional>
#include <vector>

namespace edgemix {

// Axis-aligned box, top-left origin, in padded-frame pixels.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }
  double area() const noexcept { return w * h; }
  double cx() const noexcept { return x + 0.5 * w; }
  double cy() const noexcept { return y + 0.5 * h; }

  Box shifted(double dx, double dy) const noexcept { return {x + dx, y + dy, w, h}; }

  friend bool operator==(const Box&, const Box&) = default;
};

struct LabeledBox {
  std::uint32_t id = 0;
  Box box;

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

using BoxList = std::vector<LabeledBox>;

inline double intersection_area(const Box& a, const Box& b) noexcept {
  const double w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

inline double iou(const Box& a, const Box& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

// Positive-area overlap ("partially or fully overlap").
inline bool overlaps(const Box& a, const Box& b) noexcept { return intersection_area(a, b) > 0.0; }

// Clip to [0, width) x [0, height); nullopt when nothing remains.
inline std::optional<Box> clip_box(const Box& b, double width, double height) noexcept {
  const double x0 = std::max(b.x, 0.0);
  const double y0 = std::max(b.y, 0.0);
  const double x1 = std::min(b.right(), width);
  const double y1 = std::min(b.bottom(), height);
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  return Box{x0, y0, x1 - x0, y1 - y0};
}

}  // namespace edgemix
