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

// Decision-region geometry. A frame is tiled by square regions of r x r
// patches with r = window * downsample, so a downsampled region still fills
// whole attention windows. Regions are indexed row-major from the top-left.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgemix/box.hpp"
#include "edgemix/error.hpp"

namespace edgemix {

struct GridGeometry {
  int frame_width_px = 0;
  int frame_height_px = 0;
  int patch_px = 0;
  int window_patches = 0;
  int downsample_factor = 0;
  int region_patches = 0;
  int padded_width_px = 0;
  int padded_height_px = 0;
  int grid_cols = 0;
  int grid_rows = 0;
  int region_count = 0;

  int region_side_px() const noexcept { return region_patches * patch_px; }
  std::int64_t region_area_px() const noexcept {
    return static_cast<std::int64_t>(region_side_px()) * region_side_px();
  }
  std::int64_t padded_area_px() const noexcept {
    return static_cast<std::int64_t>(padded_width_px) * padded_height_px;
  }
  // Tokens of a region at full and at reduced resolution.
  std::int64_t full_region_tokens() const noexcept {
    return static_cast<std::int64_t>(region_patches) * region_patches;
  }
  std::int64_t downsampled_region_tokens() const noexcept {
    const std::int64_t side = region_patches / downsample_factor;
    return side * side;
  }

  Box region_box(int j) const {
    const int side = region_side_px();
    return Box{static_cast<double>((j % grid_cols) * side), static_cast<double>((j / grid_cols) * side),
               static_cast<double>(side), static_cast<double>(side)};
  }

  int region_of_pixel(int x, int y) const noexcept {
    const int side = region_side_px();
    return (y / side) * grid_cols + (x / side);
  }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

inline GridGeometry build_geometry(int frame_w, int frame_h, int patch_px, int window_patches,
                                   int downsample_factor) {
  if (frame_w < 1 || frame_h < 1 || patch_px < 1 || window_patches < 1 || downsample_factor < 1) {
    throw InvalidArgument("build_geometry: all dimensions must be >= 1");
  }
  GridGeometry g;
  g.frame_width_px = frame_w;
  g.frame_height_px = frame_h;
  g.patch_px = patch_px;
  g.window_patches = window_patches;
  g.downsample_factor = downsample_factor;
  g.region_patches = window_patches * downsample_factor;
  const int side = g.region_patches * patch_px;
  g.grid_cols = (frame_w + side - 1) / side;
  g.grid_rows = (frame_h + side - 1) / side;
  g.padded_width_px = g.grid_cols * side;
  g.padded_height_px = g.grid_rows * side;
  g.region_count = g.grid_cols * g.grid_rows;
  return g;
}

// 1080p, 16 px patches, 9x9 windows, d = 2.
inline GridGeometry default_geometry() { return build_geometry(1920, 1080, 16, 9, 2); }

enum class RegionType : std::uint8_t { kSbr = 0, kCmr = 1, kDor = 2 };

using RegionTypeMap = std::vector<RegionType>;

inline const char* region_type_name(RegionType t) noexcept {
  switch (t) {
    case RegionType::kSbr: return "SBR";
    case RegionType::kCmr: return "CMR";
    case RegionType::kDor: return "DOR";
  }
  return "?";
}

class DownsampleMask {
 public:
  DownsampleMask() = default;
  explicit DownsampleMask(std::size_t region_count) : bits_(region_count, 0) {}
  explicit DownsampleMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  std::size_t size() const noexcept { return bits_.size(); }
  bool test(std::size_t j) const { return bits_.at(j) != 0; }
  void set(std::size_t j, bool v = true) { bits_.at(j) = v ? 1 : 0; }

  // N_d
  int popcount() const noexcept {
    int n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  friend bool operator==(const DownsampleMask&, const DownsampleMask&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

inline void require_mask_matches(const GridGeometry& geom, const DownsampleMask& mask) {
  if (mask.size() != static_cast<std::size_t>(geom.region_count)) {
    throw InvalidArgument("mask length " + std::to_string(mask.size()) + " does not match region count " +
                          std::to_string(geom.region_count));
  }
}

// Whether tau_d targets a region type: 0 none, 1 CMRs, 2 CMRs and SBRs.
// DORs are never targeted.
constexpr bool downsample_targets(int tau_d, RegionType t) noexcept {
  switch (t) {
    case RegionType::kCmr: return tau_d >= 1;
    case RegionType::kSbr: return tau_d >= 2;
    case RegionType::kDor: return false;
  }
  return false;
}

inline DownsampleMask mask_from_types(std::span<const RegionType> type_map, int tau_d) {
  if (tau_d < 0 || tau_d > 2) throw InvalidArgument("tau_d must be 0, 1 or 2");
  DownsampleMask mask(type_map.size());
  for (std::size_t j = 0; j < type_map.size(); ++j) {
    if (downsample_targets(tau_d, type_map[j])) mask.set(j);
  }
  return mask;
}

inline std::int64_t token_count(const GridGeometry& geom, const DownsampleMask& mask) {
  require_mask_matches(geom, mask);
  const std::int64_t nd = mask.popcount();
  return (geom.region_count - nd) * geom.full_region_tokens() + nd * geom.downsampled_region_tokens();
}

inline std::int64_t mixed_pixel_count(const GridGeometry& geom, const DownsampleMask& mask) {
  require_mask_matches(geom, mask);
  const std::int64_t nd = mask.popcount();
  const std::int64_t low_side = geom.region_side_px() / geom.downsample_factor;
  return (geom.region_count - nd) * geom.region_area_px() + nd * low_side * low_side;
}

// Bitset packed MSB-first: region 0 is the top bit of byte 0.
inline std::vector<std::uint8_t> pack_mask(const DownsampleMask& mask) {
  std::vector<std::uint8_t> out((mask.size() + 7) / 8, 0);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask.test(j)) out[j / 8] |= static_cast<std::uint8_t>(0x80u >> (j % 8));
  }
  return out;
}

inline DownsampleMask unpack_mask(std::span<const std::uint8_t> bytes, std::size_t region_count) {
  if (bytes.size() != (region_count + 7) / 8) {
    throw ParseError("packed mask has " + std::to_string(bytes.size()) + " bytes, expected " +
                     std::to_string((region_count + 7) / 8));
  }
  DownsampleMask mask(region_count);
  for (std::size_t j = 0; j < region_count; ++j) {
    mask.set(j, (bytes[j / 8] & (0x80u >> (j % 8))) != 0);
  }
  return mask;
}

inline std::string mask_to_hex(const DownsampleMask& mask) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  for (auto byte : pack_mask(mask)) {
    s.push_back(kDigits[byte >> 4]);
    s.push_back(kDigits[byte & 0xF]);
  }
  return s;
}

}  // namespace edgemix
