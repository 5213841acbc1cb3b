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

// Synthetic camera feed. Objects move on straight lines plus a piecewise
// constant camera pan; per-region foreground pixel counts are computed
// analytically from object boxes (moving objects) and from high-texture
// scenery whose apparent motion scales with the pan speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgemix/box.hpp"
#include "edgemix/error.hpp"
#include "edgemix/grid.hpp"
#include "edgemix/rng.hpp"

namespace edgemix {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

struct PanSegment {
  int start_frame = 0;
  double dx = 0.0;  // px/frame
  double dy = 0.0;
  friend bool operator==(const PanSegment&, const PanSegment&) = default;
};

// Parameters of the generated pan schedule.
struct PanProfile {
  double max_speed = 0.0;  // px/frame
  int segment_min_frames = 60;
  int segment_max_frames = 150;
  double still_fraction = 0.3;  // share of segments with no pan
  double vertical_ratio = 0.25;
  friend bool operator==(const PanProfile&, const PanProfile&) = default;
};

struct SceneConfig {
  std::string scene_id = "custom";
  std::uint64_t seed = 1;
  int duration_frames = 1800;
  double fps = 30.0;
  int object_count = 6;
  Range object_speed{0.5, 2.0};  // px/frame, own motion
  Range object_size{40.0, 160.0};
  PanProfile camera_pan;
  std::vector<PanSegment> pan_schedule;  // explicit schedule; generated from camera_pan when empty
  double spawn_despawn_rate = 0.004;     // per object per frame
  double clutter_density = 0.3;          // share of regions with high-texture scenery
  double object_fill = 0.85;             // share of an object's pixels flagged as moving
  double clutter_fill = 0.35;            // share of a clutter region flagged at saturating pan
  double pan_saturation = 6.0;           // px/frame

  friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

inline void validate(const SceneConfig& c) {
  auto bad = [](const std::string& what) { throw InvalidArgument("SceneConfig: " + what); };
  if (!(c.fps > 0.0)) bad("fps must be > 0");
  if (c.duration_frames < 1) bad("duration_frames must be >= 1");
  if (c.object_count < 0) bad("object_count must be >= 0");
  if (c.object_speed.lo < 0 || c.object_speed.hi < c.object_speed.lo) bad("object_speed_range");
  if (c.object_size.lo <= 0 || c.object_size.hi < c.object_size.lo) bad("object_size_range");
  if (c.camera_pan.max_speed < 0) bad("camera_pan.max_speed must be >= 0");
  if (c.camera_pan.segment_min_frames < 1 || c.camera_pan.segment_max_frames < c.camera_pan.segment_min_frames) {
    bad("camera_pan segment lengths");
  }
  auto prob = [&](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) bad(std::string(name) + " must be in [0,1]");
  };
  prob(c.spawn_despawn_rate, "spawn_despawn_rate");
  prob(c.clutter_density, "clutter_density");
  prob(c.camera_pan.still_fraction, "camera_pan.still_fraction");
  prob(c.object_fill, "object_fill");
  prob(c.clutter_fill, "clutter_fill");
  if (!(c.pan_saturation > 0)) bad("pan_saturation must be > 0");
}

struct FrameTruth {
  int frame_id = 0;
  BoxList boxes;                           // clipped to the padded frame, sorted by id
  std::vector<std::int64_t> foreground_px; // per region
  std::int64_t total_fg_px = 0;
  double pan_dx = 0.0;                     // camera pan applied from this frame to the next
  double pan_dy = 0.0;

  friend bool operator==(const FrameTruth&, const FrameTruth&) = default;
};

inline const BoxList& ground_truth_boxes(const FrameTruth& truth) noexcept { return truth.boxes; }

// Expands the pan profile into explicit segments covering [0, duration).
inline std::vector<PanSegment> make_pan_schedule(const SceneConfig& cfg) {
  if (!cfg.pan_schedule.empty()) return cfg.pan_schedule;
  SeqRng rng(hash_mix({cfg.seed, hash_name("pan")}));
  std::vector<PanSegment> out;
  int f = 0;
  while (f < cfg.duration_frames) {
    PanSegment s;
    s.start_frame = f;
    if (cfg.camera_pan.max_speed > 0.0 && !rng.bernoulli(cfg.camera_pan.still_fraction)) {
      const double speed = cfg.camera_pan.max_speed * rng.uniform(0.3, 1.0);
      s.dx = rng.bernoulli(0.5) ? speed : -speed;
      s.dy = speed * cfg.camera_pan.vertical_ratio * rng.uniform(-1.0, 1.0);
    }
    out.push_back(s);
    f += rng.uniform_int(cfg.camera_pan.segment_min_frames, cfg.camera_pan.segment_max_frames);
  }
  return out;
}

namespace detail {

struct LiveObject {
  std::uint32_t id;
  Box box;  // unclipped
  double vx;
  double vy;
};

inline LiveObject spawn_object(SeqRng& rng, const SceneConfig& cfg, const GridGeometry& geom, std::uint32_t id) {
  LiveObject o;
  o.id = id;
  const double w = rng.uniform(cfg.object_size.lo, cfg.object_size.hi);
  const double h = rng.uniform(cfg.object_size.lo, cfg.object_size.hi);
  const double max_x = std::max(0.0, geom.padded_width_px - w);
  const double max_y = std::max(0.0, geom.padded_height_px - h);
  o.box = Box{rng.uniform(0.0, max_x), rng.uniform(0.0, max_y), w, h};
  const double speed = rng.uniform(cfg.object_speed.lo, cfg.object_speed.hi);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  o.vx = speed * std::cos(angle);
  o.vy = 0.4 * speed * std::sin(angle);
  return o;
}

inline std::size_t segment_at(const std::vector<PanSegment>& sched, int frame) {
  std::size_t k = 0;
  while (k + 1 < sched.size() && sched[k + 1].start_frame <= frame) ++k;
  return k;
}

}  // namespace detail

// Per-region clutter level in [0,1] for a pan segment. Scenery is redrawn
// for every segment since the camera has moved on.
inline std::vector<double> clutter_levels(const SceneConfig& cfg, const GridGeometry& geom, std::size_t segment) {
  std::vector<double> lv(geom.region_count, 0.0);
  SeqRng rng(hash_mix({cfg.seed, hash_name("clutter"), segment}));
  for (auto& v : lv) {
    if (rng.bernoulli(cfg.clutter_density)) v = rng.uniform(0.5, 1.0);
  }
  return lv;
}

inline std::vector<FrameTruth> generate_truth(const SceneConfig& cfg, const GridGeometry& geom) {
  validate(cfg);
  const auto sched = make_pan_schedule(cfg);
  SeqRng rng(hash_mix({cfg.seed, hash_name("objects")}));
  const double fw = geom.padded_width_px;
  const double fh = geom.padded_height_px;
  const double respawn_p = std::min(1.0, std::max(0.02, 10.0 * cfg.spawn_despawn_rate));

  std::uint32_t next_id = 1;
  std::vector<std::optional<detail::LiveObject>> slots(cfg.object_count);
  for (auto& s : slots) s = detail::spawn_object(rng, cfg, geom, next_id++);

  std::vector<FrameTruth> frames;
  frames.reserve(cfg.duration_frames);
  std::size_t cached_seg = static_cast<std::size_t>(-1);
  std::vector<double> clutter;

  for (int f = 0; f < cfg.duration_frames; ++f) {
    const std::size_t seg = detail::segment_at(sched, f);
    if (seg != cached_seg) {
      clutter = clutter_levels(cfg, geom, seg);
      cached_seg = seg;
    }
    const PanSegment& pan = sched[seg];

    FrameTruth t;
    t.frame_id = f;
    t.pan_dx = pan.dx;
    t.pan_dy = pan.dy;
    t.foreground_px.assign(geom.region_count, 0);

    std::vector<double> fg(geom.region_count, 0.0);
    for (const auto& s : slots) {
      if (!s) continue;
      auto clipped = clip_box(s->box, fw, fh);
      if (!clipped) continue;
      t.boxes.push_back({s->id, *clipped});
      for (int j = 0; j < geom.region_count; ++j) {
        fg[j] += cfg.object_fill * intersection_area(*clipped, geom.region_box(j));
      }
    }
    std::sort(t.boxes.begin(), t.boxes.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    const double pan_speed = std::hypot(pan.dx, pan.dy);
    const double pan_share = std::min(1.0, pan_speed / cfg.pan_saturation);
    const double area = static_cast<double>(geom.region_area_px());
    for (int j = 0; j < geom.region_count; ++j) {
      fg[j] += cfg.clutter_fill * clutter[j] * pan_share * area;
      const auto px = static_cast<std::int64_t>(std::llround(std::min(fg[j], area)));
      t.foreground_px[j] = px;
      t.total_fg_px += px;
    }
    frames.push_back(std::move(t));

    // Advance to the next frame: move, retire, respawn.
    for (auto& s : slots) {
      if (s) {
        s->box = s->box.shifted(s->vx + pan.dx, s->vy + pan.dy);
        if (!clip_box(s->box, fw, fh) || rng.bernoulli(cfg.spawn_despawn_rate)) s.reset();
      } else if (rng.bernoulli(respawn_p)) {
        s = detail::spawn_object(rng, cfg, geom, next_id++);
      }
    }
  }
  return frames;
}

// Five presets standing in for low/high camera motion and sparse/dense
// object scenes. Parameters are calibration knobs, not measured statistics.
inline std::vector<std::string> preset_ids() { return {"walkS", "walkR", "walkB", "cycleS", "driveN"}; }

inline SceneConfig scene_preset(const std::string& id) {
  SceneConfig c;
  c.scene_id = id;
  if (id == "walkS") {
    c.object_count = 4;
    c.object_speed = {0.5, 2.0};
    c.object_size = {60.0, 180.0};
    c.camera_pan = {3.0, 20, 60, 0.25, 0.25};
    c.spawn_despawn_rate = 0.006;
    c.clutter_density = 0.3;
  } else if (id == "walkR") {
    c.object_count = 7;
    c.object_speed = {0.5, 2.5};
    c.object_size = {50.0, 170.0};
    c.camera_pan = {3.5, 20, 60, 0.25, 0.25};
    c.spawn_despawn_rate = 0.0075;
    c.clutter_density = 0.45;
  } else if (id == "walkB") {
    c.object_count = 10;
    c.object_speed = {0.5, 2.0};
    c.object_size = {60.0, 200.0};
    c.camera_pan = {3.0, 20, 60, 0.3, 0.2};
    c.spawn_despawn_rate = 0.009;
    c.clutter_density = 0.5;
  } else if (id == "cycleS") {
    c.object_count = 6;
    c.object_speed = {1.0, 4.0};
    c.object_size = {50.0, 180.0};
    c.camera_pan = {8.0, 15, 45, 0.1, 0.3};
    c.spawn_despawn_rate = 0.009;
    c.clutter_density = 0.45;
  } else if (id == "driveN") {
    c.object_count = 8;
    c.object_speed = {1.0, 5.0};
    c.object_size = {50.0, 200.0};
    c.camera_pan = {10.0, 15, 45, 0.1, 0.2};
    c.spawn_despawn_rate = 0.012;
    c.clutter_density = 0.35;
  } else {
    throw ConfigError("unknown scene preset '" + id + "'");
  }
  return c;
}

// JSON schema (all keys optional except scene_id when loading a preset):
// { "scene_id": str, "seed": int, "duration_frames": int, "fps": num,
//   "object_count": int, "object_speed_range": [lo, hi], "object_size_range": [lo, hi],
//   "camera_pan": {"max_speed", "segment_min_frames", "segment_max_frames",
//                  "still_fraction", "vertical_ratio"},
//   "pan_schedule": [[start_frame, dx, dy], ...],
//   "spawn_despawn_rate": p, "clutter_density": p,
//   "object_fill": p, "clutter_fill": p, "pan_saturation": num }
inline nlohmann::json to_json(const SceneConfig& c) {
  nlohmann::json j;
  j["scene_id"] = c.scene_id;
  j["seed"] = c.seed;
  j["duration_frames"] = c.duration_frames;
  j["fps"] = c.fps;
  j["object_count"] = c.object_count;
  j["object_speed_range"] = {c.object_speed.lo, c.object_speed.hi};
  j["object_size_range"] = {c.object_size.lo, c.object_size.hi};
  j["camera_pan"] = {{"max_speed", c.camera_pan.max_speed},
                     {"segment_min_frames", c.camera_pan.segment_min_frames},
                     {"segment_max_frames", c.camera_pan.segment_max_frames},
                     {"still_fraction", c.camera_pan.still_fraction},
                     {"vertical_ratio", c.camera_pan.vertical_ratio}};
  auto sched = nlohmann::json::array();
  for (const auto& s : c.pan_schedule) sched.push_back({s.start_frame, s.dx, s.dy});
  j["pan_schedule"] = sched;
  j["spawn_despawn_rate"] = c.spawn_despawn_rate;
  j["clutter_density"] = c.clutter_density;
  j["object_fill"] = c.object_fill;
  j["clutter_fill"] = c.clutter_fill;
  j["pan_saturation"] = c.pan_saturation;
  return j;
}

// Keys present in `j` override `base`; "scene_id" naming a built-in preset
// selects it as the base.
inline SceneConfig scene_config_from_json(const nlohmann::json& j) {
  try {
    SceneConfig c;
    if (j.contains("scene_id")) {
      const auto id = j.at("scene_id").get<std::string>();
      const auto ids = preset_ids();
      c = std::find(ids.begin(), ids.end(), id) != ids.end() ? scene_preset(id) : SceneConfig{};
      c.scene_id = id;
    }
    auto range = [&](const char* key, Range& r) {
      if (j.contains(key)) r = {j.at(key).at(0).get<double>(), j.at(key).at(1).get<double>()};
    };
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("duration_frames")) c.duration_frames = j.at("duration_frames").get<int>();
    if (j.contains("fps")) c.fps = j.at("fps").get<double>();
    if (j.contains("object_count")) c.object_count = j.at("object_count").get<int>();
    range("object_speed_range", c.object_speed);
    range("object_size_range", c.object_size);
    if (j.contains("camera_pan")) {
      const auto& p = j.at("camera_pan");
      c.camera_pan.max_speed = p.value("max_speed", c.camera_pan.max_speed);
      c.camera_pan.segment_min_frames = p.value("segment_min_frames", c.camera_pan.segment_min_frames);
      c.camera_pan.segment_max_frames = p.value("segment_max_frames", c.camera_pan.segment_max_frames);
      c.camera_pan.still_fraction = p.value("still_fraction", c.camera_pan.still_fraction);
      c.camera_pan.vertical_ratio = p.value("vertical_ratio", c.camera_pan.vertical_ratio);
    }
    if (j.contains("pan_schedule")) {
      c.pan_schedule.clear();
      for (const auto& s : j.at("pan_schedule")) {
        c.pan_schedule.push_back({s.at(0).get<int>(), s.at(1).get<double>(), s.at(2).get<double>()});
      }
    }
    c.spawn_despawn_rate = j.value("spawn_despawn_rate", c.spawn_despawn_rate);
    c.clutter_density = j.value("clutter_density", c.clutter_density);
    c.object_fill = j.value("object_fill", c.object_fill);
    c.clutter_fill = j.value("clutter_fill", c.clutter_fill);
    c.pan_saturation = j.value("pan_saturation", c.pan_saturation);
    validate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace edgemix
