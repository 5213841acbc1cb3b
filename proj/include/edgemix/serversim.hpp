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

// Analytic edge server. Stands in for the JPEG codec and the mixed-resolution
// detector: ground-truth payload size, decode and inference delays, the
// inference accuracy surface, and detection results that realize it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgemix/box.hpp"
#include "edgemix/error.hpp"
#include "edgemix/estimator.hpp"
#include "edgemix/grid.hpp"
#include "edgemix/motion.hpp"
#include "edgemix/rng.hpp"
#include "edgemix/scene.hpp"

namespace edgemix {

// How the device prepared the frame.
//   kMixed:   mask bits mark regions sent at 1/d resolution
//   kMasked:  mask bits mark regions blacked out (region-of-interest coding)
//   kUniform: whole frame downsampled by d, mask is all ones
enum class FrameMode : std::uint8_t { kMixed = 0, kMasked = 1, kUniform = 2 };

inline const char* frame_mode_name(FrameMode m) noexcept {
  switch (m) {
    case FrameMode::kMixed: return "mixed";
    case FrameMode::kMasked: return "masked";
    case FrameMode::kUniform: return "uniform";
  }
  return "?";
}

struct OffloadPlan {
  Configuration config;
  FrameMode mode = FrameMode::kMixed;
  DownsampleMask mask;

  int nd() const noexcept { return mask.popcount(); }
};

inline OffloadPlan full_resolution_plan(const GridGeometry& geom, int lambda_q) {
  return {{0, lambda_q, 0}, FrameMode::kMixed, DownsampleMask(geom.region_count)};
}

inline OffloadPlan uniform_plan(const GridGeometry& geom, int lambda_q) {
  DownsampleMask all(geom.region_count);
  for (int j = 0; j < geom.region_count; ++j) all.set(j);
  return {{0, lambda_q, 0}, FrameMode::kUniform, std::move(all)};
}

inline void validate_plan(const OffloadPlan& p, const GridGeometry& geom) {
  validate(p.config);
  require_mask_matches(geom, p.mask);
  if (p.mode == FrameMode::kMixed && p.config.tau_d == 0 && p.nd() != 0) {
    throw InvalidArgument("tau_d = 0 with a non-empty downsampling mask");
  }
  if (p.mode == FrameMode::kUniform && p.nd() != geom.region_count) {
    throw InvalidArgument("uniform downsampling needs an all-ones mask");
  }
}

struct ServerProfile {
  // Decode: dec_base + dec_per_frame * decoded pixel share.
  double dec_base_ms = 2.0;
  double dec_per_frame_ms = 8.0;
  double dec_noise = 0.04;

  // Mixed-resolution inference per restoration point: a + b * N_d.
  std::array<LinearDelay, kBetaCount> inference{{{281.0, 0.0},
                                                 {282.5, -1.6375},
                                                 {284.0, -3.275},
                                                 {285.5, -4.9125},
                                                 {287.0, -6.55}}};
  double inference_noise = 0.03;
  // Uniform-resolution inference, affine in the patch count; passes through
  // 39 ms at 640x360 and 281 ms at 1920x1080.
  double uniform_floor_ms = 39.0 - 920.0 * (242.0 / 7240.0);
  double uniform_ms_per_token = 242.0 / 7240.0;

  // Size: kib_per_mpx * effective Mpx * q(lambda) * (1 + texture_gain * texture) * noise,
  // q(lambda) = 1 / (1 + quality_alpha * (100 - lambda)).
  double size_kib_per_mpx = 140.0;
  double quality_alpha = 0.226;
  double texture_gain = 12.0;  // texture is the foreground share of encoded pixels
  double masked_pixel_weight = 0.02;
  double size_noise = 0.05;

  // Accuracy: 1 - k_lambda (100 - lambda)/30 - k_d (ov_ds g(beta) + ov_mask g_mask).
  double k_lambda = 0.28;
  double k_d = 1.0;
  std::array<double, kBetaCount> g_beta{0.08, 0.16, 0.26, 0.38, 0.52};
  double g_mask = 0.3;
  double g_uniform = 0.5;

  // Share of failed detections that are misses rather than mislocalized boxes.
  double miss_share = 0.5;

  // Box jitter as a share of box size.
  double jitter_base = 0.015;
  double jitter_gain = 0.03;
  double jitter_cap = 0.08;

  std::uint64_t seed = 7;
};

inline void validate(const ServerProfile& p) {
  auto bad = [](const char* what) { throw InvalidArgument(std::string("ServerProfile: ") + what); };
  if (p.dec_base_ms < 0 || p.dec_per_frame_ms < 0) bad("decode delays must be >= 0");
  for (const auto& l : p.inference) {
    if (l.intercept < 0) bad("inference intercepts must be >= 0");
    if (l.slope > 0) bad("inference slopes must be <= 0");
  }
  if (p.size_kib_per_mpx <= 0 || p.quality_alpha < 0) bad("size model");
  if (p.k_lambda < 0 || p.k_d < 0) bad("accuracy penalties must be >= 0");
  for (std::size_t b = 1; b < p.g_beta.size(); ++b) {
    if (p.g_beta[b] < p.g_beta[b - 1]) bad("g(beta) must be non-decreasing");
  }
  if (p.miss_share < 0 || p.miss_share > 1) bad("miss_share must be in [0,1]");
  if (p.jitter_cap < 0 || p.jitter_cap > 0.15) bad("jitter_cap must be in [0, 0.15]");
}

inline double quality_factor(const ServerProfile& p, int lambda_q) {
  return 1.0 / (1.0 + p.quality_alpha * (100.0 - lambda_q));
}

namespace detail {

inline std::uint64_t plan_key(const OffloadPlan& p) {
  std::uint64_t h = hash_mix({static_cast<std::uint64_t>(p.mode), static_cast<std::uint64_t>(p.config.tau_d),
                              static_cast<std::uint64_t>(p.config.lambda_q), static_cast<std::uint64_t>(p.config.beta)});
  for (auto b : pack_mask(p.mask)) h = hash_mix({h, b});
  return h;
}

}  // namespace detail

enum class RegionCoding : std::uint8_t { kFull, kDownsampled, kMasked };

inline RegionCoding region_coding(const OffloadPlan& p, std::size_t j) {
  if (!p.mask.test(j)) return RegionCoding::kFull;
  return p.mode == FrameMode::kMasked ? RegionCoding::kMasked : RegionCoding::kDownsampled;
}

// Encoded pixel share relative to the full padded frame.
inline double encoded_pixel_share(const OffloadPlan& p, const GridGeometry& geom, double masked_weight) {
  const double low = 1.0 / (geom.downsample_factor * geom.downsample_factor);
  double s = 0.0;
  for (std::size_t j = 0; j < p.mask.size(); ++j) {
    switch (region_coding(p, j)) {
      case RegionCoding::kFull: s += 1.0; break;
      case RegionCoding::kDownsampled: s += low; break;
      case RegionCoding::kMasked: s += masked_weight; break;
    }
  }
  return s / static_cast<double>(geom.region_count);
}

// Foreground (high-frequency) share of the encoded pixels. Low-resolution
// and blacked-out regions keep only their reduced pixel count.
inline double texture_level(const ServerProfile& p, const OffloadPlan& plan, const FrameTruth& truth,
                            const GridGeometry& geom) {
  const double low = 1.0 / (geom.downsample_factor * geom.downsample_factor);
  const double area = static_cast<double>(geom.region_area_px());
  double textured = 0.0, pixels = 0.0;
  for (std::size_t j = 0; j < plan.mask.size(); ++j) {
    double w = 1.0;
    switch (region_coding(plan, j)) {
      case RegionCoding::kFull: break;
      case RegionCoding::kDownsampled: w = low; break;
      case RegionCoding::kMasked: w = p.masked_pixel_weight; break;
    }
    textured += w * static_cast<double>(truth.foreground_px[j]);
    pixels += w * area;
  }
  return pixels > 0 ? textured / pixels : 0.0;
}

// Payload size in KiB, quantized to 0.1 KiB as carried on the wire.
inline double true_size(const ServerProfile& p, const OffloadPlan& plan, const FrameTruth& truth,
                        const GridGeometry& geom) {
  validate_plan(plan, geom);
  if (truth.foreground_px.size() != plan.mask.size()) throw InvalidArgument("true_size: frame/grid mismatch");
  const double mpx = static_cast<double>(geom.padded_area_px()) / 1e6 *
                     encoded_pixel_share(plan, geom, p.masked_pixel_weight);
  const double tex = texture_level(p, plan, truth, geom);
  const CounterRng rng(hash_mix({p.seed, hash_name("size"), static_cast<std::uint64_t>(truth.frame_id)}));
  // Noise depends on the frame only.
  const double noise = 1.0 + p.size_noise * rng.clipped_normal(0, 3.0);
  const double kib =
      p.size_kib_per_mpx * mpx * quality_factor(p, plan.config.lambda_q) * (1.0 + p.texture_gain * tex) * noise;
  return std::max(0.1, std::round(kib * 10.0) / 10.0);
}

inline double decode_ms(const ServerProfile& p, const OffloadPlan& plan, const GridGeometry& geom, int frame_id) {
  // Blacked-out blocks decode cheaply but still occupy the frame.
  const double share = encoded_pixel_share(plan, geom, 0.15);
  const CounterRng rng(hash_mix({p.seed, hash_name("decode"), static_cast<std::uint64_t>(frame_id)}));
  const double noise = 1.0 + p.dec_noise * rng.clipped_normal(detail::plan_key(plan), 3.0);
  return (p.dec_base_ms + p.dec_per_frame_ms * share) * noise;
}

// Patch count of the frame at 1/d resolution, or full resolution for d = 1.
inline std::int64_t uniform_patch_count(const GridGeometry& geom, int factor) {
  const std::int64_t w = (geom.frame_width_px / factor + geom.patch_px - 1) / geom.patch_px;
  const std::int64_t h = (geom.frame_height_px / factor + geom.patch_px - 1) / geom.patch_px;
  return w * h;
}

inline double uniform_inference_ms(const ServerProfile& p, std::int64_t patches) {
  return p.uniform_floor_ms + p.uniform_ms_per_token * static_cast<double>(patches);
}

// Noise-free inference delay of a plan.
inline double mean_inference_ms(const ServerProfile& p, const OffloadPlan& plan, const GridGeometry& geom) {
  switch (plan.mode) {
    case FrameMode::kMixed: {
      const auto& l = p.inference[plan.config.beta];
      return l.intercept + l.slope * plan.nd();
    }
    case FrameMode::kMasked: return p.inference[0].intercept;
    case FrameMode::kUniform: return uniform_inference_ms(p, uniform_patch_count(geom, geom.downsample_factor));
  }
  return 0.0;
}

// Sampled inference delay, quantized to whole microseconds.
inline double inference_ms(const ServerProfile& p, const OffloadPlan& plan, const GridGeometry& geom, int frame_id) {
  const CounterRng rng(hash_mix({p.seed, hash_name("inference"), static_cast<std::uint64_t>(frame_id)}));
  const double noise = 1.0 + p.inference_noise * rng.clipped_normal(detail::plan_key(plan), 3.0);
  const double ms = std::max(0.0, mean_inference_ms(p, plan, geom) * noise);
  return std::round(ms * 1000.0) / 1000.0;
}

struct ObjectExposure {
  double downsampled_share = 0.0;  // of this object's area
  double masked_share = 0.0;
};

inline std::vector<ObjectExposure> object_exposure(const OffloadPlan& plan, const BoxList& boxes,
                                                   const GridGeometry& geom) {
  std::vector<ObjectExposure> out(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double area = boxes[i].box.area();
    if (area <= 0) continue;
    for (int j = 0; j < geom.region_count; ++j) {
      const RegionCoding rc = region_coding(plan, static_cast<std::size_t>(j));
      if (rc == RegionCoding::kFull) continue;
      const double a = intersection_area(boxes[i].box, geom.region_box(j)) / area;
      (rc == RegionCoding::kMasked ? out[i].masked_share : out[i].downsampled_share) += a;
    }
  }
  return out;
}

struct AccuracyTerms {
  double quality_penalty = 0.0;
  double overlap_downsampled = 0.0;  // share of total object area
  double overlap_masked = 0.0;
  double resolution_weight = 0.0;    // g for downsampled area
  double accuracy = 1.0;
};

inline AccuracyTerms accuracy_terms(const ServerProfile& p, const OffloadPlan& plan, const FrameTruth& truth,
                                    const GridGeometry& geom) {
  AccuracyTerms t;
  t.quality_penalty = p.k_lambda * (100.0 - plan.config.lambda_q) / 30.0;
  t.resolution_weight = plan.mode == FrameMode::kUniform ? p.g_uniform : p.g_beta[plan.config.beta];
  double total = 0.0, ds = 0.0, masked = 0.0;
  const auto exposure = object_exposure(plan, truth.boxes, geom);
  for (std::size_t i = 0; i < truth.boxes.size(); ++i) {
    const double a = truth.boxes[i].box.area();
    total += a;
    ds += a * exposure[i].downsampled_share;
    masked += a * exposure[i].masked_share;
  }
  if (total > 0) {
    t.overlap_downsampled = ds / total;
    t.overlap_masked = masked / total;
  }
  t.accuracy = std::clamp(1.0 - t.quality_penalty -
                              p.k_d * (t.overlap_downsampled * t.resolution_weight + t.overlap_masked * p.g_mask),
                          0.0, 1.0);
  return t;
}

inline double true_accuracy(const ServerProfile& p, const OffloadPlan& plan, const FrameTruth& truth,
                            const GridGeometry& geom) {
  validate_plan(plan, geom);
  return accuracy_terms(p, plan, truth, geom).accuracy;
}

struct InferenceResult {
  int frame_id = 0;
  BoxList boxes;
  double inference_ms = 0.0;
  double decode_ms = 0.0;
};

// Each ground-truth object fails with a probability proportional to its own
// penalty (quality plus exposure to downsampled or masked regions). A failed
// object is either missed or returned mislocalized (IoU < 0.5); the failure
// budget is set so the expected F1 of the frame equals true_accuracy.
// Surviving boxes are jittered.
inline InferenceResult infer(const ServerProfile& p, const OffloadPlan& plan, const FrameTruth& truth,
                             const GridGeometry& geom) {
  validate_plan(plan, geom);
  InferenceResult r;
  r.frame_id = truth.frame_id;
  r.inference_ms = inference_ms(p, plan, geom, truth.frame_id);
  r.decode_ms = decode_ms(p, plan, geom, truth.frame_id);

  const auto terms = accuracy_terms(p, plan, truth, geom);
  const auto exposure = object_exposure(plan, truth.boxes, geom);
  const std::size_t n = truth.boxes.size();
  if (n == 0) return r;

  // With d misses and l mislocalized boxes out of n, F1 = 2(n-d-l)/(2n-d).
  // Setting d = phi*f and l = (1-phi)*f and solving F1 = A for f:
  const double a = terms.accuracy, phi = p.miss_share;
  const double budget = static_cast<double>(n) * 2.0 * (1.0 - a) / (2.0 - phi * a);
  std::vector<double> penalty(n), fail(n, 0.0);
  double pen_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    penalty[i] = terms.quality_penalty + p.k_d * (exposure[i].downsampled_share * terms.resolution_weight +
                                                  exposure[i].masked_share * p.g_mask);
    pen_sum += penalty[i];
  }
  if (pen_sum > 0 && budget > 0) {
    // Proportional allocation, capped at 1 with the excess redistributed.
    std::vector<bool> capped(n, false);
    double left = budget;
    for (std::size_t iter = 0; iter <= n; ++iter) {
      double free_pen = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!capped[i]) free_pen += penalty[i];
      }
      if (free_pen <= 0 || left <= 0) break;
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (capped[i]) continue;
        fail[i] = left * penalty[i] / free_pen;
        if (fail[i] >= 1.0) {
          fail[i] = 1.0;
          capped[i] = true;
          changed = true;
        }
      }
      if (!changed) break;
      left = budget;
      for (std::size_t i = 0; i < n; ++i) {
        if (capped[i]) left -= 1.0;
      }
    }
  }

  const CounterRng rng(hash_mix({p.seed, hash_name("detect"), static_cast<std::uint64_t>(truth.frame_id),
                                 detail::plan_key(plan)}));
  const double fw = geom.padded_width_px, fh = geom.padded_height_px;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& gt = truth.boxes[i];
    const std::uint64_t c = static_cast<std::uint64_t>(gt.id) * 8;
    Box b = gt.box;
    if (rng.uniform(c) < fail[i]) {
      if (rng.uniform(c + 1) < phi) continue;
      // Mislocalized: shifted by 60-90% of the box size along a random direction.
      const double ang = 2.0 * std::numbers::pi * rng.uniform(c + 2);
      const double shift = 0.6 + 0.3 * rng.uniform(c + 3);
      b = b.shifted(shift * b.w * std::cos(ang) / std::max(std::abs(std::cos(ang)), std::abs(std::sin(ang))),
                    shift * b.h * std::sin(ang) / std::max(std::abs(std::cos(ang)), std::abs(std::sin(ang))));
    } else {
      const double sigma = std::min(p.jitter_cap, p.jitter_base + p.jitter_gain * penalty[i]);
      auto jitter = [&](std::uint64_t k) {
        return std::clamp(sigma * rng.normal(c + k), -p.jitter_cap, p.jitter_cap);
      };
      const double w = b.w * (1.0 + 0.5 * jitter(4));
      const double h = b.h * (1.0 + 0.5 * jitter(5));
      b = Box{b.cx() + jitter(6) * b.w - 0.5 * w, b.cy() + jitter(7) * b.h - 0.5 * h, w, h};
    }
    auto clipped = clip_box(b, fw, fh);
    if (!clipped) continue;
    // Coordinates travel as f32 on the wire.
    const Box q{static_cast<double>(static_cast<float>(clipped->x)), static_cast<double>(static_cast<float>(clipped->y)),
                static_cast<double>(static_cast<float>(clipped->w)), static_cast<double>(static_cast<float>(clipped->h))};
    r.boxes.push_back({gt.id, q});
  }
  return r;
}

// JSON schema: every ServerProfile field by name; "inference" is a list of
// five {"intercept_ms", "slope_ms"} objects and "g_beta" a list of five numbers.
inline nlohmann::json to_json(const ServerProfile& p) {
  nlohmann::json j;
  j["dec_base_ms"] = p.dec_base_ms;
  j["dec_per_frame_ms"] = p.dec_per_frame_ms;
  j["dec_noise"] = p.dec_noise;
  InferenceDelayModels m;
  m.per_beta = p.inference;
  j["inference"] = to_json(m);
  j["inference_noise"] = p.inference_noise;
  j["uniform_floor_ms"] = p.uniform_floor_ms;
  j["uniform_ms_per_token"] = p.uniform_ms_per_token;
  j["size_kib_per_mpx"] = p.size_kib_per_mpx;
  j["quality_alpha"] = p.quality_alpha;
  j["texture_gain"] = p.texture_gain;
  j["masked_pixel_weight"] = p.masked_pixel_weight;
  j["size_noise"] = p.size_noise;
  j["k_lambda"] = p.k_lambda;
  j["k_d"] = p.k_d;
  j["g_beta"] = p.g_beta;
  j["g_mask"] = p.g_mask;
  j["g_uniform"] = p.g_uniform;
  j["miss_share"] = p.miss_share;
  j["jitter_base"] = p.jitter_base;
  j["jitter_gain"] = p.jitter_gain;
  j["jitter_cap"] = p.jitter_cap;
  j["seed"] = p.seed;
  return j;
}

inline ServerProfile server_profile_from_json(const nlohmann::json& j) {
  try {
    ServerProfile p;
    p.dec_base_ms = j.value("dec_base_ms", p.dec_base_ms);
    p.dec_per_frame_ms = j.value("dec_per_frame_ms", p.dec_per_frame_ms);
    p.dec_noise = j.value("dec_noise", p.dec_noise);
    if (j.contains("inference")) p.inference = inference_models_from_json(j.at("inference")).per_beta;
    p.inference_noise = j.value("inference_noise", p.inference_noise);
    p.uniform_floor_ms = j.value("uniform_floor_ms", p.uniform_floor_ms);
    p.uniform_ms_per_token = j.value("uniform_ms_per_token", p.uniform_ms_per_token);
    p.size_kib_per_mpx = j.value("size_kib_per_mpx", p.size_kib_per_mpx);
    p.quality_alpha = j.value("quality_alpha", p.quality_alpha);
    p.texture_gain = j.value("texture_gain", p.texture_gain);
    p.masked_pixel_weight = j.value("masked_pixel_weight", p.masked_pixel_weight);
    p.size_noise = j.value("size_noise", p.size_noise);
    p.k_lambda = j.value("k_lambda", p.k_lambda);
    p.k_d = j.value("k_d", p.k_d);
    if (j.contains("g_beta")) p.g_beta = j.at("g_beta").get<std::array<double, kBetaCount>>();
    p.g_mask = j.value("g_mask", p.g_mask);
    p.g_uniform = j.value("g_uniform", p.g_uniform);
    p.miss_share = j.value("miss_share", p.miss_share);
    p.jitter_base = j.value("jitter_base", p.jitter_base);
    p.jitter_gain = j.value("jitter_gain", p.jitter_gain);
    p.jitter_cap = j.value("jitter_cap", p.jitter_cap);
    p.seed = j.value("seed", p.seed);
    validate(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("server profile: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace edgemix
