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

// Device side: encode cost model, local tracker, local cache, and the
// event-driven capture/render/offload loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "edgemix/box.hpp"
#include "edgemix/error.hpp"
#include "edgemix/estimator.hpp"
#include "edgemix/grid.hpp"
#include "edgemix/metrics.hpp"
#include "edgemix/motion.hpp"
#include "edgemix/netsim.hpp"
#include "edgemix/optimizer.hpp"
#include "edgemix/policy.hpp"
#include "edgemix/rng.hpp"
#include "edgemix/scene.hpp"
#include "edgemix/serversim.hpp"

namespace edgemix {

struct DeviceProfile {
  double enc_base_ms = 4.0;
  double enc_per_frame_ms = 16.0;   // full padded frame
  double enc_quality_slope = 0.15;  // relative cost rise from lambda 70 to 100
  double mix_base_ms = 16.0;        // composing a mixed-resolution frame
  double mix_per_region_ms = 0.25;
  double mask_overhead_ms = 2.0;
  double resize_overhead_ms = 3.0;
  double enc_noise = 0.04;

  double motion_analysis_ms = 10.0;
  double estimator_ms = 9.0;
  double optimizer_ms = 2.0;

  std::uint64_t seed = 11;
};

inline void validate(const DeviceProfile& d) {
  if (d.enc_base_ms < 0 || d.enc_per_frame_ms < 0 || d.mix_base_ms < 0 || d.mix_per_region_ms < 0) {
    throw InvalidArgument("DeviceProfile: encode costs must be >= 0");
  }
  if (d.enc_noise < 0 || d.enc_noise > 0.2) throw InvalidArgument("DeviceProfile: enc_noise must be in [0, 0.2]");
}

inline double mean_encode_ms(const DeviceProfile& d, const OffloadPlan& plan, const GridGeometry& geom) {
  const double share = encoded_pixel_share(plan, geom, 0.1);
  const double quality = std::max(0.5, 1.0 - d.enc_quality_slope + d.enc_quality_slope * (plan.config.lambda_q - 70) / 30.0);
  double ms = d.enc_base_ms + d.enc_per_frame_ms * share * quality;
  switch (plan.mode) {
    case FrameMode::kMixed:
      if (plan.nd() > 0) ms += d.mix_base_ms + d.mix_per_region_ms * plan.nd();
      break;
    case FrameMode::kMasked: ms += d.mask_overhead_ms; break;
    case FrameMode::kUniform: ms += d.resize_overhead_ms; break;
  }
  return ms;
}

inline double encode_ms(const DeviceProfile& d, const OffloadPlan& plan, const GridGeometry& geom, int frame_id) {
  const CounterRng rng(hash_mix({d.seed, hash_name("encode"), static_cast<std::uint64_t>(frame_id)}));
  return mean_encode_ms(d, plan, geom) * (1.0 + d.enc_noise * rng.clipped_normal(detail::plan_key(plan), 3.0));
}

// ---------------------------------------------------------------------------
// Local tracker: constant velocity per object, catch-up on reinit.

struct Track {
  Box box;          // at TrackerState::frame, unclipped
  double vx = 0.0;  // px per frame
  double vy = 0.0;
  Box anchor;       // last detection
  int anchor_frame = 0;
};

struct TrackerState {
  std::map<std::uint32_t, Track> tracked;
  std::set<std::uint32_t> reinit_ids;
  int last_reinit_frame = -1;
  int frame = 0;
  bool predict_motion = true;  // false: detections are held still
};

inline constexpr double kTrackMatchIou = 0.3;

namespace detail {

inline bool inside_frame(const Box& b, const GridGeometry& geom) {
  return clip_box(b, geom.padded_width_px, geom.padded_height_px).has_value();
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  return median(std::move(v));
}

}  // namespace detail

// Advances every track by n frames; tracks that leave the frame are dropped.
inline void tracker_step(TrackerState& s, int n_frames, const GridGeometry& geom) {
  if (n_frames < 0) throw InvalidArgument("tracker_step: n_frames must be >= 0");
  s.frame += n_frames;
  if (n_frames == 0) return;
  for (auto it = s.tracked.begin(); it != s.tracked.end();) {
    if (s.predict_motion) it->second.box = it->second.box.shifted(it->second.vx * n_frames, it->second.vy * n_frames);
    if (!detail::inside_frame(it->second.box, geom)) {
      it = s.tracked.erase(it);
    } else {
      ++it;
    }
  }
}

// Tracker output at `frame` (>= s.frame), clipped to the frame, without
// mutating the state.
inline BoxList tracker_predict(const TrackerState& s, int frame, const GridGeometry& geom) {
  TrackerState copy = s;
  tracker_step(copy, std::max(0, frame - s.frame), geom);
  BoxList out;
  out.reserve(copy.tracked.size());
  for (const auto& [id, t] : copy.tracked) {
    if (auto c = clip_box(t.box, geom.padded_width_px, geom.padded_height_px)) out.push_back({id, *c});
  }
  return out;
}

inline BoxList tracker_boxes(const TrackerState& s, const GridGeometry& geom) { return tracker_predict(s, s.frame, geom); }

// Resets the tracker to a remote result for `result_frame` and catches it up
// to `current_frame`. Velocities come from matching the result against the
// previous tracks: IoU-greedy first, then nearest centre among boxes of
// similar size; unmatched detections take the median matched velocity.
inline TrackerState tracker_reinit(const TrackerState& prev, const BoxList& result, int result_frame, int current_frame,
                                   const GridGeometry& geom) {
  if (result_frame > current_frame) throw InvalidArgument("tracker_reinit: result_frame after current_frame");
  std::vector<std::uint32_t> old_ids;
  std::vector<Box> predicted;
  for (const auto& [id, t] : prev.tracked) {
    old_ids.push_back(id);
    const double k = prev.predict_motion ? static_cast<double>(result_frame - prev.frame) : 0.0;
    predicted.push_back(t.box.shifted(t.vx * k, t.vy * k));
  }

  std::vector<int> match(result.size(), -1);
  std::vector<bool> used(old_ids.size(), false);
  {
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < result.size(); ++i) {
      for (std::size_t j = 0; j < predicted.size(); ++j) {
        const double v = iou(result[i].box, predicted[j]);
        if (v >= kTrackMatchIou) pairs.emplace_back(-v, i, j);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [v, i, j] : pairs) {
      if (match[i] >= 0 || used[j]) continue;
      match[i] = static_cast<int>(j);
      used[j] = true;
    }
  }
  {
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < result.size(); ++i) {
      if (match[i] >= 0) continue;
      const Box& r = result[i].box;
      for (std::size_t j = 0; j < predicted.size(); ++j) {
        if (used[j]) continue;
        const double ratio = r.area() / std::max(1e-9, predicted[j].area());
        if (ratio < 0.5 || ratio > 2.0) continue;
        const double dist = std::hypot(r.cx() - predicted[j].cx(), r.cy() - predicted[j].cy());
        if (dist <= 1.5 * std::max(r.w, r.h)) pairs.emplace_back(dist, i, j);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [d, i, j] : pairs) {
      if (match[i] >= 0 || used[j]) continue;
      match[i] = static_cast<int>(j);
      used[j] = true;
    }
  }

  TrackerState next;
  next.predict_motion = prev.predict_motion;
  next.frame = current_frame;
  next.last_reinit_frame = current_frame;
  std::vector<double> vxs, vys;
  std::vector<std::pair<double, double>> vel(result.size(), {0.0, 0.0});
  for (std::size_t i = 0; i < result.size(); ++i) {
    if (match[i] < 0 || !prev.predict_motion) continue;
    const Track& old = prev.tracked.at(old_ids[static_cast<std::size_t>(match[i])]);
    const int gap = result_frame - old.anchor_frame;
    if (gap > 0) {
      vel[i] = {(result[i].box.cx() - old.anchor.cx()) / gap, (result[i].box.cy() - old.anchor.cy()) / gap};
    } else {
      vel[i] = {old.vx, old.vy};
    }
    vxs.push_back(vel[i].first);
    vys.push_back(vel[i].second);
  }
  const double mvx = detail::median_of(vxs), mvy = detail::median_of(vys);
  const double catch_up = prev.predict_motion ? static_cast<double>(current_frame - result_frame) : 0.0;
  for (std::size_t i = 0; i < result.size(); ++i) {
    Track t;
    if (match[i] < 0 && prev.predict_motion) vel[i] = {mvx, mvy};
    t.vx = vel[i].first;
    t.vy = vel[i].second;
    t.anchor = result[i].box;
    t.anchor_frame = result_frame;
    t.box = result[i].box.shifted(t.vx * catch_up, t.vy * catch_up);
    if (!detail::inside_frame(t.box, geom)) continue;
    next.tracked[result[i].id] = t;
    next.reinit_ids.insert(result[i].id);
  }
  return next;
}

inline double compute_kappa(const TrackerState& s) {
  if (s.reinit_ids.empty()) return 1.0;
  std::size_t kept = 0;
  for (auto id : s.reinit_ids) kept += s.tracked.count(id);
  return static_cast<double>(kept) / static_cast<double>(s.reinit_ids.size());
}

// ---------------------------------------------------------------------------
// Local cache and renderer.

struct LocalCache {
  int result_frame_id = -1;
  BoxList boxes;
  double timestamp_ms = 0.0;
};

struct RenderOutput {
  BoxList boxes;
  bool from_cache = false;
};

// Exact cache hit, else the tracker's prediction for frame_id. Steps the
// tracker forward to frame_id.
inline RenderOutput renderer_poll(const std::optional<LocalCache>& cache, TrackerState& tracker, int frame_id,
                                  const GridGeometry& geom) {
  if (frame_id > tracker.frame) tracker_step(tracker, frame_id - tracker.frame, geom);
  if (cache && cache->result_frame_id == frame_id) return {cache->boxes, true};
  return {tracker_boxes(tracker, geom), false};
}

// ---------------------------------------------------------------------------
// Region analysis and candidate evaluation on one frame.

struct FrameAnalysis {
  MotionReport motion;
  RelevanceReport relevance;
  RegionTypeMap types;
};

inline FrameAnalysis analyze_frame(const FrameTruth& truth, std::span<const LabeledBox> tracker_view,
                                   const GridGeometry& geom, double delta_m, double delta_rho) {
  FrameAnalysis a;
  a.motion = analyze_motion(truth.foreground_px, geom);
  a.relevance = compute_relevance(tracker_view, geom);
  a.types = classify_regions(a.motion, a.relevance, delta_m, delta_rho);
  return a;
}

inline CandidateFeatures candidate_features(const FrameAnalysis& a, const Configuration& c) {
  const auto mask = mask_from_types(a.types, c.tau_d);
  return {c, mask.popcount(), masked_motion(a.motion, mask), a.motion.m_frame, a.relevance.mean_rho,
          a.relevance.std_rho};
}

struct CandidateSet {
  std::vector<EvaluatedConfig> evaluated;
  std::vector<LatencyEstimate> latency;
  std::vector<double> size_kib;
};

inline CandidateSet evaluate_candidates(const EstimatorArtifacts& art, const FrameAnalysis& a,
                                        std::span<const Configuration> candidates, const NetEstimate& net) {
  if (!art.predictor) throw ConfigError("estimator has no content predictor");
  std::vector<CandidateFeatures> feats;
  feats.reserve(candidates.size());
  for (const auto& c : candidates) feats.push_back(candidate_features(a, c));
  CandidateSet out;
  std::vector<double> acc;
  art.predictor->predict(feats, out.size_kib, acc);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto lat = estimate_latency(art.encode, art.inference, net, candidates[i], feats[i].nd, out.size_kib[i]);
    out.latency.push_back(lat);
    out.evaluated.push_back({candidates[i], lat.total(), acc[i], i});
  }
  return out;
}

inline std::vector<Configuration> policy_candidates(const Policy& p) {
  switch (p.ablation) {
    case Ablation::kNoRegType: return enumerate_candidates(kLambdaSet, kBetaSet, std::array{0, 2});
    case Ablation::kNoDynaRes: return enumerate_candidates(kLambdaSet, std::array{4});
    default: return default_candidates();
  }
}

// ---------------------------------------------------------------------------
// Session loop.

struct InferenceReply {
  BoxList boxes;
  double inference_ms = 0.0;
};

// The edge server as seen from the device: in-process or over a socket.
class InferenceBackend {
 public:
  virtual ~InferenceBackend() = default;
  virtual InferenceReply infer(const OffloadPlan& plan, int frame_id, double payload_kib) = 0;
};

class InProcessBackend final : public InferenceBackend {
 public:
  InProcessBackend(ServerProfile profile, GridGeometry geom, const std::vector<FrameTruth>& truth)
      : profile_(std::move(profile)), geom_(geom), truth_(truth) {}

  InferenceReply infer(const OffloadPlan& plan, int frame_id, double) override {
    if (frame_id < 0 || static_cast<std::size_t>(frame_id) >= truth_.size()) {
      throw InvalidArgument("frame_id outside the scene");
    }
    auto r = edgemix::infer(profile_, plan, truth_[static_cast<std::size_t>(frame_id)], geom_);
    return {std::move(r.boxes), r.inference_ms};
  }

 private:
  ServerProfile profile_;
  GridGeometry geom_;
  const std::vector<FrameTruth>& truth_;
};

struct SessionConfig {
  Policy policy;
  GridGeometry geom = default_geometry();
  DeviceProfile device;
  ServerProfile server;
  double fps = 30.0;
  double delta_m = 0.001;
  double delta_rho = 0.0;
  SelectionThresholds thresholds;
  int max_frames = -1;  // < 0: whole scene
};

struct OffloadRecord {
  int frame_id = 0;
  Configuration config;
  FrameMode mode = FrameMode::kMixed;
  int nd = 0;
  std::string mask_hex;
  std::string branch;  // selection branch, or "fixed"
  int eta = 0;
  double kappa = 1.0;
  std::size_t frontier_size = 0;

  double decision_ms = 0.0;  // offload start
  double send_ms = 0.0;      // upload start
  double recv_ms = 0.0;
  double pre_ms = 0.0;       // estimator + optimizer

  double enc_ms = 0.0;
  double upload_ms = 0.0;
  double dec_ms = 0.0;
  double inf_ms = 0.0;
  double rtt_ms = 0.0;
  double e2e_ms = 0.0;

  double payload_kib = 0.0;
  double observed_tput_mbps = 0.0;
  double observed_rtt_ms = 0.0;

  double predicted_latency_ms = std::numeric_limits<double>::quiet_NaN();
  double predicted_accuracy = std::numeric_limits<double>::quiet_NaN();
  double true_accuracy = 0.0;
  double inference_f1 = 0.0;
  int result_boxes = 0;
};

struct RenderRow {
  int frame_id = 0;
  bool from_cache = false;
  int n_boxes = 0;
  int eta = 0;
  double kappa = 1.0;
  double f1 = 0.0;
};

struct SessionResult {
  std::vector<RenderRow> frames;
  std::vector<OffloadRecord> offloads;
};

// Per-frame hook, called at render time with the tracker's view of the frame.
using FrameObserver = std::function<void(const FrameTruth&, const BoxList& tracker_view, const TrackerState&)>;

namespace detail {

inline double capture_ms(int f, double fps) { return static_cast<double>(f) * 1000.0 / fps; }

inline int latest_captured(double t_ms, double fps) {
  auto f = static_cast<int>(std::floor(t_ms * fps / 1000.0));
  while (capture_ms(f + 1, fps) <= t_ms) ++f;
  while (f > 0 && capture_ms(f, fps) > t_ms) --f;
  return std::max(0, f);
}

}  // namespace detail

inline SessionResult run_session(const SessionConfig& cfg, const std::vector<FrameTruth>& truth,
                                 const NetworkTrace& trace, const EstimatorArtifacts* artifacts,
                                 InferenceBackend& backend, const FrameObserver& observer = {}) {
  const Policy& pol = cfg.policy;
  validate(pol);
  validate(cfg.device);
  validate(cfg.server);
  validate(trace);
  if (!(cfg.fps > 0)) throw InvalidArgument("fps must be > 0");
  if (uses_estimator(pol) && (artifacts == nullptr || !artifacts->predictor)) {
    throw ConfigError(policy_name(pol) + " needs estimator artifacts");
  }
  const GridGeometry& geom = cfg.geom;
  const int n = cfg.max_frames < 0 ? static_cast<int>(truth.size())
                                   : std::min(cfg.max_frames, static_cast<int>(truth.size()));
  if (n <= 0) throw InvalidArgument("scene has no frames");
  const double interval = 1000.0 / cfg.fps;
  const auto candidates = policy_candidates(pol);
  SeqRng random_rng(hash_mix({pol.random_seed, hash_name("random-policy")}));

  SessionResult out;
  out.frames.reserve(static_cast<std::size_t>(n));
  TrackerState tracker;
  tracker.predict_motion = uses_tracking(pol);
  std::optional<LocalCache> cache;
  std::vector<NetObservation> history;
  std::vector<int> offloaded_frames;
  double last_e2e = 0.0;

  struct Pending {
    OffloadRecord rec;
    BoxList boxes;
  };
  std::optional<Pending> pending;

  auto start_offload = [&](int g, double t_start) {
    OffloadRecord rec;
    rec.frame_id = g;
    rec.decision_ms = t_start;
    rec.eta = offloaded_frames.empty() ? 0 : g - offloaded_frames.back();
    const BoxList view = tracker_predict(tracker, g, geom);
    {
      TrackerState ahead = tracker;
      tracker_step(ahead, std::max(0, g - tracker.frame), geom);
      rec.kappa = compute_kappa(ahead);
    }
    const FrameTruth& ft = truth[static_cast<std::size_t>(g)];

    OffloadPlan plan = full_resolution_plan(geom, pol.jpeg_quality);
    rec.branch = "fixed";
    std::optional<FrameAnalysis> analysis;
    if (uses_region_types(pol) || pol.kind == PolicyKind::kRandom) {
      analysis = analyze_frame(ft, view, geom, cfg.delta_m, cfg.delta_rho);
    }
    switch (pol.kind) {
      case PolicyKind::kBack2Back:
      case PolicyKind::kTrackB2B: break;
      case PolicyKind::kTrackRoI:
        // Without any tracked object every region would be masked out.
        if (!view.empty()) {
          plan = {{2, pol.jpeg_quality, 0}, FrameMode::kMasked, mask_from_types(analysis->types, 2)};
        }
        break;
      case PolicyKind::kTrackUD:
        if (last_e2e > pol.ud_threshold_intervals * interval) plan = uniform_plan(geom, pol.jpeg_quality);
        break;
      case PolicyKind::kRandom: {
        const auto& c = candidates[static_cast<std::size_t>(
            random_rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1))];
        plan = {c, FrameMode::kMixed, mask_from_types(analysis->types, c.tau_d)};
        break;
      }
      case PolicyKind::kViTMAlis: {
        const NetEstimate net = update_net_estimate(history, artifacts->prior);
        const auto set = evaluate_candidates(*artifacts, *analysis, candidates, net);
        const auto sel = select_configuration(set.evaluated, RuntimeState{rec.eta, rec.kappa}, cfg.thresholds);
        plan = {sel.chosen.config, FrameMode::kMixed, mask_from_types(analysis->types, sel.chosen.config.tau_d)};
        rec.branch = branch_name(sel.branch);
        rec.frontier_size = sel.frontier.size();
        rec.predicted_latency_ms = sel.chosen.latency_hat;
        rec.predicted_accuracy = sel.chosen.accuracy_hat;
        break;
      }
    }
    validate_plan(plan, geom);
    rec.config = plan.config;
    rec.mode = plan.mode;
    rec.nd = plan.nd();
    rec.mask_hex = mask_to_hex(plan.mask);

    rec.pre_ms = uses_estimator(pol) ? cfg.device.estimator_ms + cfg.device.optimizer_ms : 0.0;
    const double enc_raw = encode_ms(cfg.device, plan, geom, g);
    // Motion analysis runs alongside the encoder.
    rec.enc_ms = uses_region_types(pol) ? std::max(enc_raw, cfg.device.motion_analysis_ms) : enc_raw;
    rec.payload_kib = true_size(cfg.server, plan, ft, geom);
    rec.send_ms = t_start + rec.pre_ms + rec.enc_ms;
    rec.upload_ms = transmit(trace, rec.payload_kib * 1024.0, rec.send_ms) - rec.send_ms;
    rec.rtt_ms = rtt_at(trace, rec.send_ms);
    rec.dec_ms = decode_ms(cfg.server, plan, geom, g);
    InferenceReply reply = backend.infer(plan, g, rec.payload_kib);
    rec.inf_ms = reply.inference_ms;
    rec.e2e_ms = rec.enc_ms + rec.upload_ms + rec.dec_ms + rec.inf_ms + rec.rtt_ms;
    rec.recv_ms = t_start + rec.pre_ms + rec.e2e_ms;
    if (!(rec.recv_ms > rec.send_ms) || !(rec.send_ms >= t_start)) {
      throw InternalFault("simulation time inversion at frame " + std::to_string(g));
    }
    rec.observed_tput_mbps = rec.payload_kib * 1024.0 * 8.0 / 1e6 / (rec.upload_ms / 1000.0);
    rec.observed_rtt_ms = rec.rtt_ms;
    rec.true_accuracy = accuracy_terms(cfg.server, plan, ft, geom).accuracy;
    rec.inference_f1 = f1_match(reply.boxes, ft.boxes);
    rec.result_boxes = static_cast<int>(reply.boxes.size());
    offloaded_frames.push_back(g);
    pending = Pending{std::move(rec), std::move(reply.boxes)};
  };

  start_offload(0, 0.0);
  std::size_t offload_cursor = 0;
  for (int f = 0; f < n; ++f) {
    const double render_ms = detail::capture_ms(f + 1, cfg.fps);
    while (pending && pending->rec.recv_ms < render_ms) {
      Pending done = std::move(*pending);
      pending.reset();
      const int current = std::min(n - 1, detail::latest_captured(done.rec.recv_ms, cfg.fps));
      cache = LocalCache{done.rec.frame_id, done.boxes, done.rec.recv_ms};
      tracker = tracker_reinit(tracker, done.boxes, done.rec.frame_id, std::max(current, tracker.frame), geom);
      history.push_back({done.rec.observed_tput_mbps, done.rec.observed_rtt_ms});
      last_e2e = done.rec.e2e_ms;
      const int last = done.rec.frame_id;
      out.offloads.push_back(std::move(done.rec));
      const int g = std::max(detail::latest_captured(out.offloads.back().recv_ms, cfg.fps), last + 1);
      if (g < n) start_offload(g, std::max(out.offloads.back().recv_ms, detail::capture_ms(g, cfg.fps)));
    }

    const FrameTruth& ft = truth[static_cast<std::size_t>(f)];
    RenderOutput shown = renderer_poll(cache, tracker, f, geom);
    while (offload_cursor + 1 < offloaded_frames.size() && offloaded_frames[offload_cursor + 1] <= f) ++offload_cursor;
    RenderRow row;
    row.frame_id = f;
    row.from_cache = shown.from_cache;
    row.n_boxes = static_cast<int>(shown.boxes.size());
    row.eta = f - offloaded_frames[offload_cursor];
    row.kappa = compute_kappa(tracker);
    row.f1 = f1_match(shown.boxes, ft.boxes);
    out.frames.push_back(row);
    if (observer) observer(ft, tracker_boxes(tracker, geom), tracker);
  }
  return out;
}

}  // namespace edgemix
