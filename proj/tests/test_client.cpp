#include <gtest/gtest.h>

#include "edgemix/client.hpp"
#include "edgemix/experiment.hpp"

namespace edgemix {
namespace {

const GridGeometry kGeom = default_geometry();

std::vector<FrameTruth> frames(const std::string& preset, int n, std::uint64_t seed = 1) {
  SceneConfig c = scene_preset(preset);
  c.seed = seed;
  c.duration_frames = n;
  return generate_truth(c, kGeom);
}

NetworkTrace scaled(NetworkTrace t, double k) {
  for (auto& s : t.seconds) s.throughput_mbps *= k;
  return t;
}

SessionResult run(const std::string& policy, const std::vector<FrameTruth>& truth, const NetworkTrace& trace,
                  SessionConfig sc = {}) {
  sc.policy = parse_policy(policy);
  InProcessBackend backend(sc.server, sc.geom, truth);
  return run_session(sc, truth, trace, nullptr, backend);
}

TEST(Tracker, VelocityFromSuccessiveDetections) {
  TrackerState s;
  const BoxList a{{1, {100, 100, 50, 50}}, {2, {600, 300, 80, 40}}};
  const BoxList b{{1, {130, 90, 50, 50}}, {2, {590, 315, 80, 40}}};
  s = tracker_reinit(s, a, 0, 0, kGeom);
  s = tracker_reinit(s, b, 10, 10, kGeom);
  EXPECT_DOUBLE_EQ(s.tracked.at(1).vx, 3.0);
  EXPECT_DOUBLE_EQ(s.tracked.at(1).vy, -1.0);
  EXPECT_DOUBLE_EQ(s.tracked.at(2).vx, -1.0);
  EXPECT_DOUBLE_EQ(s.tracked.at(2).vy, 1.5);
  const auto ahead = tracker_predict(s, 14, kGeom);
  EXPECT_DOUBLE_EQ(ahead[0].box.x, 142.0);
  EXPECT_DOUBLE_EQ(ahead[1].box.y, 321.0);
  EXPECT_EQ(s.frame, 10);
  EXPECT_EQ(compute_kappa(s), 1.0);
}

TEST(Tracker, CatchUpAndKappa) {
  TrackerState s;
  s = tracker_reinit(s, {{1, {100, 100, 50, 50}}, {2, {1950, 100, 50, 50}}}, 0, 0, kGeom);
  s = tracker_reinit(s, {{1, {110, 100, 50, 50}}, {2, {1960, 100, 50, 50}}}, 5, 8, kGeom);
  EXPECT_DOUBLE_EQ(s.tracked.at(1).box.x, 110.0 + 2.0 * 3);
  EXPECT_EQ(compute_kappa(s), 1.0);
  tracker_step(s, 30, kGeom);  // object 2 leaves the frame at x >= 2016
  EXPECT_EQ(s.tracked.count(2), 0u);
  EXPECT_EQ(compute_kappa(s), 0.5);
  EXPECT_EQ(compute_kappa(TrackerState{}), 1.0);
  EXPECT_THROW(tracker_reinit(s, {}, 20, 19, kGeom), InvalidArgument);
  EXPECT_THROW(tracker_step(s, -1, kGeom), InvalidArgument);
}

bool interior(const Box& b) {
  return b.x > 0 && b.y > 0 && b.right() < kGeom.padded_width_px && b.bottom() < kGeom.padded_height_px;
}

TEST(Tracker, FollowsSceneObjectsWithinOnePixelPerFrame) {
  const auto truth = frames("walkR", 300, 3);
  TrackerState s;
  int checked = 0;
  for (int f = 0; f < 300; f += 10) {
    s = tracker_reinit(s, truth[f].boxes, f, f, kGeom);
    if (f == 0) continue;
    // Velocity over the last detection gap, interior boxes only.
    for (const auto& b : truth[f].boxes) {
      const auto it = s.tracked.find(b.id);
      const auto prev = std::find_if(truth[f - 10].boxes.begin(), truth[f - 10].boxes.end(),
                                     [&](const LabeledBox& x) { return x.id == b.id; });
      if (it == s.tracked.end() || prev == truth[f - 10].boxes.end() || !interior(b.box) || !interior(prev->box)) {
        continue;
      }
      EXPECT_NEAR(it->second.vx, (b.box.cx() - prev->box.cx()) / 10.0, 1.0);
      EXPECT_NEAR(it->second.vy, (b.box.cy() - prev->box.cy()) / 10.0, 1.0);
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(Renderer, CacheHitOnlyOnExactFrame) {
  TrackerState s;
  s = tracker_reinit(s, {{1, {10, 10, 20, 20}}}, 0, 0, kGeom);
  const std::optional<LocalCache> cache = LocalCache{3, {{7, {1, 1, 5, 5}}}, 0.0};
  EXPECT_TRUE(renderer_poll(cache, s, 3, kGeom).from_cache);
  const auto r = renderer_poll(cache, s, 4, kGeom);
  EXPECT_FALSE(r.from_cache);
  ASSERT_EQ(r.boxes.size(), 1u);
  EXPECT_EQ(r.boxes[0].id, 1u);
  EXPECT_EQ(s.frame, 4);
}

TEST(Session, FreshnessLimit) {
  const auto truth = frames("walkB", 120);
  SessionConfig sc;
  sc.server.inference = {{{0.01, 0.0}, {0.01, 0.0}, {0.01, 0.0}, {0.01, 0.0}, {0.01, 0.0}}};
  sc.server.uniform_floor_ms = 0.01;
  sc.server.uniform_ms_per_token = 0.0;
  sc.server.dec_base_ms = sc.server.dec_per_frame_ms = 0.0;
  sc.device.enc_base_ms = sc.device.enc_per_frame_ms = 0.0;
  NetworkTrace instant;
  instant.seconds.assign(10, {1e7, 0.0});
  for (const char* policy : {"Back2Back", "TrackB2B"}) {
    const auto r = run(policy, truth, instant, sc);
    ASSERT_EQ(r.offloads.size(), truth.size());
    for (std::size_t f = 0; f < truth.size(); ++f) {
      ASSERT_TRUE(r.frames[f].from_cache);
      ASSERT_EQ(r.frames[f].f1, r.offloads[f].inference_f1);
    }
    EXPECT_EQ(compute_report(r).rendering_f1, compute_report(r).inference_f1_mean);
  }
}

TEST(Session, StalenessMonotoneForBack2Back) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto truth = frames(seed % 2 ? "walkS" : "cycleS", 600, seed);
    const auto base = generate_trace(TraceKind::k4G, seed);
    double prev = 2.0;
    for (double k : {4.0, 1.0, 0.25, 0.0625}) {
      const double f1 = compute_report(run("Back2Back", truth, scaled(base, k))).rendering_f1;
      EXPECT_LE(f1, prev + 1e-12) << "seed " << seed << " scale " << k;
      prev = f1;
    }
  }
}

TEST(Session, LatencyCompositionAndTimeline) {
  const auto truth = frames("driveN", 450);
  const auto trace = generate_trace(TraceKind::k5G, 2);
  for (const char* policy : {"Back2Back", "TrackB2B", "TrackRoI", "TrackUD"}) {
    const auto r = run(policy, truth, trace);
    ASSERT_FALSE(r.offloads.empty());
    ASSERT_EQ(r.frames.size(), truth.size());
    for (std::size_t i = 0; i < r.offloads.size(); ++i) {
      const auto& o = r.offloads[i];
      ASSERT_EQ(o.e2e_ms, o.enc_ms + o.upload_ms + o.dec_ms + o.inf_ms + o.rtt_ms);
      ASSERT_EQ(o.recv_ms, o.decision_ms + o.pre_ms + o.e2e_ms);
      ASSERT_GE(o.decision_ms, detail::capture_ms(o.frame_id, 30.0));
      if (i > 0) {
        ASSERT_GE(o.decision_ms, r.offloads[i - 1].recv_ms);
        ASSERT_GT(o.frame_id, r.offloads[i - 1].frame_id);
      }
    }
    for (const auto& row : r.frames) {
      ASSERT_GE(row.f1, 0.0);
      ASSERT_LE(row.f1, 1.0);
      ASSERT_GE(row.eta, 0);
    }
  }
}

TEST(Session, PolicyPlans) {
  const auto truth = frames("walkB", 300);
  const auto slow = scaled(generate_trace(TraceKind::k4G, 1), 0.1);
  const auto ud = run("TrackUD", truth, slow);
  ASSERT_GT(ud.offloads.size(), 2u);
  EXPECT_EQ(ud.offloads[0].mode, FrameMode::kMixed);
  const double limit = parse_policy("TrackUD").ud_threshold_intervals * 1000.0 / 30.0;
  int uniform = 0;
  for (std::size_t i = 1; i < ud.offloads.size(); ++i) {
    const bool slow_prev = ud.offloads[i - 1].e2e_ms > limit;
    EXPECT_EQ(ud.offloads[i].mode, slow_prev ? FrameMode::kUniform : FrameMode::kMixed) << i;
    uniform += ud.offloads[i].mode == FrameMode::kUniform;
  }
  EXPECT_GT(uniform, 0);
  const auto roi = run("TrackRoI", truth, generate_trace(TraceKind::k4G, 1));
  int masked = 0;
  for (const auto& o : roi.offloads) masked += o.mode == FrameMode::kMasked;
  EXPECT_GT(masked, 0);
  for (const auto& o : run("TrackB2B", truth, slow).offloads) {
    EXPECT_EQ(o.nd, 0);
    EXPECT_EQ(o.config.lambda_q, 95);
    EXPECT_EQ(o.branch, "fixed");
  }
}

TEST(Session, Deterministic) {
  const auto truth = frames("cycleS", 300);
  const auto trace = generate_trace(TraceKind::k4G, 9);
  const auto a = run("TrackRoI", truth, trace), b = run("TrackRoI", truth, trace);
  EXPECT_EQ(offload_log_csv(a), offload_log_csv(b));
  EXPECT_EQ(render_log_csv(a), render_log_csv(b));
}

TEST(Session, ViTMAlisNeedsArtifacts) {
  const auto truth = frames("walkS", 30);
  EXPECT_THROW(run("ViTMAlis", truth, generate_trace(TraceKind::k4G, 1)), ConfigError);
}

TEST(Policies, Parsing) {
  for (const auto& p : baseline_policies()) EXPECT_EQ(policy_name(parse_policy(policy_name(p))), policy_name(p));
  for (const auto& p : ablation_policies()) EXPECT_EQ(policy_name(parse_policy(policy_name(p))), policy_name(p));
  EXPECT_EQ(parse_policy("vitmalis_no_mlps").ablation, Ablation::kNoMlps);
  EXPECT_EQ(parse_policy("TRACKB2B").kind, PolicyKind::kTrackB2B);
  EXPECT_THROW(parse_policy("Exhaustive"), ConfigError);
  Policy p = parse_policy("TrackUD");
  p.ablation = Ablation::kNoMlps;
  EXPECT_THROW(validate(p), InvalidArgument);
  p = parse_policy("Back2Back");
  p.jpeg_quality = 0;
  EXPECT_THROW(validate(p), InvalidArgument);
  EXPECT_EQ(policy_candidates(parse_policy("ViTMAlis")).size(), 77u);
  EXPECT_EQ(policy_candidates(parse_policy("ViTMAlis-noDynaRes")).size(), 21u);
  for (const auto& c : policy_candidates(parse_policy("ViTMAlis-noRegType"))) EXPECT_NE(c.tau_d, 1);
}

}  // namespace
}  // namespace edgemix
