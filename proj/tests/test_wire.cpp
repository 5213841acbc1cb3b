#include <gtest/gtest.h>

#include <thread>

#include "edgemix/experiment.hpp"
#include "edgemix/wire.hpp"

namespace edgemix {
namespace {

using namespace edgemix::wire;

const GridGeometry kGeom = default_geometry();

TEST(WireCodec, RequestLayout) {
  DownsampleMask m(28);
  m.set(0);
  m.set(9);
  m.set(27);
  const OffloadRequest req{7, {{2, 95, 3}, FrameMode::kMixed, m}, 2469};
  const auto body = encode(req);
  const std::vector<std::uint8_t> expect{0x01, 0, 0, 0, 7, 2, 95, 3, 0, 4, 0x80, 0x40, 0x00, 0x10, 0, 0, 0x09, 0xA5};
  EXPECT_EQ(body, expect);
  const auto back = decode_request(body, 28);
  EXPECT_EQ(back.frame_id, 7u);
  EXPECT_EQ(back.plan.config, req.plan.config);
  EXPECT_EQ(back.plan.mode, FrameMode::kMixed);
  EXPECT_EQ(mask_to_hex(back.plan.mask), mask_to_hex(m));
  EXPECT_DOUBLE_EQ(back.payload_kib(), 246.9);
}

TEST(WireCodec, ModeFlags) {
  OffloadRequest masked{1, {{2, 95, 0}, FrameMode::kMasked, DownsampleMask(28)}, 10};
  auto b = encode(masked);
  EXPECT_EQ(b[5], 0x82);
  EXPECT_EQ(decode_request(b, 28).plan.mode, FrameMode::kMasked);
  OffloadRequest uni{1, uniform_plan(kGeom, 95), 10};
  b = encode(uni);
  EXPECT_EQ(b[5], 0x40);
  EXPECT_EQ(decode_request(b, 28).plan.mode, FrameMode::kUniform);
  b[5] = 0xC2;
  EXPECT_THROW(decode_request(b, 28), ParseError);
}

TEST(WireCodec, ResponseRoundTrip) {
  const InferenceResponse resp{42, {{3, {1.5, 2.25, 100.0, 50.5}}, {9, {1000.0, 20.0, 33.0, 44.0}}}, 281123};
  const auto body = encode(resp);
  EXPECT_EQ(body.size(), 1u + 4 + 2 + 2 * 20 + 4);
  EXPECT_EQ(frame_type(body), kInferenceResponse);
  const auto back = decode_response(body);
  EXPECT_EQ(back.frame_id, 42u);
  EXPECT_EQ(back.boxes, resp.boxes);
  EXPECT_DOUBLE_EQ(back.inference_ms(), 281.123);
}

TEST(WireCodec, MalformedFrames) {
  const OffloadRequest req{7, {{2, 95, 3}, FrameMode::kMixed, DownsampleMask(28)}, 100};
  auto body = encode(req);
  for (std::size_t cut = 1; cut < body.size(); ++cut) {
    ASSERT_THROW(decode_request(std::span(body).first(cut), 28), ParseError) << cut;
  }
  auto longer = body;
  longer.push_back(0);
  EXPECT_THROW(decode_request(longer, 28), ParseError);
  EXPECT_THROW(decode_request(body, 40), ParseError);
  auto bad_beta = body;
  bad_beta[7] = 9;
  EXPECT_THROW(decode_request(bad_beta, 28), ParseError);
  EXPECT_THROW(decode_response(body), ParseError);
  EXPECT_THROW(frame_type({}), ParseError);
  const auto resp = encode(InferenceResponse{1, {{1, {0, 0, 1, 1}}}, 5});
  for (std::size_t cut = 1; cut < resp.size(); ++cut) {
    ASSERT_THROW(decode_response(std::span(resp).first(cut)), ParseError) << cut;
  }
}

TEST(WireCodec, Quantizers) {
  EXPECT_EQ(payload_to_wire(246.9), 2469u);
  EXPECT_EQ(inference_to_wire(103.604), 103604u);
  EXPECT_THROW(payload_to_wire(-1.0), InvalidArgument);
  for (int k = 0; k < 400000; k += 7) {
    const double ms = k / 1000.0;
    const InferenceResponse r{0, {}, inference_to_wire(ms)};
    ASSERT_EQ(r.inference_ms(), ms);
  }
}

TEST(WireLoopback, FramesCrossTheSocket) {
  Listener l(0);
  std::vector<std::uint8_t> got;
  std::thread srv([&] {
    Socket s = l.accept();
    auto f = recv_frame(s);
    got = *f;
    send_frame(s, *f);
    EXPECT_FALSE(recv_frame(s).has_value());
  });
  {
    Socket c = connect_to("127.0.0.1", l.port());
    const std::vector<std::uint8_t> body{1, 2, 3, 4, 5};
    send_frame(c, body);
    EXPECT_EQ(*recv_frame(c), body);
  }
  srv.join();
  EXPECT_EQ(got, (std::vector<std::uint8_t>{1, 2, 3, 4, 5}));
}

TEST(WireLoopback, SessionMatchesInProcess) {
  RunEnvironment env;
  env.max_frames = 100;
  const RunSpec spec{parse_policy("TrackRoI"), "walkB", "4g:3", 1};
  const auto local = run_experiment(spec, env, nullptr);

  const auto truth = truth_for(spec, env);
  const auto sc = session_config_for(spec, env);
  Listener l(0);
  std::size_t served = 0;
  std::thread srv([&] {
    InProcessBackend backend(sc.server, env.geom, truth);
    Socket s = l.accept();
    served = serve_connection(s, backend, env.geom);
  });
  std::string decisions, offloads, renders;
  {
    SocketBackend remote(connect_to("127.0.0.1", l.port()), env.geom);
    const auto r = run_experiment(spec, env, nullptr, &remote);
    decisions = decision_log_csv(r.session);
    offloads = offload_log_csv(r.session);
    renders = render_log_csv(r.session);
  }
  srv.join();
  EXPECT_EQ(decisions, decision_log_csv(local.session));
  EXPECT_EQ(offloads, offload_log_csv(local.session));
  EXPECT_EQ(renders, render_log_csv(local.session));
  // The last request may still be in flight when the scene ends.
  EXPECT_GE(served, local.session.offloads.size());
  EXPECT_LE(served, local.session.offloads.size() + 1);
}

TEST(WireLoopback, ConnectFailureIsTransportError) {
  std::uint16_t port = 0;
  {
    Listener l(0);
    port = l.port();
  }
  EXPECT_THROW(connect_to("127.0.0.1", port), TransportError);
}

}  // namespace
}  // namespace edgemix
