#include <gtest/gtest.h>

#include <filesystem>

#include "edgemix/estimator.hpp"
#include "edgemix/serversim.hpp"

namespace edgemix {
namespace {

EncodeProfile flat_profile(double ms, int max_nd = 28) {
  EncodeProfile p;
  p.max_nd = max_nd;
  for (int b = 0; b <= max_nd; b += 2) {
    for (int q : kLambdaSet) p.table[{b, q}] = ms + b + q / 100.0;
  }
  p.dec_mean_ms = 5.0;
  return p;
}

TEST(Configuration, Validation) {
  EXPECT_NO_THROW(validate(Configuration{0, 95, 0}));
  EXPECT_NO_THROW(validate(Configuration{2, 70, 4}));
  EXPECT_THROW(validate(Configuration{0, 95, 1}), InvalidArgument);
  EXPECT_THROW(validate(Configuration{3, 95, 0}), InvalidArgument);
  EXPECT_THROW(validate(Configuration{1, 95, 5}), InvalidArgument);
  EXPECT_THROW(validate(Configuration{1, 101, 0}), InvalidArgument);
  EXPECT_EQ(to_string(Configuration{2, 85, 3}), "t2_q85_b3");
}

TEST(Latency, SumOfComponents) {
  LatencyEstimate e{20, 50, 5, 160, 35};
  EXPECT_EQ(e.total(), 270.0);
}

TEST(Latency, TransmissionUnits) {
  EXPECT_DOUBLE_EQ(transmission_ms(125.0, 10.0), 102.4);
}

TEST(Latency, EstimateMatchesParts) {
  const auto prof = flat_profile(10.0);
  const ServerProfile srv;
  InferenceDelayModels inf;
  inf.per_beta = srv.inference;
  const NetEstimate net{20.0, 40.0};
  for (const Configuration c : {Configuration{0, 100, 0}, Configuration{2, 80, 3}, Configuration{1, 90, 1}}) {
    const int nd = c.tau_d == 0 ? 0 : 13;
    const auto e = estimate_latency(prof, inf, net, c, nd, 120.0);
    EXPECT_EQ(e.enc_ms, prof.lookup(nd, c.lambda_q));
    EXPECT_EQ(e.upload_ms, transmission_ms(120.0, 20.0));
    EXPECT_EQ(e.dec_ms, 5.0);
    EXPECT_EQ(e.inf_ms, inf.predict(c.beta, nd));
    EXPECT_EQ(e.rtt_ms, 40.0);
    EXPECT_EQ(e.total(), e.enc_ms + e.upload_ms + e.dec_ms + e.inf_ms + e.rtt_ms);
  }
  EXPECT_DOUBLE_EQ(inf.predict(0, 0), 281.0);
}

TEST(Latency, MissingProfileEntry) {
  auto prof = flat_profile(10.0);
  prof.table.erase({4, 90});
  EXPECT_THROW(prof.lookup(4, 90), UnsupportedConfiguration);
  EXPECT_THROW(prof.lookup(0, 72), UnsupportedConfiguration);
  EXPECT_THROW(validate(prof), InvalidArgument);
  EXPECT_THROW(InferenceDelayModels{}.predict(5, 0), UnsupportedConfiguration);
}

TEST(EncodeProfile, NearestBucket) {
  const auto p = flat_profile(0.0);
  EXPECT_EQ(p.bucket_of(0), 0);
  EXPECT_EQ(p.bucket_of(3), 4);  // ties round away from zero
  EXPECT_EQ(p.bucket_of(5), 6);
  EXPECT_EQ(p.bucket_of(28), 28);
  EXPECT_EQ(p.bucket_of(40), 28);
}

TEST(EncodeProfile, CsvRoundTrip) {
  const auto p = flat_profile(7.25);
  const auto path = (std::filesystem::temp_directory_path() / "edgemix_enc.csv").string();
  save_encode_profile_csv(p, path);
  const auto q = load_encode_profile_csv(path, p.dec_mean_ms);
  EXPECT_EQ(q.table, p.table);
  EXPECT_EQ(q.bucket_step, 2);
  EXPECT_EQ(q.max_nd, 28);
  std::filesystem::remove(path);
  EXPECT_THROW(load_encode_profile_csv("/nonexistent.csv", 0), ConfigError);
}

TEST(InferenceModels, TrueModelsAreMonotone) {
  InferenceDelayModels srv;
  srv.per_beta = ServerProfile{}.inference;
  for (int b = 0; b < kBetaCount; ++b) {
    EXPECT_GT(srv.per_beta[b].intercept, 0.0);
    EXPECT_LE(srv.per_beta[b].slope, 0.0);
    for (int nd = 1; nd <= 28; ++nd) {
      EXPECT_LE(srv.predict(b, nd), srv.predict(b, nd - 1));
      if (b > 0) {
        EXPECT_GE(srv.predict(b - 1, nd), srv.predict(b, nd));
      }
    }
  }
  // All-downsampled 1080p at the latest restoration point.
  EXPECT_NEAR(srv.predict(4, 28), 100.0, 5.0);
}

TEST(InferenceModels, JsonRoundTrip) {
  InferenceDelayModels srv;
  srv.per_beta = ServerProfile{}.inference;
  const auto back = inference_models_from_json(to_json(srv));
  for (int b = 0; b < kBetaCount; ++b) {
    EXPECT_EQ(back.per_beta[b].intercept, srv.per_beta[b].intercept);
    EXPECT_EQ(back.per_beta[b].slope, srv.per_beta[b].slope);
  }
  EXPECT_THROW(inference_models_from_json(nlohmann::json::array()), ParseError);
}

TEST(NetEstimate, TwoMostRecent) {
  std::vector<NetObservation> h;
  const NetEstimate prior{};
  EXPECT_EQ(update_net_estimate(h).throughput_mbps, 20.0);
  EXPECT_EQ(update_net_estimate(h).rtt_ms, 40.0);
  h.push_back({12, 30});
  EXPECT_EQ(update_net_estimate(h, prior).throughput_mbps, 12.0);
  h = {{99, 99}, {10, 20}, {30, 40}};
  const auto e = update_net_estimate(h, prior);
  EXPECT_EQ(e.throughput_mbps, 20.0);
  EXPECT_EQ(e.rtt_ms, 30.0);
  const std::vector<NetObservation> constant(5, {17.5, 33.0});
  EXPECT_EQ(update_net_estimate(constant).throughput_mbps, 17.5);
  EXPECT_EQ(update_net_estimate(constant).rtt_ms, 33.0);
}

TEST(Estimates, Clamping) {
  auto size = make_mlp({kSizeFeatureCount, 1});
  size.biases[0](0) = -50.0;
  EXPECT_EQ(estimate_size(size, Configuration{0, 95, 0}, 0, 0.0, 0.0), kMinSizeKib);
  size.biases[0](0) = 80.0;
  EXPECT_EQ(estimate_size(size, Configuration{0, 95, 0}, 0, 0.0, 0.0), 80.0);

  auto acc = make_mlp({kAccuracyFeatureCount, 1});
  acc.biases[0](0) = 1.07;
  EXPECT_EQ(estimate_accuracy(acc, Configuration{0, 95, 0}, 0, 0, 0, 0, 0), 1.0);
  acc.biases[0](0) = -0.2;
  EXPECT_EQ(estimate_accuracy(acc, Configuration{0, 95, 0}, 0, 0, 0, 0, 0), 0.0);
  EXPECT_EQ(clamp_size(std::nan("")), kMinSizeKib);
  EXPECT_EQ(clamp_accuracy(std::nan("")), 0.0);
}

TEST(Estimates, FeatureOrder) {
  const Configuration c{2, 85, 3};
  const auto s = size_features(c, 7, 0.1, 0.2);
  EXPECT_EQ(s, (std::array<double, 5>{2, 7, 0.1, 0.2, 85}));
  const auto a = accuracy_features(c, 7, 0.1, 0.2, 0.3, 0.4);
  EXPECT_EQ(a, (std::array<double, 8>{2, 85, 3, 7, 0.1, 0.2, 0.3, 0.4}));
}

TEST(Estimates, PredictorMatchesScalarPath) {
  auto size = make_mlp({kSizeFeatureCount, 4, 1});
  auto acc = make_mlp({kAccuracyFeatureCount, 4, 1});
  SeqRng r(6);
  for (auto* m : {&size, &acc}) {
    for (auto& w : m->weights) w = w.unaryExpr([&](double) { return r.uniform(-0.5, 0.5); });
    m->biases.back()(0) = 0.5;
  }
  const MlpPredictor pred(size, acc);
  std::vector<CandidateFeatures> cands;
  for (int i = 0; i < 10; ++i) cands.push_back({{2, 70 + 5 * (i % 7), i % 5}, i, 0.1 * i, 0.01 * i, 0.2, 0.1});
  std::vector<double> s, a;
  pred.predict(cands, s, a);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const auto& c = cands[i];
    EXPECT_NEAR(s[i], estimate_size(size, c.config, c.nd, c.md, c.mf), 1e-12);
    EXPECT_NEAR(a[i], estimate_accuracy(acc, c.config, c.nd, c.md, c.mf, c.mean_rho, c.std_rho), 1e-12);
  }
  EXPECT_THROW(MlpPredictor(acc, size), ConfigError);
}

}  // namespace
}  // namespace edgemix
