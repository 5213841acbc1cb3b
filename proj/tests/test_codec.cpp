#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "edgemix/box.hpp"
#include "edgemix/bytes.hpp"
#include "edgemix/mlp.hpp"
#include "edgemix/rng.hpp"

namespace edgemix {
namespace {

TEST(Rng, CounterRngIsPure) {
  const CounterRng a(hash_mix({1, 2, 3})), b(hash_mix({1, 2, 3}));
  for (std::uint64_t i = 0; i < 1000; ++i) {
    ASSERT_EQ(a.uniform(i), b.uniform(i));
    ASSERT_GE(a.uniform(i), 0.0);
    ASSERT_LT(a.uniform(i), 1.0);
    ASSERT_LE(std::abs(a.clipped_normal(i, 2.0)), 2.0);
  }
  EXPECT_NE(CounterRng(hash_mix({1, 2, 3})).uniform(0), CounterRng(hash_mix({1, 2, 4})).uniform(0));
}

TEST(Rng, UniformMoments) {
  SeqRng r(5);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12.0, 0.002);

  const CounterRng c(9);
  double ns = 0.0, ns2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = c.normal(static_cast<std::uint64_t>(i));
    ns += z;
    ns2 += z * z;
  }
  EXPECT_NEAR(ns / n, 0.0, 0.01);
  EXPECT_NEAR(ns2 / n, 1.0, 0.02);
}

TEST(Rng, UniformIntCoversClosedRange) {
  SeqRng r(11);
  std::set<int> seen;
  for (int i = 0; i < 2000; ++i) {
    const int v = r.uniform_int(3, 7);
    ASSERT_GE(v, 3);
    ASSERT_LE(v, 7);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Rng, NameHashIsStable) {
  EXPECT_EQ(hash_name(""), 0xCBF29CE484222325ULL);
  EXPECT_EQ(hash_name("a"), 0xAF63DC4C8601EC8CULL);
  EXPECT_NE(hash_name("walkS"), hash_name("walkR"));
}

TEST(Bytes, BigEndianRoundTrip) {
  ByteWriter w;
  w.u8(0xAB);
  w.u16(0x1234);
  w.u32(0xDEADBEEF);
  w.u64(0x0102030405060708ULL);
  w.f32(1.5f);
  w.f64(-2.25);
  const auto& d = w.data();
  ASSERT_EQ(d.size(), 1u + 2 + 4 + 8 + 4 + 8);
  EXPECT_EQ(d[1], 0x12);
  EXPECT_EQ(d[2], 0x34);
  EXPECT_EQ(d[3], 0xDE);
  EXPECT_EQ(d[6], 0xEF);
  ByteReader r(d);
  EXPECT_EQ(r.u8(), 0xAB);
  EXPECT_EQ(r.u16(), 0x1234);
  EXPECT_EQ(r.u32(), 0xDEADBEEFu);
  EXPECT_EQ(r.u64(), 0x0102030405060708ULL);
  EXPECT_EQ(r.f32(), 1.5f);
  EXPECT_EQ(r.f64(), -2.25);
  EXPECT_TRUE(r.done());
  EXPECT_THROW(r.u8(), ParseError);
}

TEST(Box, IouAndClip) {
  const Box a{0, 0, 10, 10}, b{5, 0, 10, 10};
  EXPECT_DOUBLE_EQ(intersection_area(a, b), 50.0);
  EXPECT_DOUBLE_EQ(iou(a, b), 50.0 / 150.0);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, Box{20, 20, 5, 5}), 0.0);
  EXPECT_FALSE(overlaps(a, Box{10, 0, 5, 5}));
  const auto c = clip_box(Box{-5, -5, 10, 10}, 100, 100);
  ASSERT_TRUE(c);
  EXPECT_EQ(*c, (Box{0, 0, 5, 5}));
  EXPECT_FALSE(clip_box(Box{-20, 0, 10, 10}, 100, 100));
}

TEST(Mlp, ZeroWeightsGiveFinalBias) {
  auto m = make_mlp({3, 4, 1});
  m.biases.back()(0) = 0.75;
  const std::vector<double> x{1.0, -2.0, 3.0};
  EXPECT_DOUBLE_EQ(mlp_forward(m, x), 0.75);
}

TEST(Mlp, HandComputedSinglePath) {
  auto m = make_mlp({1, 1, 1});
  m.weights[0](0, 0) = 2.0;
  m.biases[0](0) = 1.0;
  m.weights[1](0, 0) = 3.0;
  m.biases[1](0) = 0.5;
  EXPECT_DOUBLE_EQ(mlp_forward(m, std::vector<double>{2.0}), 3.0 * 5.0 + 0.5);
  EXPECT_DOUBLE_EQ(mlp_forward(m, std::vector<double>{-1.0}), 0.5);  // ReLU clips -1
  m.input_mean(0) = 1.0;
  m.input_scale(0) = 2.0;
  m.target_mean = 10.0;
  m.target_scale = 2.0;
  // normalized input (3 - 1) / 2 = 1 -> 3 * 3 + 0.5 = 9.5 -> 9.5 * 2 + 10
  EXPECT_DOUBLE_EQ(mlp_forward(m, std::vector<double>{3.0}), 29.0);
  EXPECT_THROW(mlp_forward(m, std::vector<double>{1.0, 2.0}), InvalidArgument);
}

TEST(Mlp, BatchEqualsSingle) {
  auto m = make_mlp({2, 5, 3, 1});
  SeqRng r(4);
  for (auto& w : m.weights) w = w.unaryExpr([&](double) { return r.uniform(-1.0, 1.0); });
  for (auto& b : m.biases) b = b.unaryExpr([&](double) { return r.uniform(-1.0, 1.0); });
  Eigen::MatrixXd x(2, 20);
  for (int i = 0; i < 20; ++i) {
    x(0, i) = r.uniform(-3, 3);
    x(1, i) = r.uniform(-3, 3);
  }
  const auto batch = mlp_forward_batch(m, x);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> f{x(0, i), x(1, i)};
    EXPECT_NEAR(batch(i), mlp_forward(m, f), 1e-12);
  }
}

TEST(Mlp, LearnsLinearTarget) {
  const int n = 400;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  SeqRng r(1);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = r.uniform(-5.0, 5.0);
    y(i) = 2.0 * x(i, 0);
  }
  TrainOptions opt;
  opt.hidden = {16, 8};
  opt.epochs = 150;
  const auto m = mlp_train(x, y, opt);
  double ss_res = 0.0, ss_tot = 0.0, mean = y.mean();
  for (int i = 0; i < n; ++i) {
    const double p = mlp_forward(m, std::vector<double>{x(i, 0)});
    ss_res += (p - y(i)) * (p - y(i));
    ss_tot += (y(i) - mean) * (y(i) - mean);
  }
  EXPECT_GE(1.0 - ss_res / ss_tot, 0.99);
  EXPECT_TRUE(std::isfinite(m.train_loss));
  EXPECT_TRUE(std::isfinite(m.validation_loss));
}

TEST(Mlp, ConstantTargetConverges) {
  const int n = 200;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(n, 4.2);
  SeqRng r(2);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = r.uniform();
    x(i, 1) = r.uniform();
  }
  TrainOptions opt;
  opt.hidden = {8};
  opt.epochs = 20;
  const auto m = mlp_train(x, y, opt);
  EXPECT_NEAR(mlp_forward(m, std::vector<double>{0.3, 0.6}), 4.2, 1e-6);
}

TEST(Mlp, TrainingIsDeterministic) {
  const int n = 150;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  SeqRng r(3);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) x(i, k) = r.uniform();
    y(i) = x(i, 0) * x(i, 1) - x(i, 2);
  }
  TrainOptions opt;
  opt.hidden = {12, 6};
  opt.epochs = 10;
  EXPECT_EQ(serialize_mlp(mlp_train(x, y, opt)), serialize_mlp(mlp_train(x, y, opt)));
}

TEST(Mlp, RejectsBadData) {
  Eigen::MatrixXd x(50, 1);
  x.setZero();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(50);
  EXPECT_THROW(mlp_train(x, y), InvalidArgument);  // too few samples
  Eigen::MatrixXd big(200, 1);
  big.setZero();
  Eigen::VectorXd yb = Eigen::VectorXd::Zero(200);
  yb(3) = std::nan("");
  EXPECT_THROW(mlp_train(big, yb), InvalidArgument);
  EXPECT_THROW(make_mlp({3, 2}), InvalidArgument);
}

TEST(Mlp, ContainerRoundTrip) {
  auto m = make_mlp({5, 128, 64, 1});
  SeqRng r(8);
  for (auto& w : m.weights) w = w.unaryExpr([&](double) { return r.normal(); });
  m.input_mean.setConstant(0.5);
  m.target_scale = 3.0;
  const auto bytes = serialize_mlp(m);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "VMLP");
  EXPECT_EQ(bytes[4], kMlpFormatVersion);
  EXPECT_EQ(bytes[5], 4);
  const auto back = deserialize_mlp(bytes);
  EXPECT_EQ(serialize_mlp(back), bytes);

  const auto path = (std::filesystem::temp_directory_path() / "edgemix_test_model.vmlp").string();
  save_mlp(m, path);
  EXPECT_EQ(serialize_mlp(load_mlp(path)), bytes);
  std::filesystem::remove(path);

  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_mlp(bad), ParseError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(deserialize_mlp(truncated), ParseError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_mlp(trailing), ParseError);
  EXPECT_THROW(load_mlp("/nonexistent/model.vmlp"), ConfigError);
}

}  // namespace
}  // namespace edgemix
