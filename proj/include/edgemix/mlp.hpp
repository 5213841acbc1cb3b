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

// Small fully connected regressor: rectified-linear hidden layers, identity
// output, per-feature standardization of inputs and target. Trained by
// mini-batch gradient descent with momentum on mean squared error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "edgemix/bytes.hpp"
#include "edgemix/error.hpp"
#include "edgemix/rng.hpp"

namespace edgemix {

struct MlpModel {
  std::vector<int> widths;               // {in, hidden..., 1}
  std::vector<Eigen::MatrixXd> weights;  // layer l maps widths[l] -> widths[l+1]
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  double target_mean = 0.0;
  double target_scale = 1.0;
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double validation_loss = std::numeric_limits<double>::quiet_NaN();

  int input_width() const noexcept { return widths.empty() ? 0 : widths.front(); }
};

// Zero weights, identity normalization.
inline MlpModel make_mlp(std::vector<int> widths) {
  if (widths.size() < 2 || widths.back() != 1) throw InvalidArgument("MLP widths must be {in, ..., 1}");
  for (int w : widths) {
    if (w < 1) throw InvalidArgument("MLP layer widths must be >= 1");
  }
  MlpModel m;
  m.widths = std::move(widths);
  for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
    m.weights.push_back(Eigen::MatrixXd::Zero(m.widths[l + 1], m.widths[l]));
    m.biases.push_back(Eigen::VectorXd::Zero(m.widths[l + 1]));
  }
  m.input_mean = Eigen::VectorXd::Zero(m.widths.front());
  m.input_scale = Eigen::VectorXd::Ones(m.widths.front());
  return m;
}

inline void validate(const MlpModel& m) {
  if (m.widths.size() < 2 || m.weights.size() + 1 != m.widths.size() || m.biases.size() != m.weights.size()) {
    throw InvalidArgument("MLP layer count mismatch");
  }
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    if (m.weights[l].rows() != m.widths[l + 1] || m.weights[l].cols() != m.widths[l] ||
        m.biases[l].size() != m.widths[l + 1]) {
      throw InvalidArgument("MLP layer " + std::to_string(l) + " shape mismatch");
    }
  }
  if (m.input_mean.size() != m.widths.front() || m.input_scale.size() != m.widths.front()) {
    throw InvalidArgument("MLP normalization size mismatch");
  }
  if (!m.input_mean.allFinite() || !m.input_scale.allFinite() || !std::isfinite(m.target_mean) ||
      !std::isfinite(m.target_scale)) {
    throw InvalidArgument("MLP normalization constants must be finite");
  }
}

// Columns are samples. Returns one output per column.
inline Eigen::RowVectorXd mlp_forward_batch(const MlpModel& m, const Eigen::MatrixXd& x) {
  if (x.rows() != m.input_width()) {
    throw InvalidArgument("mlp_forward: expected " + std::to_string(m.input_width()) + " features, got " +
                          std::to_string(x.rows()));
  }
  Eigen::MatrixXd a = (x.colwise() - m.input_mean).array().colwise() / m.input_scale.array();
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    Eigen::MatrixXd z = (m.weights[l] * a).colwise() + m.biases[l];
    if (l + 1 < m.weights.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return (a.row(0).array() * m.target_scale + m.target_mean).matrix();
}

inline double mlp_forward(const MlpModel& m, std::span<const double> features) {
  if (static_cast<int>(features.size()) != m.input_width()) {
    throw InvalidArgument("mlp_forward: expected " + std::to_string(m.input_width()) + " features, got " +
                          std::to_string(features.size()));
  }
  Eigen::MatrixXd x(features.size(), 1);
  for (std::size_t i = 0; i < features.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = features[i];
  return mlp_forward_batch(m, x)(0);
}

struct TrainOptions {
  std::vector<int> hidden{128, 64};
  int epochs = 200;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  double validation_fraction = 0.2;
  std::uint64_t seed = 1;
  std::size_t min_samples = 100;
};

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, SeqRng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
  }
  return idx;
}

inline double mse_normalized(const MlpModel& m, const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y) {
  if (x.cols() == 0) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::RowVectorXd pred = mlp_forward_batch(m, x);
  const double s = m.target_scale;
  return ((pred - y).array() / s).square().mean();
}

}  // namespace detail

// Rows of `features` are samples. The internal validation split is used for
// best-epoch selection; losses are reported in standardized target units.
inline MlpModel mlp_train(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                          const TrainOptions& opt = {}) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n == 0 || static_cast<std::size_t>(targets.size()) != n) {
    throw InvalidArgument("mlp_train: empty dataset or feature/target count mismatch");
  }
  if (n < opt.min_samples) {
    throw InvalidArgument("mlp_train: need at least " + std::to_string(opt.min_samples) + " samples, got " +
                          std::to_string(n));
  }
  if (!features.allFinite() || !targets.allFinite()) throw InvalidArgument("mlp_train: non-finite values");
  if (opt.epochs < 1 || opt.batch_size < 1 || !(opt.learning_rate > 0.0)) {
    throw InvalidArgument("mlp_train: bad optimizer options");
  }

  SeqRng rng(hash_mix({opt.seed, hash_name("mlp_train")}));
  const auto order = detail::shuffled_indices(n, rng);
  const auto n_val = static_cast<std::size_t>(std::floor(opt.validation_fraction * static_cast<double>(n)));
  const std::size_t n_train = n - n_val;
  const auto in = static_cast<int>(features.cols());

  Eigen::MatrixXd xt(in, n_train), xv(in, n_val);
  Eigen::RowVectorXd yt(n_train), yv(n_val);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(order[i]);
    if (i < n_train) {
      xt.col(static_cast<Eigen::Index>(i)) = features.row(r).transpose();
      yt(static_cast<Eigen::Index>(i)) = targets(r);
    } else {
      xv.col(static_cast<Eigen::Index>(i - n_train)) = features.row(r).transpose();
      yv(static_cast<Eigen::Index>(i - n_train)) = targets(r);
    }
  }

  std::vector<int> widths{in};
  widths.insert(widths.end(), opt.hidden.begin(), opt.hidden.end());
  widths.push_back(1);
  MlpModel m = make_mlp(widths);

  m.input_mean = xt.rowwise().mean();
  m.input_scale = ((xt.colwise() - m.input_mean).array().square().rowwise().mean()).sqrt();
  for (Eigen::Index i = 0; i < m.input_scale.size(); ++i) {
    if (!(m.input_scale(i) > 1e-12)) m.input_scale(i) = 1.0;
  }
  m.target_mean = yt.mean();
  const double yvar = (yt.array() - m.target_mean).square().mean();
  m.target_scale = yvar > 1e-24 ? std::sqrt(yvar) : 1.0;

  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.widths[l]));
    auto& w = m.weights[l];
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-limit, limit);
    }
  }
  if (!(yvar > 1e-24)) {
    // Constant target: a zero output layer predicts target_mean exactly.
    m.weights.back().setZero();
    m.biases.back().setZero();
    m.train_loss = m.validation_loss = 0.0;
    return m;
  }

  const Eigen::MatrixXd xtn = (xt.colwise() - m.input_mean).array().colwise() / m.input_scale.array();
  const Eigen::RowVectorXd ytn = (yt.array() - m.target_mean) / m.target_scale;

  const std::size_t layers = m.weights.size();
  std::vector<Eigen::MatrixXd> vw(layers), gw(layers);
  std::vector<Eigen::VectorXd> vb(layers), gb(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    vw[l] = Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols());
    vb[l] = Eigen::VectorXd::Zero(m.biases[l].size());
  }
  std::vector<Eigen::MatrixXd> act(layers + 1), pre(layers);

  MlpModel best = m;
  double best_val = std::numeric_limits<double>::infinity();
  double last_train = std::numeric_limits<double>::quiet_NaN();
  const auto bs = static_cast<std::size_t>(opt.batch_size);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    // Step decay at 50% and 75% of training.
    double lr = opt.learning_rate;
    if (epoch >= opt.epochs / 2) lr *= 0.3;
    if (epoch >= (3 * opt.epochs) / 4) lr *= 0.3;

    const auto perm = detail::shuffled_indices(n_train, rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_train; start += bs) {
      const std::size_t b = std::min(bs, n_train - start);
      act[0].resize(in, static_cast<Eigen::Index>(b));
      Eigen::RowVectorXd yb(b);
      for (std::size_t k = 0; k < b; ++k) {
        act[0].col(static_cast<Eigen::Index>(k)) = xtn.col(static_cast<Eigen::Index>(perm[start + k]));
        yb(static_cast<Eigen::Index>(k)) = ytn(static_cast<Eigen::Index>(perm[start + k]));
      }
      for (std::size_t l = 0; l < layers; ++l) {
        pre[l] = (m.weights[l] * act[l]).colwise() + m.biases[l];
        act[l + 1] = (l + 1 < layers) ? pre[l].cwiseMax(0.0) : pre[l];
      }
      Eigen::MatrixXd delta = act[layers] - yb;
      epoch_loss += delta.squaredNorm();
      delta *= 2.0 / static_cast<double>(b);
      for (std::size_t l = layers; l-- > 0;) {
        gw[l] = delta * act[l].transpose();
        gb[l] = delta.rowwise().sum();
        if (l > 0) {
          delta = (m.weights[l].transpose() * delta).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
      }
      for (std::size_t l = 0; l < layers; ++l) {
        vw[l] = opt.momentum * vw[l] - lr * gw[l];
        vb[l] = opt.momentum * vb[l] - lr * gb[l];
        m.weights[l] += vw[l];
        m.biases[l] += vb[l];
      }
    }
    last_train = epoch_loss / static_cast<double>(n_train);
    if (!std::isfinite(last_train)) throw InvalidArgument("mlp_train: training diverged");

    const double val = n_val > 0 ? detail::mse_normalized(m, xv, yv) : last_train;
    if (val < best_val) {
      best_val = val;
      best = m;
      best.train_loss = last_train;
    }
  }
  best.validation_loss = best_val;
  return best;
}

inline Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw InvalidArgument("ragged feature rows");
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return x;
}

// Container layout, big-endian:
//   "VMLP" | u8 version(1) | u8 layer_count L | L x u32 widths
//   | per layer: out*in f64 weights (row-major), out f64 biases
//   | in f64 input_mean | in f64 input_scale | f64 target_mean | f64 target_scale
//   | f64 train_loss | f64 validation_loss
inline constexpr std::uint8_t kMlpFormatVersion = 1;

inline std::vector<std::uint8_t> serialize_mlp(const MlpModel& m) {
  validate(m);
  ByteWriter w;
  w.raw("VMLP", 4);
  w.u8(kMlpFormatVersion);
  w.u8(static_cast<std::uint8_t>(m.widths.size()));
  for (int width : m.widths) w.u32(static_cast<std::uint32_t>(width));
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) w.f64(m.weights[l](r, c));
    }
    for (Eigen::Index r = 0; r < m.biases[l].size(); ++r) w.f64(m.biases[l](r));
  }
  for (Eigen::Index i = 0; i < m.input_mean.size(); ++i) w.f64(m.input_mean(i));
  for (Eigen::Index i = 0; i < m.input_scale.size(); ++i) w.f64(m.input_scale(i));
  w.f64(m.target_mean);
  w.f64(m.target_scale);
  w.f64(m.train_loss);
  w.f64(m.validation_loss);
  return w.take();
}

inline MlpModel deserialize_mlp(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  auto magic = r.bytes(4);
  if (std::string(magic.begin(), magic.end()) != "VMLP") throw ParseError("not a VMLP container");
  if (const auto v = r.u8(); v != kMlpFormatVersion) {
    throw ParseError("unsupported VMLP version " + std::to_string(v));
  }
  const int layers = r.u8();
  if (layers < 2) throw ParseError("VMLP: fewer than two layer widths");
  std::vector<int> widths;
  for (int i = 0; i < layers; ++i) {
    const auto width = r.u32();
    if (width == 0 || width > 65536) throw ParseError("VMLP: bad layer width");
    widths.push_back(static_cast<int>(width));
  }
  MlpModel m;
  try {
    m = make_mlp(widths);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("VMLP: ") + e.what());
  }
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (Eigen::Index row = 0; row < m.weights[l].rows(); ++row) {
      for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) m.weights[l](row, c) = r.f64();
    }
    for (Eigen::Index row = 0; row < m.biases[l].size(); ++row) m.biases[l](row) = r.f64();
  }
  for (Eigen::Index i = 0; i < m.input_mean.size(); ++i) m.input_mean(i) = r.f64();
  for (Eigen::Index i = 0; i < m.input_scale.size(); ++i) m.input_scale(i) = r.f64();
  m.target_mean = r.f64();
  m.target_scale = r.f64();
  m.train_loss = r.f64();
  m.validation_loss = r.f64();
  if (!r.done()) throw ParseError("VMLP: trailing bytes");
  try {
    validate(m);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("VMLP: ") + e.what());
  }
  return m;
}

inline void save_mlp(const MlpModel& m, const std::string& path) {
  const auto bytes = serialize_mlp(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline MlpModel load_mlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_mlp(bytes);
}

}  // namespace edgemix
