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

// Performance estimator: encode/decode/inference delay models, the network
// estimate, and the content-aware size and accuracy predictors.
//
// Units: payload sizes are KiB (1024 bytes), throughput is Mbps (10^6 bit/s),
// delays are milliseconds.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgemix/error.hpp"
#include "edgemix/mlp.hpp"

namespace edgemix {

inline constexpr std::array<int, 7> kLambdaSet{70, 75, 80, 85, 90, 95, 100};
inline constexpr std::array<int, 5> kBetaSet{0, 1, 2, 3, 4};
inline constexpr int kBetaCount = 5;

// One offload decision: downsampling type, JPEG quality, restoration point.
struct Configuration {
  int tau_d = 0;
  int lambda_q = 95;
  int beta = 0;

  friend bool operator==(const Configuration&, const Configuration&) = default;
  friend auto operator<=>(const Configuration&, const Configuration&) = default;
};

inline void validate(const Configuration& c) {
  if (c.tau_d < 0 || c.tau_d > 2) throw InvalidArgument("tau_d must be in {0,1,2}");
  if (c.lambda_q < 1 || c.lambda_q > 100) throw InvalidArgument("lambda must be in [1,100]");
  if (c.beta < 0 || c.beta >= kBetaCount) throw InvalidArgument("beta must be in {0..4}");
  if (c.tau_d == 0 && c.beta != 0) throw InvalidArgument("beta must be 0 when tau_d is 0");
}

inline std::string to_string(const Configuration& c) {
  return "t" + std::to_string(c.tau_d) + "_q" + std::to_string(c.lambda_q) + "_b" + std::to_string(c.beta);
}

// Profiled on-device encode delay T_enc(N_d, lambda), N_d bucketed.
struct EncodeProfile {
  int bucket_step = 2;
  int max_nd = 0;
  std::map<std::pair<int, int>, double> table;  // (bucket start, lambda) -> ms
  double dec_mean_ms = 0.0;

  int bucket_of(int nd) const noexcept {
    const int nearest = static_cast<int>(std::lround(static_cast<double>(nd) / bucket_step)) * bucket_step;
    const int last = (max_nd / bucket_step) * bucket_step;
    return std::clamp(nearest, 0, last);
  }

  double lookup(int nd, int lambda_q) const {
    const auto it = table.find({bucket_of(nd), lambda_q});
    if (it == table.end()) {
      throw UnsupportedConfiguration("no encode profile entry for N_d=" + std::to_string(nd) +
                                     " lambda=" + std::to_string(lambda_q));
    }
    return it->second;
  }
};

inline void validate(const EncodeProfile& p) {
  if (p.bucket_step < 1) throw InvalidArgument("encode profile bucket step must be >= 1");
  for (const auto& [key, ms] : p.table) {
    if (!(ms >= 0.0)) throw InvalidArgument("encode profile entries must be >= 0");
  }
  for (int b = 0; b <= p.max_nd; b += p.bucket_step) {
    for (int q : kLambdaSet) {
      if (!p.table.contains({b, q})) {
        throw InvalidArgument("encode profile misses bucket " + std::to_string(b) + " lambda " + std::to_string(q));
      }
    }
  }
  if (!(p.dec_mean_ms >= 0.0)) throw InvalidArgument("decode mean must be >= 0");
}

// CSV `n_d,lambda,enc_ms`; n_d is the bucket start.
inline void save_encode_profile_csv(const EncodeProfile& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "n_d,lambda,enc_ms\n";
  out.precision(17);
  for (const auto& [key, ms] : p.table) out << key.first << ',' << key.second << ',' << ms << '\n';
}

inline EncodeProfile load_encode_profile_csv(const std::string& path, double dec_mean_ms) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "n_d,lambda,enc_ms") throw ParseError(path + ": bad header");
  EncodeProfile p;
  p.dec_mean_ms = dec_mean_ms;
  std::vector<int> buckets;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int nd = 0, q = 0;
    double ms = 0.0;
    char c1 = 0, c2 = 0;
    if (!(ss >> nd >> c1 >> q >> c2 >> ms) || c1 != ',' || c2 != ',') {
      throw ParseError(path + ": malformed row " + std::to_string(row));
    }
    p.table[{nd, q}] = ms;
    buckets.push_back(nd);
  }
  if (buckets.empty()) throw ParseError(path + ": no rows");
  std::sort(buckets.begin(), buckets.end());
  buckets.erase(std::unique(buckets.begin(), buckets.end()), buckets.end());
  p.bucket_step = buckets.size() > 1 ? buckets[1] - buckets[0] : 1;
  p.max_nd = buckets.back();
  return p;
}

struct LinearDelay {
  double intercept = 0.0;  // ms
  double slope = 0.0;      // ms per downsampled region
};

// LM_inf: one line per restoration point.
struct InferenceDelayModels {
  std::array<LinearDelay, kBetaCount> per_beta{};

  double predict(int beta, int nd) const {
    if (beta < 0 || beta >= kBetaCount) throw UnsupportedConfiguration("no inference model for beta " + std::to_string(beta));
    return per_beta[beta].intercept + per_beta[beta].slope * nd;
  }
};

struct NetEstimate {
  double throughput_mbps = 20.0;
  double rtt_ms = 40.0;
};

struct NetObservation {
  double throughput_mbps = 0.0;
  double rtt_ms = 0.0;
};

// Mean of the (at most) two most recent observations; `prior` before any.
inline NetEstimate update_net_estimate(std::span<const NetObservation> history, NetEstimate prior = {}) {
  if (history.empty()) return prior;
  const std::size_t k = std::min<std::size_t>(2, history.size());
  double tput = 0.0, rtt = 0.0;
  for (std::size_t i = history.size() - k; i < history.size(); ++i) {
    tput += history[i].throughput_mbps;
    rtt += history[i].rtt_ms;
  }
  return {tput / static_cast<double>(k), rtt / static_cast<double>(k)};
}

inline double transmission_ms(double size_kib, double throughput_mbps) {
  return size_kib * 1024.0 * 8.0 / (throughput_mbps * 1e6) * 1000.0;
}

// Feature order (size):     tau_d, N_d, m_d, m_f, lambda
// Feature order (accuracy): tau_d, lambda, beta, N_d, m_d, m_f, mean_rho, std_rho
inline constexpr int kSizeFeatureCount = 5;
inline constexpr int kAccuracyFeatureCount = 8;

inline std::array<double, kSizeFeatureCount> size_features(const Configuration& c, int nd, double md, double mf) {
  return {static_cast<double>(c.tau_d), static_cast<double>(nd), md, mf, static_cast<double>(c.lambda_q)};
}

inline std::array<double, kAccuracyFeatureCount> accuracy_features(const Configuration& c, int nd, double md,
                                                                    double mf, double mean_rho, double std_rho) {
  return {static_cast<double>(c.tau_d), static_cast<double>(c.lambda_q), static_cast<double>(c.beta),
          static_cast<double>(nd), md, mf, mean_rho, std_rho};
}

inline constexpr double kMinSizeKib = 1.0;

inline double clamp_size(double kib) { return std::isfinite(kib) ? std::max(kMinSizeKib, kib) : kMinSizeKib; }
inline double clamp_accuracy(double a) { return std::isfinite(a) ? std::clamp(a, 0.0, 1.0) : 0.0; }

inline double estimate_size(const MlpModel& size_model, const Configuration& c, int nd, double md, double mf) {
  const auto f = size_features(c, nd, md, mf);
  return clamp_size(mlp_forward(size_model, f));
}

inline double estimate_accuracy(const MlpModel& acc_model, const Configuration& c, int nd, double md, double mf,
                                double mean_rho, double std_rho) {
  const auto f = accuracy_features(c, nd, md, mf, mean_rho, std_rho);
  return clamp_accuracy(mlp_forward(acc_model, f));
}

struct LatencyEstimate {
  double enc_ms = 0.0;
  double upload_ms = 0.0;
  double dec_ms = 0.0;
  double inf_ms = 0.0;
  double rtt_ms = 0.0;

  // Summed left to right in the order enc, upload, dec, inf, rtt.
  double total() const noexcept { return enc_ms + upload_ms + dec_ms + inf_ms + rtt_ms; }
};

inline LatencyEstimate estimate_latency(const EncodeProfile& profile, const InferenceDelayModels& inf,
                                        const NetEstimate& net, const Configuration& c, int nd, double size_kib) {
  LatencyEstimate e;
  e.enc_ms = profile.lookup(nd, c.lambda_q);
  e.upload_ms = transmission_ms(size_kib, net.throughput_mbps);
  e.dec_ms = profile.dec_mean_ms;
  e.inf_ms = inf.predict(c.beta, nd);
  e.rtt_ms = net.rtt_ms;
  return e;
}

// Content features of one candidate on the current frame.
struct CandidateFeatures {
  Configuration config;
  int nd = 0;
  double md = 0.0;
  double mf = 0.0;
  double mean_rho = 0.0;
  double std_rho = 0.0;
};

// Size and accuracy predictor behind the estimator; the learned models or an
// offline-mean table.
class ContentPredictor {
 public:
  virtual ~ContentPredictor() = default;
  virtual void predict(std::span<const CandidateFeatures> candidates, std::vector<double>& size_kib,
                       std::vector<double>& accuracy) const = 0;
};

class MlpPredictor final : public ContentPredictor {
 public:
  MlpPredictor(MlpModel size_model, MlpModel acc_model)
      : size_(std::move(size_model)), acc_(std::move(acc_model)) {
    validate(size_);
    validate(acc_);
    if (size_.input_width() != kSizeFeatureCount || acc_.input_width() != kAccuracyFeatureCount) {
      throw ConfigError("size/accuracy models have the wrong input width");
    }
  }

  void predict(std::span<const CandidateFeatures> cands, std::vector<double>& size_kib,
               std::vector<double>& accuracy) const override {
    const auto n = static_cast<Eigen::Index>(cands.size());
    Eigen::MatrixXd xs(kSizeFeatureCount, n), xa(kAccuracyFeatureCount, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& c = cands[static_cast<std::size_t>(i)];
      const auto fs = size_features(c.config, c.nd, c.md, c.mf);
      const auto fa = accuracy_features(c.config, c.nd, c.md, c.mf, c.mean_rho, c.std_rho);
      for (int k = 0; k < kSizeFeatureCount; ++k) xs(k, i) = fs[k];
      for (int k = 0; k < kAccuracyFeatureCount; ++k) xa(k, i) = fa[k];
    }
    const Eigen::RowVectorXd s = mlp_forward_batch(size_, xs);
    const Eigen::RowVectorXd a = mlp_forward_batch(acc_, xa);
    size_kib.resize(cands.size());
    accuracy.resize(cands.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      size_kib[static_cast<std::size_t>(i)] = clamp_size(s(i));
      accuracy[static_cast<std::size_t>(i)] = clamp_accuracy(a(i));
    }
  }

  const MlpModel& size_model() const noexcept { return size_; }
  const MlpModel& accuracy_model() const noexcept { return acc_; }

 private:
  MlpModel size_;
  MlpModel acc_;
};

// Everything the device needs to evaluate candidates.
struct EstimatorArtifacts {
  EncodeProfile encode;
  InferenceDelayModels inference;
  std::shared_ptr<const ContentPredictor> predictor;
  NetEstimate prior;
};

inline nlohmann::json to_json(const InferenceDelayModels& m) {
  auto arr = nlohmann::json::array();
  for (const auto& l : m.per_beta) arr.push_back({{"intercept_ms", l.intercept}, {"slope_ms", l.slope}});
  return arr;
}

inline InferenceDelayModels inference_models_from_json(const nlohmann::json& j) {
  InferenceDelayModels m;
  if (!j.is_array() || j.size() != kBetaCount) throw ParseError("inference models: expected 5 entries");
  for (int b = 0; b < kBetaCount; ++b) {
    m.per_beta[b] = {j.at(b).at("intercept_ms").get<double>(), j.at(b).at("slope_ms").get<double>()};
  }
  return m;
}

}  // namespace edgemix
