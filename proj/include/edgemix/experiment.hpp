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

// Profiling, estimator training and evaluation, single runs, and sweeps.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "edgemix/client.hpp"
#include "edgemix/error.hpp"
#include "edgemix/estimator.hpp"
#include "edgemix/metrics.hpp"
#include "edgemix/mlp.hpp"
#include "edgemix/netsim.hpp"
#include "edgemix/policy.hpp"
#include "edgemix/scene.hpp"
#include "edgemix/serversim.hpp"

namespace edgemix {

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Labeled data.

struct LabeledSample {
  std::string preset;
  int frame_id = 0;
  CandidateFeatures features;
  double size_kib = 0.0;
  double accuracy = 0.0;
  double decode_ms = 0.0;
};

using Dataset = std::vector<LabeledSample>;

inline constexpr const char* kDatasetHeader =
    "preset,frame_id,tau_d,lambda,beta,n_d,m_d,m_f,mean_rho,std_rho,size_kib,accuracy,decode_ms";

inline void save_dataset_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << kDatasetHeader << '\n';
  for (const auto& s : d) {
    const auto& f = s.features;
    out << s.preset << ',' << s.frame_id << ',' << f.config.tau_d << ',' << f.config.lambda_q << ','
        << f.config.beta << ',' << f.nd << ',' << fmt_g17(f.md) << ',' << fmt_g17(f.mf) << ','
        << fmt_g17(f.mean_rho) << ',' << fmt_g17(f.std_rho) << ',' << fmt_g17(s.size_kib) << ','
        << fmt_g17(s.accuracy) << ',' << fmt_g17(s.decode_ms) << '\n';
  }
}

inline Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kDatasetHeader) throw ParseError(path + ": bad header");
  Dataset d;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 13) throw ParseError(path + ": row " + std::to_string(row) + " has the wrong column count");
    try {
      LabeledSample s;
      s.preset = cells[0];
      s.frame_id = std::stoi(cells[1]);
      s.features.config = {std::stoi(cells[2]), std::stoi(cells[3]), std::stoi(cells[4])};
      validate(s.features.config);
      s.features.nd = std::stoi(cells[5]);
      s.features.md = std::stod(cells[6]);
      s.features.mf = std::stod(cells[7]);
      s.features.mean_rho = std::stod(cells[8]);
      s.features.std_rho = std::stod(cells[9]);
      s.size_kib = std::stod(cells[10]);
      s.accuracy = std::stod(cells[11]);
      s.decode_ms = std::stod(cells[12]);
      d.push_back(std::move(s));
    } catch (const std::logic_error& e) {
      throw ParseError(path + ": row " + std::to_string(row) + ": " + e.what());
    }
  }
  return d;
}

inline Eigen::MatrixXd size_design(std::span<const LabeledSample> d) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d.size()), kSizeFeatureCount);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& f = d[i].features;
    const auto v = size_features(f.config, f.nd, f.md, f.mf);
    for (int k = 0; k < kSizeFeatureCount; ++k) x(static_cast<Eigen::Index>(i), k) = v[k];
  }
  return x;
}

inline Eigen::MatrixXd accuracy_design(std::span<const LabeledSample> d) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d.size()), kAccuracyFeatureCount);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& f = d[i].features;
    const auto v = accuracy_features(f.config, f.nd, f.md, f.mf, f.mean_rho, f.std_rho);
    for (int k = 0; k < kAccuracyFeatureCount; ++k) x(static_cast<Eigen::Index>(i), k) = v[k];
  }
  return x;
}

inline Eigen::VectorXd size_targets(std::span<const LabeledSample> d) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) y(static_cast<Eigen::Index>(i)) = d[i].size_kib;
  return y;
}

inline Eigen::VectorXd accuracy_targets(std::span<const LabeledSample> d) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) y(static_cast<Eigen::Index>(i)) = d[i].accuracy;
  return y;
}

// ---------------------------------------------------------------------------
// Baseline estimators.

// Per-configuration mean of the training labels, with the global mean for
// configurations never seen.
class OfflineMeanPredictor final : public ContentPredictor {
 public:
  explicit OfflineMeanPredictor(std::span<const LabeledSample> train) {
    if (train.empty()) throw InvalidArgument("offline mean needs at least one sample");
    std::map<Configuration, std::tuple<double, double, int>> acc;
    for (const auto& s : train) {
      auto& [sz, a, n] = acc[s.features.config];
      sz += s.size_kib;
      a += s.accuracy;
      ++n;
      global_size_ += s.size_kib;
      global_acc_ += s.accuracy;
    }
    global_size_ /= static_cast<double>(train.size());
    global_acc_ /= static_cast<double>(train.size());
    for (const auto& [c, v] : acc) {
      const auto& [sz, a, n] = v;
      table_[c] = {sz / n, a / n};
    }
  }

  void predict(std::span<const CandidateFeatures> cands, std::vector<double>& size_kib,
               std::vector<double>& accuracy) const override {
    size_kib.resize(cands.size());
    accuracy.resize(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const auto it = table_.find(cands[i].config);
      size_kib[i] = clamp_size(it == table_.end() ? global_size_ : it->second.first);
      accuracy[i] = clamp_accuracy(it == table_.end() ? global_acc_ : it->second.second);
    }
  }

 private:
  std::map<Configuration, std::pair<double, double>> table_;
  double global_size_ = 0.0;
  double global_acc_ = 0.0;
};

struct LinearModel {
  Eigen::VectorXd coef;
  double intercept = 0.0;

  double predict(const Eigen::RowVectorXd& x) const { return intercept + x.dot(coef); }
};

// Ordinary least squares with an intercept (column-pivoting QR).
inline LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size() || x.rows() <= x.cols()) throw InvalidArgument("fit_linear: not enough samples");
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.leftCols(x.cols()) = x;
  a.col(x.cols()).setOnes();
  const Eigen::VectorXd beta = a.colPivHouseholderQr().solve(y);
  return {beta.head(x.cols()), beta(x.cols())};
}

struct MethodScores {
  std::string method;
  RegressionMetrics size;
  RegressionMetrics accuracy;
};

// Splits 80/20 with a seeded shuffle, fits the three estimators on the
// training part and scores them on the held-out part.
inline std::vector<MethodScores> compare_estimators(const Dataset& data, std::uint64_t seed,
                                                    const TrainOptions& train_opt = {}) {
  if (data.size() < 10) throw InvalidArgument("compare_estimators: dataset too small");
  SeqRng rng(hash_mix({seed, hash_name("holdout")}));
  const auto idx = detail::shuffled_indices(data.size(), rng);
  const std::size_t n_test = data.size() / 5;
  Dataset train, test;
  for (std::size_t i = 0; i < idx.size(); ++i) (i < n_test ? test : train).push_back(data[idx[i]]);

  std::vector<CandidateFeatures> test_feats;
  for (const auto& s : test) test_feats.push_back(s.features);
  std::vector<double> ys, ya;
  for (const auto& s : test) {
    ys.push_back(s.size_kib);
    ya.push_back(s.accuracy);
  }

  std::vector<MethodScores> out;
  {
    const Eigen::MatrixXd xs = size_design(train), xa = accuracy_design(train);
    const auto ls = fit_linear(xs, size_targets(train));
    const auto la = fit_linear(xa, accuracy_targets(train));
    const Eigen::MatrixXd ts = size_design(test), ta = accuracy_design(test);
    std::vector<double> ps, pa;
    for (Eigen::Index i = 0; i < ts.rows(); ++i) {
      ps.push_back(clamp_size(ls.predict(ts.row(i))));
      pa.push_back(clamp_accuracy(la.predict(ta.row(i))));
    }
    out.push_back({"LinearRegression", regression_metrics(ys, ps), regression_metrics(ya, pa)});
  }
  {
    const OfflineMeanPredictor om(train);
    std::vector<double> ps, pa;
    om.predict(test_feats, ps, pa);
    out.push_back({"OfflineMean", regression_metrics(ys, ps), regression_metrics(ya, pa)});
  }
  {
    TrainOptions opt = train_opt;
    opt.seed = hash_mix({seed, hash_name("mlp-size")});
    auto ms = mlp_train(size_design(train), size_targets(train), opt);
    opt.seed = hash_mix({seed, hash_name("mlp-acc")});
    auto ma = mlp_train(accuracy_design(train), accuracy_targets(train), opt);
    const MlpPredictor p(std::move(ms), std::move(ma));
    std::vector<double> ps, pa;
    p.predict(test_feats, ps, pa);
    out.push_back({"MLP", regression_metrics(ys, ps), regression_metrics(ya, pa)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profiling and training.

struct ProfileOptions {
  std::vector<std::string> presets = preset_ids();
  std::uint64_t seed = 1;
  GridGeometry geom = default_geometry();
  DeviceProfile device;
  ServerProfile server;
  TrainOptions train;
  int profile_seconds = 60;
  double fps = 30.0;
  int encode_trials = 20;
  int inference_trials = 400;
};

struct ProfilingData {
  Dataset samples;
  EncodeProfile encode;
  InferenceDelayModels inference;
};

inline SceneConfig resolve_scene(const std::string& preset_or_path, std::uint64_t seed) {
  SceneConfig cfg;
  if (std::filesystem::exists(preset_or_path) && std::filesystem::is_regular_file(preset_or_path)) {
    std::ifstream in(preset_or_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(preset_or_path + ": " + e.what());
    }
    cfg = scene_config_from_json(j);
  } else {
    cfg = scene_preset(preset_or_path);
  }
  cfg.seed = hash_mix({seed, hash_name(cfg.scene_id)});
  return cfg;
}

// Labeled samples from tracker-driven sessions with random configurations,
// one sample per frame for a random candidate evaluated against the oracles.
inline Dataset collect_samples(const ProfileOptions& opt) {
  Dataset out;
  const auto cands = default_candidates();
  for (const auto& preset : opt.presets) {
    SceneConfig scene = resolve_scene(preset, hash_mix({opt.seed, hash_name("profile")}));
    scene.duration_frames = static_cast<int>(opt.profile_seconds * opt.fps);
    scene.fps = opt.fps;
    const auto truth = generate_truth(scene, opt.geom);
    const auto trace = generate_trace(out.size() % 2 ? TraceKind::k5G : TraceKind::k4G,
                                      hash_mix({opt.seed, hash_name(preset), hash_name("trace")}));
    SessionConfig sc;
    sc.policy = parse_policy("Random");
    sc.policy.random_seed = hash_mix({opt.seed, hash_name(preset)});
    sc.geom = opt.geom;
    sc.device = opt.device;
    sc.server = opt.server;
    sc.server.seed = hash_mix({opt.server.seed, opt.seed, hash_name(preset)});
    sc.fps = opt.fps;
    InProcessBackend backend(sc.server, opt.geom, truth);
    SeqRng pick(hash_mix({opt.seed, hash_name(preset), hash_name("label")}));
    auto observer = [&](const FrameTruth& ft, const BoxList& view, const TrackerState&) {
      const auto& c = cands[static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(cands.size()) - 1))];
      const auto a = analyze_frame(ft, view, opt.geom, sc.delta_m, sc.delta_rho);
      const OffloadPlan plan{c, FrameMode::kMixed, mask_from_types(a.types, c.tau_d)};
      LabeledSample s;
      s.preset = scene.scene_id;
      s.frame_id = ft.frame_id;
      s.features = candidate_features(a, c);
      s.size_kib = true_size(sc.server, plan, ft, opt.geom);
      s.accuracy = true_accuracy(sc.server, plan, ft, opt.geom);
      s.decode_ms = decode_ms(sc.server, plan, opt.geom, ft.frame_id);
      out.push_back(std::move(s));
    };
    run_session(sc, truth, trace, nullptr, backend, observer);
  }
  return out;
}

inline DownsampleMask first_regions_mask(const GridGeometry& geom, int nd) {
  DownsampleMask m(geom.region_count);
  for (int j = 0; j < nd; ++j) m.set(j);
  return m;
}

inline EncodeProfile profile_encoder(const ProfileOptions& opt, double dec_mean_ms) {
  EncodeProfile p;
  p.bucket_step = 2;
  p.max_nd = opt.geom.region_count;
  p.dec_mean_ms = dec_mean_ms;
  DeviceProfile dev = opt.device;
  dev.seed = hash_mix({opt.device.seed, opt.seed, hash_name("enc-profile")});
  for (int b = 0; b <= p.max_nd; b += p.bucket_step) {
    for (int q : kLambdaSet) {
      const OffloadPlan plan{{b > 0 ? 2 : 0, q, 0}, FrameMode::kMixed, first_regions_mask(opt.geom, b)};
      double sum = 0.0;
      for (int t = 0; t < opt.encode_trials; ++t) sum += encode_ms(dev, plan, opt.geom, t);
      p.table[{b, q}] = sum / opt.encode_trials;
    }
  }
  return p;
}

inline InferenceDelayModels profile_inference(const ProfileOptions& opt) {
  InferenceDelayModels m;
  ServerProfile srv = opt.server;
  srv.seed = hash_mix({opt.server.seed, opt.seed, hash_name("inf-profile")});
  for (int beta : kBetaSet) {
    std::vector<double> xs, ys;
    // N_d = 0 always runs at full resolution, so each curve is probed from N_d = 1.
    for (int nd = 1; nd <= opt.geom.region_count; ++nd) {
      const OffloadPlan plan{{2, 95, beta}, FrameMode::kMixed, first_regions_mask(opt.geom, nd)};
      for (int t = 0; t < opt.inference_trials; ++t) {
        xs.push_back(nd);
        ys.push_back(inference_ms(srv, plan, opt.geom, t));
      }
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(xs.size()), 1);
    Eigen::VectorXd y(static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      x(static_cast<Eigen::Index>(i), 0) = xs[i];
      y(static_cast<Eigen::Index>(i)) = ys[i];
    }
    const auto fit = fit_linear(x, y);
    m.per_beta[static_cast<std::size_t>(beta)] = {fit.intercept, fit.coef(0)};
  }
  return m;
}

inline ProfilingData collect_profiling_data(const ProfileOptions& opt) {
  ProfilingData d;
  d.samples = collect_samples(opt);
  double dec = 0.0;
  for (const auto& s : d.samples) dec += s.decode_ms;
  dec = d.samples.empty() ? 0.0 : dec / static_cast<double>(d.samples.size());
  d.encode = profile_encoder(opt, dec);
  d.inference = profile_inference(opt);
  return d;
}

struct TrainedArtifacts {
  ProfilingData data;
  MlpModel size_model;
  MlpModel accuracy_model;
};

inline TrainedArtifacts train_models(ProfilingData data, const ProfileOptions& opt) {
  TrainedArtifacts t;
  t.data = std::move(data);
  if (t.data.samples.size() < opt.train.min_samples) {
    throw InvalidArgument("profiling produced " + std::to_string(t.data.samples.size()) + " samples, need " +
                          std::to_string(opt.train.min_samples));
  }
  TrainOptions to = opt.train;
  to.seed = hash_mix({opt.seed, hash_name("mlp-size")});
  t.size_model = mlp_train(size_design(t.data.samples), size_targets(t.data.samples), to);
  to.seed = hash_mix({opt.seed, hash_name("mlp-acc")});
  t.accuracy_model = mlp_train(accuracy_design(t.data.samples), accuracy_targets(t.data.samples), to);
  return t;
}

inline TrainedArtifacts profile_and_train(const ProfileOptions& opt) {
  return train_models(collect_profiling_data(opt), opt);
}

// Estimators for full ViTMAlis and its ablations.
struct ArtifactSet {
  EstimatorArtifacts learned;
  EstimatorArtifacts offline_mean;

  const EstimatorArtifacts* for_policy(const Policy& p) const {
    if (!uses_estimator(p)) return nullptr;
    return p.ablation == Ablation::kNoMlps ? &offline_mean : &learned;
  }
};

inline ArtifactSet make_artifact_set(const TrainedArtifacts& t) {
  ArtifactSet s;
  s.learned = {t.data.encode, t.data.inference, std::make_shared<MlpPredictor>(t.size_model, t.accuracy_model), {}};
  s.offline_mean = {t.data.encode, t.data.inference, std::make_shared<OfflineMeanPredictor>(t.data.samples), {}};
  return s;
}

// Layout: size_model.vmlp, accuracy_model.vmlp, encode_profile.csv,
// estimator.json {dec_mean_ms, inference}, dataset.csv.
inline void save_artifacts(const TrainedArtifacts& t, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  save_mlp(t.size_model, (d / "size_model.vmlp").string());
  save_mlp(t.accuracy_model, (d / "accuracy_model.vmlp").string());
  save_encode_profile_csv(t.data.encode, (d / "encode_profile.csv").string());
  save_dataset_csv(t.data.samples, (d / "dataset.csv").string());
  nlohmann::json j;
  j["dec_mean_ms"] = t.data.encode.dec_mean_ms;
  j["inference"] = to_json(t.data.inference);
  j["samples"] = t.data.samples.size();
  j["size_model"] = {{"train_loss", t.size_model.train_loss}, {"validation_loss", t.size_model.validation_loss}};
  j["accuracy_model"] = {{"train_loss", t.accuracy_model.train_loss},
                         {"validation_loss", t.accuracy_model.validation_loss}};
  std::ofstream out(d / "estimator.json");
  if (!out) throw ConfigError("cannot write " + (d / "estimator.json").string());
  out << j.dump(2) << '\n';
}

inline TrainedArtifacts load_artifacts(const std::string& dir) {
  const std::filesystem::path d(dir);
  for (const char* f : {"size_model.vmlp", "accuracy_model.vmlp", "encode_profile.csv", "estimator.json", "dataset.csv"}) {
    if (!std::filesystem::exists(d / f)) throw ConfigError("missing model artifact " + (d / f).string());
  }
  std::ifstream in(d / "estimator.json");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("estimator.json: " + std::string(e.what()));
  }
  TrainedArtifacts t;
  t.size_model = load_mlp((d / "size_model.vmlp").string());
  t.accuracy_model = load_mlp((d / "accuracy_model.vmlp").string());
  t.data.encode = load_encode_profile_csv((d / "encode_profile.csv").string(), j.at("dec_mean_ms").get<double>());
  validate(t.data.encode);
  t.data.inference = inference_models_from_json(j.at("inference"));
  t.data.samples = load_dataset_csv((d / "dataset.csv").string());
  return t;
}

// ---------------------------------------------------------------------------
// Single runs.

struct RunSpec {
  Policy policy;
  std::string preset;
  std::string trace;  // "4g:SEED", "5g:SEED" or a CSV path
  std::uint64_t seed = 1;
};

struct RunEnvironment {
  GridGeometry geom = default_geometry();
  DeviceProfile device;
  ServerProfile server;
  double fps = 30.0;
  SelectionThresholds thresholds;
  int max_frames = -1;
};

struct MetricsReport {
  int frames = 0;
  int offloads = 0;
  double rendering_f1 = 0.0;
  double cache_hit_ratio = 0.0;
  double e2e_p25 = 0.0, e2e_p50 = 0.0, e2e_p75 = 0.0;
  double interval_p25 = 0.0, interval_p50 = 0.0, interval_p75 = 0.0;  // ms between offload starts
  double inference_f1_mean = 0.0, inference_f1_std = 0.0;
  double true_accuracy_mean = 0.0;
  double enc_p50 = 0.0, upload_p50 = 0.0, dec_p50 = 0.0, inf_p50 = 0.0, rtt_p50 = 0.0;
  double network_p50 = 0.0;  // upload + rtt
  double payload_p50 = 0.0;
};

inline MetricsReport compute_report(const SessionResult& s) {
  MetricsReport r;
  r.frames = static_cast<int>(s.frames.size());
  r.offloads = static_cast<int>(s.offloads.size());
  std::vector<double> f1;
  int hits = 0;
  for (const auto& row : s.frames) {
    f1.push_back(row.f1);
    hits += row.from_cache ? 1 : 0;
  }
  r.rendering_f1 = mean(f1);
  r.cache_hit_ratio = r.frames ? static_cast<double>(hits) / r.frames : 0.0;
  if (s.offloads.empty()) return r;
  std::vector<double> e2e, inf_f1, acc, enc, up, dec, inf, rtt, net, pay, gaps;
  for (std::size_t i = 0; i < s.offloads.size(); ++i) {
    const auto& o = s.offloads[i];
    e2e.push_back(o.e2e_ms);
    inf_f1.push_back(o.inference_f1);
    acc.push_back(o.true_accuracy);
    enc.push_back(o.enc_ms);
    up.push_back(o.upload_ms);
    dec.push_back(o.dec_ms);
    inf.push_back(o.inf_ms);
    rtt.push_back(o.rtt_ms);
    net.push_back(o.upload_ms + o.rtt_ms);
    pay.push_back(o.payload_kib);
    if (i > 0) gaps.push_back(o.decision_ms - s.offloads[i - 1].decision_ms);
  }
  r.e2e_p25 = quantile(e2e, 0.25);
  r.e2e_p50 = quantile(e2e, 0.5);
  r.e2e_p75 = quantile(e2e, 0.75);
  if (!gaps.empty()) {
    r.interval_p25 = quantile(gaps, 0.25);
    r.interval_p50 = quantile(gaps, 0.5);
    r.interval_p75 = quantile(gaps, 0.75);
  }
  r.inference_f1_mean = mean(inf_f1);
  r.inference_f1_std = stddev(inf_f1);
  r.true_accuracy_mean = mean(acc);
  r.enc_p50 = median(enc);
  r.upload_p50 = median(up);
  r.dec_p50 = median(dec);
  r.inf_p50 = median(inf);
  r.rtt_p50 = median(rtt);
  r.network_p50 = median(net);
  r.payload_p50 = median(pay);
  return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  return {{"frames", r.frames},
          {"offloads", r.offloads},
          {"rendering_f1", r.rendering_f1},
          {"cache_hit_ratio", r.cache_hit_ratio},
          {"e2e_ms", {{"p25", r.e2e_p25}, {"p50", r.e2e_p50}, {"p75", r.e2e_p75}}},
          {"offloading_interval_ms", {{"p25", r.interval_p25}, {"p50", r.interval_p50}, {"p75", r.interval_p75}}},
          {"inference_f1", {{"mean", r.inference_f1_mean}, {"std", r.inference_f1_std}}},
          {"true_accuracy_mean", r.true_accuracy_mean},
          {"breakdown_p50_ms",
           {{"enc", r.enc_p50}, {"upload", r.upload_p50}, {"dec", r.dec_p50}, {"inf", r.inf_p50}, {"rtt", r.rtt_p50}}},
          {"network_p50_ms", r.network_p50},
          {"payload_p50_kib", r.payload_p50}};
}

struct RunOutput {
  RunSpec spec;
  SessionResult session;
  MetricsReport report;
};

// Everything random in a run derives from (seed, preset, trace); the policy
// does not enter, so policies are compared on identical inputs.
inline SessionConfig session_config_for(const RunSpec& spec, const RunEnvironment& env) {
  SessionConfig sc;
  sc.policy = spec.policy;
  sc.geom = env.geom;
  sc.fps = env.fps;
  sc.thresholds = env.thresholds;
  sc.max_frames = env.max_frames;
  sc.device = env.device;
  sc.server = env.server;
  // Keyed by file stem so "walkS" and "data/presets/walkS.json" agree.
  const auto stem = [](const std::string& s) { return std::filesystem::path(s).stem().string(); };
  const std::uint64_t k = hash_mix({spec.seed, hash_name(stem(spec.preset)), hash_name(stem(spec.trace))});
  sc.device.seed = hash_mix({env.device.seed, k});
  sc.server.seed = hash_mix({env.server.seed, k});
  return sc;
}

inline std::vector<FrameTruth> truth_for(const RunSpec& spec, const RunEnvironment& env) {
  SceneConfig scene = resolve_scene(spec.preset, spec.seed);
  scene.fps = env.fps;
  if (env.max_frames >= 0) scene.duration_frames = std::min(scene.duration_frames, env.max_frames);
  return generate_truth(scene, env.geom);
}

inline RunOutput run_experiment(const RunSpec& spec, const RunEnvironment& env, const ArtifactSet* artifacts,
                                InferenceBackend* backend_override = nullptr) {
  const auto truth = truth_for(spec, env);
  const auto trace = resolve_trace(spec.trace);
  const SessionConfig sc = session_config_for(spec, env);
  const EstimatorArtifacts* art = artifacts ? artifacts->for_policy(spec.policy) : nullptr;
  if (uses_estimator(spec.policy) && art == nullptr) {
    throw ConfigError(policy_name(spec.policy) + " needs trained models (profile first, then pass --models)");
  }
  InProcessBackend local(sc.server, env.geom, truth);
  RunOutput out;
  out.spec = spec;
  out.session = run_session(sc, truth, trace, art, backend_override ? *backend_override : local);
  out.report = compute_report(out.session);
  return out;
}

// ---------------------------------------------------------------------------
// Logs.

inline std::string render_log_csv(const SessionResult& s) {
  std::string out = "frame_id,source,n_boxes,eta,kappa\n";
  for (const auto& r : s.frames) {
    out += std::to_string(r.frame_id) + ',' + (r.from_cache ? "cache" : "tracker") + ',' + std::to_string(r.n_boxes) +
           ',' + std::to_string(r.eta) + ',' + fmt_g17(r.kappa) + '\n';
  }
  return out;
}

inline std::string frame_metrics_csv(const SessionResult& s) {
  std::string out = "frame_id,source,n_boxes,f1\n";
  for (const auto& r : s.frames) {
    out += std::to_string(r.frame_id) + ',' + (r.from_cache ? "cache" : "tracker") + ',' + std::to_string(r.n_boxes) +
           ',' + fmt_g17(r.f1) + '\n';
  }
  return out;
}

// One row per offload decision: what was chosen and why.
inline std::string decision_log_csv(const SessionResult& s) {
  std::string out =
      "frame_id,decision_ms,eta,kappa,branch,frontier_size,tau_d,lambda,beta,mode,n_d,mask,"
      "predicted_latency_ms,predicted_accuracy\n";
  for (const auto& o : s.offloads) {
    out += std::to_string(o.frame_id) + ',' + fmt_g17(o.decision_ms) + ',' + std::to_string(o.eta) + ',' +
           fmt_g17(o.kappa) + ',' + o.branch + ',' + std::to_string(o.frontier_size) + ',' +
           std::to_string(o.config.tau_d) + ',' + std::to_string(o.config.lambda_q) + ',' +
           std::to_string(o.config.beta) + ',' + frame_mode_name(o.mode) + ',' + std::to_string(o.nd) + ',' +
           o.mask_hex + ',' + fmt_g17(o.predicted_latency_ms) + ',' + fmt_g17(o.predicted_accuracy) + '\n';
  }
  return out;
}

inline std::string offload_log_csv(const SessionResult& s) {
  std::string out =
      "frame_id,decision_ms,send_ms,recv_ms,pre_ms,enc_ms,upload_ms,dec_ms,inf_ms,rtt_ms,e2e_ms,payload_kib,"
      "observed_tput_mbps,observed_rtt_ms,true_accuracy,inference_f1,result_boxes\n";
  for (const auto& o : s.offloads) {
    out += std::to_string(o.frame_id);
    for (double v : {o.decision_ms, o.send_ms, o.recv_ms, o.pre_ms, o.enc_ms, o.upload_ms, o.dec_ms, o.inf_ms,
                     o.rtt_ms, o.e2e_ms, o.payload_kib, o.observed_tput_mbps, o.observed_rtt_ms, o.true_accuracy,
                     o.inference_f1}) {
      out += ',' + fmt_g17(v);
    }
    out += ',' + std::to_string(o.result_boxes) + '\n';
  }
  return out;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

inline void write_run_logs(const RunOutput& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  write_text(d / "render_log.csv", render_log_csv(r.session));
  write_text(d / "frame_metrics.csv", frame_metrics_csv(r.session));
  write_text(d / "decisions.csv", decision_log_csv(r.session));
  write_text(d / "offloads.csv", offload_log_csv(r.session));
  nlohmann::json j = to_json(r.report);
  j["policy"] = policy_name(r.spec.policy);
  j["preset"] = r.spec.preset;
  j["trace"] = r.spec.trace;
  j["seed"] = r.spec.seed;
  write_text(d / "summary.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepConfig {
  std::vector<std::string> policies;
  std::vector<std::string> presets = preset_ids();
  std::vector<std::string> traces;
  std::vector<std::uint64_t> seeds{1};
  int threads = 0;  // 0: hardware concurrency
  int max_frames = -1;
  std::string models_dir;
  std::string out_csv;
  std::string logs_dir;  // per-run logs when non-empty
};

// Schema: {"policies": [...], "presets": [...], "traces": [...], "seeds": [...],
//          "threads": N, "max_frames": N, "models": DIR, "out": CSV, "logs": DIR}
inline SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  try {
    SweepConfig c;
    c.policies = j.at("policies").get<std::vector<std::string>>();
    if (j.contains("presets")) c.presets = j.at("presets").get<std::vector<std::string>>();
    c.traces = j.at("traces").get<std::vector<std::string>>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.threads = j.value("threads", 0);
    c.max_frames = j.value("max_frames", -1);
    c.models_dir = j.value("models", std::string());
    c.out_csv = j.value("out", std::string());
    c.logs_dir = j.value("logs", std::string());
    for (const auto& p : c.policies) parse_policy(p);
    if (c.policies.empty() || c.presets.empty() || c.traces.empty() || c.seeds.empty()) {
      throw ConfigError("sweep: policies, presets, traces and seeds must be non-empty");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
}

struct SweepRow {
  RunSpec spec;
  MetricsReport report;
};

inline std::vector<RunSpec> sweep_specs(const SweepConfig& c) {
  std::vector<RunSpec> specs;
  for (const auto& p : c.policies) {
    for (const auto& s : c.presets) {
      for (const auto& t : c.traces) {
        for (auto seed : c.seeds) specs.push_back({parse_policy(p), s, t, seed});
      }
    }
  }
  return specs;
}

// Runs are independent; each worker writes only its own slot, so the output
// order is the enumeration order whatever the thread count.
inline std::vector<SweepRow> run_sweep(const SweepConfig& c, const RunEnvironment& env, const ArtifactSet* artifacts) {
  const auto specs = sweep_specs(c);
  std::vector<SweepRow> rows(specs.size());
  std::vector<std::exception_ptr> errors(specs.size());
  RunEnvironment e = env;
  if (c.max_frames >= 0) e.max_frames = c.max_frames;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      try {
        auto out = run_experiment(specs[i], e, artifacts);
        rows[i] = {specs[i], out.report};
        if (!c.logs_dir.empty()) {
          char name[32];
          std::snprintf(name, sizeof name, "run_%04zu", i);
          write_run_logs(out, (std::filesystem::path(c.logs_dir) / name).string());
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n = c.threads > 0 ? static_cast<unsigned>(c.threads) : hw;
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < std::min<std::size_t>(n, specs.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "policy,preset,trace,seed,frames,offloads,rendering_f1,cache_hit_ratio,e2e_p25,e2e_p50,e2e_p75,"
      "interval_p50,inference_f1_mean,inference_f1_std,true_accuracy_mean,enc_p50,upload_p50,dec_p50,inf_p50,"
      "rtt_p50,network_p50,payload_p50\n";
  for (const auto& r : rows) {
    const auto& m = r.report;
    out += policy_name(r.spec.policy) + ',' + r.spec.preset + ',' + r.spec.trace + ',' + std::to_string(r.spec.seed) +
           ',' + std::to_string(m.frames) + ',' + std::to_string(m.offloads);
    for (double v : {m.rendering_f1, m.cache_hit_ratio, m.e2e_p25, m.e2e_p50, m.e2e_p75, m.interval_p50,
                     m.inference_f1_mean, m.inference_f1_std, m.true_accuracy_mean, m.enc_p50, m.upload_p50,
                     m.dec_p50, m.inf_p50, m.rtt_p50, m.network_p50, m.payload_p50}) {
      out += ',' + fmt_g17(v);
    }
    out += '\n';
  }
  return out;
}

struct PolicyAggregate {
  std::string policy;
  int runs = 0;
  double rendering_f1_p50 = 0.0;
  double e2e_p50 = 0.0;
  double inf_p50 = 0.0;
  double network_p50 = 0.0;
  double interval_p50 = 0.0;
  double true_accuracy_mean = 0.0;
};

// Medians over runs of the per-run statistics, keyed and ordered by policy
// name, so the result does not depend on row order.
inline std::vector<PolicyAggregate> aggregate_sweep(const std::vector<SweepRow>& rows) {
  std::map<std::string, std::vector<const MetricsReport*>> by;
  for (const auto& r : rows) by[policy_name(r.spec.policy)].push_back(&r.report);
  std::vector<PolicyAggregate> out;
  for (const auto& [name, reps] : by) {
    std::vector<double> f1, e2e, inf, net, gap, acc;
    for (const auto* m : reps) {
      f1.push_back(m->rendering_f1);
      e2e.push_back(m->e2e_p50);
      inf.push_back(m->inf_p50);
      net.push_back(m->network_p50);
      gap.push_back(m->interval_p50);
      acc.push_back(m->true_accuracy_mean);
    }
    std::sort(acc.begin(), acc.end());
    out.push_back({name, static_cast<int>(reps.size()), median(f1), median(e2e), median(inf), median(net),
                   median(gap), mean(acc)});
  }
  return out;
}

inline std::string aggregate_csv(const std::vector<PolicyAggregate>& agg) {
  std::string out = "policy,runs,rendering_f1_p50,e2e_p50,inf_p50,network_p50,interval_p50,true_accuracy_mean\n";
  for (const auto& a : agg) {
    out += a.policy + ',' + std::to_string(a.runs);
    for (double v : {a.rendering_f1_p50, a.e2e_p50, a.inf_p50, a.network_p50, a.interval_p50, a.true_accuracy_mean}) {
      out += ',' + fmt_g17(v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace edgemix
