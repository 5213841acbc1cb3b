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

// edgemix command-line driver.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edgemix/edgemix.hpp"

namespace fs = std::filesystem;
using namespace edgemix;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::optional<ArtifactSet> load_models(const std::string& dir) {
  if (dir.empty()) return std::nullopt;
  return make_artifact_set(load_artifacts(dir));
}

std::pair<std::string, std::uint16_t> split_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw ConfigError("--server expects HOST:PORT");
  try {
    const int port = std::stoi(s.substr(colon + 1));
    if (port < 1 || port > 65535) throw std::out_of_range("port");
    return {s.substr(0, colon), static_cast<std::uint16_t>(port)};
  } catch (const std::logic_error&) {
    throw ConfigError("bad port in '" + s + "'");
  }
}

void print_scores(const std::vector<MethodScores>& scores, std::ostream& out) {
  out << "method,target,mae,rmse,mape,r2\n";
  for (const auto& s : scores) {
    for (const auto& [target, m] : {std::pair{"size", s.size}, std::pair{"accuracy", s.accuracy}}) {
      out << s.method << ',' << target << ',' << fmt_g17(m.mae) << ',' << fmt_g17(m.rmse) << ',' << fmt_g17(m.mape)
          << ',' << fmt_g17(m.r2) << '\n';
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edgemix: mixed-resolution offloading simulator"};
  app.require_subcommand(1);

  // profile
  std::vector<std::string> presets = preset_ids();
  std::uint64_t seed = 1;
  std::string out_dir;
  int epochs = TrainOptions{}.epochs;
  int seconds = 60;
  auto* profile = app.add_subcommand("profile", "profile the scene presets and train the estimators");
  profile->add_option("--presets", presets, "preset ids or JSON files")->delimiter(',');
  profile->add_option("--seed", seed);
  profile->add_option("--out", out_dir, "artifact directory")->required();
  profile->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
  profile->add_option("--seconds", seconds, "profiling length per preset")->check(CLI::PositiveNumber);

  // run
  std::string policy, preset, trace, models, server;
  int max_frames = -1;
  auto* run = app.add_subcommand("run", "simulate one policy on one scene and trace");
  run->add_option("--policy", policy)->required();
  run->add_option("--preset", preset)->required();
  run->add_option("--trace", trace, "4g:SEED, 5g:SEED or a trace CSV")->required();
  run->add_option("--seed", seed);
  run->add_option("--out", out_dir, "log directory")->required();
  run->add_option("--models", models, "artifact directory from `profile`");
  run->add_option("--server", server, "HOST:PORT of an `edgemix serve` process");
  run->add_option("--max-frames", max_frames);

  // sweep
  std::string config_path;
  auto* sweep = app.add_subcommand("sweep", "run a policy x preset x trace x seed sweep");
  sweep->add_option("--config", config_path, "sweep JSON")->required();

  // compare-estimators
  std::string data_path, out_csv;
  auto* compare = app.add_subcommand("compare-estimators", "score Linear Regression, Offline Mean and MLP");
  compare->add_option("--data", data_path, "artifact directory or dataset CSV")->required();
  compare->add_option("--seed", seed);
  compare->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
  compare->add_option("--out", out_csv);

  // gen-trace
  std::string kind;
  int duration = 300;
  auto* gen = app.add_subcommand("gen-trace", "write a synthetic uplink trace");
  gen->add_option("--kind", kind)->required()->check(CLI::IsMember({"4g", "5g"}));
  gen->add_option("--seed", seed)->required();
  gen->add_option("--duration", duration)->check(CLI::PositiveNumber);
  gen->add_option("--out", out_csv, "CSV path, stdout when omitted");

  // convert-trace
  std::string in_path;
  double rtt = 40.0, scale = 1.0;
  auto* convert = app.add_subcommand("convert-trace", "turn a per-second throughput list into a trace CSV");
  convert->add_option("--in", in_path)->required();
  convert->add_option("--rtt", rtt, "constant RTT in ms");
  convert->add_option("--scale", scale, "multiplier to Mbps (0.001 for kbps)");
  convert->add_option("--out", out_csv, "CSV path, stdout when omitted");

  // serve
  int port = 0;
  auto* serve = app.add_subcommand("serve", "answer offload requests for one client session");
  serve->add_option("--port", port, "0 picks a free port");
  serve->add_option("--preset", preset)->required();
  serve->add_option("--trace", trace)->required();
  serve->add_option("--seed", seed);
  serve->add_option("--max-frames", max_frames);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*profile) {
      ProfileOptions opt;
      opt.presets = presets;
      opt.seed = seed;
      opt.train.epochs = epochs;
      opt.profile_seconds = seconds;
      const auto t = profile_and_train(opt);
      save_artifacts(t, out_dir);
      std::printf("%zu samples, artifacts in %s\n", t.data.samples.size(), out_dir.c_str());
    } else if (*run) {
      RunEnvironment env;
      env.max_frames = max_frames;
      const RunSpec spec{parse_policy(policy), preset, trace, seed};
      const auto art = load_models(models);
      std::optional<wire::SocketBackend> remote;
      if (!server.empty()) {
        const auto [host, p] = split_endpoint(server);
        remote.emplace(wire::connect_to(host, p), env.geom);
      }
      const auto r = run_experiment(spec, env, art ? &*art : nullptr, remote ? &*remote : nullptr);
      write_run_logs(r, out_dir);
      std::printf("%s rendering_f1=%.4f e2e_p50=%.1f offloads=%d\n", policy_name(spec.policy).c_str(),
                  r.report.rendering_f1, r.report.e2e_p50, r.report.offloads);
    } else if (*sweep) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open " + config_path);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
      const auto cfg = sweep_config_from_json(j);
      const auto art = load_models(cfg.models_dir);
      const auto rows = run_sweep(cfg, RunEnvironment{}, art ? &*art : nullptr);
      if (!cfg.out_csv.empty()) write_text(cfg.out_csv, sweep_csv(rows));
      std::cout << aggregate_csv(aggregate_sweep(rows));
    } else if (*compare) {
      const fs::path p(data_path);
      const auto data = load_dataset_csv(fs::is_directory(p) ? (p / "dataset.csv").string() : data_path);
      TrainOptions t;
      t.epochs = epochs;
      const auto scores = compare_estimators(data, seed, t);
      print_scores(scores, std::cout);
      if (!out_csv.empty()) {
        std::ofstream out(out_csv);
        if (!out) throw ConfigError("cannot write " + out_csv);
        print_scores(scores, out);
      }
    } else if (*gen || *convert) {
      NetworkTrace t;
      if (*gen) {
        t = generate_trace(kind == "4g" ? TraceKind::k4G : TraceKind::k5G, seed, duration);
      } else {
        std::ifstream in(in_path);
        if (!in) throw ParseError("cannot open " + in_path);
        t = convert_throughput_list(in, rtt, scale, 0.01, in_path);
      }
      if (out_csv.empty()) {
        write_trace(t, std::cout);
      } else {
        std::ofstream out(out_csv);
        if (!out) throw ConfigError("cannot write " + out_csv);
        write_trace(t, out);
      }
    } else if (*serve) {
      if (port < 0 || port > 65535) throw ConfigError("--port must be in [0, 65535]");
      RunEnvironment env;
      env.max_frames = max_frames;
      const RunSpec spec{parse_policy("TrackB2B"), preset, trace, seed};
      const auto truth = truth_for(spec, env);
      const auto sc = session_config_for(spec, env);
      wire::Listener l(static_cast<std::uint16_t>(port));
      std::printf("listening on %u\n", static_cast<unsigned>(l.port()));
      std::fflush(stdout);
      InProcessBackend backend(sc.server, env.geom, truth);
      const auto served = wire::serve_connection(l.accept(), backend, env.geom);
      std::printf("served %zu requests\n", served);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const UnsupportedConfiguration& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
