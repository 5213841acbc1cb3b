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

// Trace-driven uplink: per-second throughput integrated exactly across second
// boundaries, per-second RTT lookup. Traces wrap around at their end.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "edgemix/error.hpp"
#include "edgemix/rng.hpp"

namespace edgemix {

struct TraceSecond {
  double throughput_mbps = 0.0;
  double rtt_ms = 0.0;
};

struct NetworkTrace {
  std::vector<TraceSecond> seconds;
  std::string label = "custom";  // 4G, 5G or custom

  int duration_s() const noexcept { return static_cast<int>(seconds.size()); }
  const TraceSecond& at_second(std::int64_t s) const {
    const auto n = static_cast<std::int64_t>(seconds.size());
    return seconds[static_cast<std::size_t>(((s % n) + n) % n)];
  }
};

inline void validate(const NetworkTrace& t) {
  if (t.seconds.empty()) throw InvalidArgument("trace must span at least one second");
  for (std::size_t i = 0; i < t.seconds.size(); ++i) {
    if (!(t.seconds[i].throughput_mbps > 0.0)) {
      throw InvalidArgument("trace second " + std::to_string(i) + ": throughput must be > 0");
    }
    if (!(t.seconds[i].rtt_ms >= 0.0)) throw InvalidArgument("trace second " + std::to_string(i) + ": rtt must be >= 0");
  }
}

// CSV with header `t_sec,throughput_mbps,rtt_ms`; rows in order from t_sec 0.
inline NetworkTrace parse_trace(std::istream& in, const std::string& source = "<trace>") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ": empty trace");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t_sec,throughput_mbps,rtt_ms") throw ParseError(source + ": missing header t_sec,throughput_mbps,rtt_ms");
  NetworkTrace t;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    long sec = 0;
    double tput = 0.0, rtt = 0.0;
    char c1 = 0, c2 = 0;
    std::string rest;
    if (!(ss >> sec >> c1 >> tput >> c2 >> rtt) || c1 != ',' || c2 != ',' || (ss >> rest)) {
      throw ParseError(source + ": malformed row " + std::to_string(row));
    }
    if (sec != static_cast<long>(t.seconds.size())) {
      throw ParseError(source + ": row " + std::to_string(row) + " has t_sec " + std::to_string(sec) + ", expected " +
                       std::to_string(t.seconds.size()));
    }
    if (!(tput > 0.0) || !std::isfinite(tput)) {
      throw ParseError(source + ": row " + std::to_string(row) + " has non-positive throughput");
    }
    if (!(rtt >= 0.0) || !std::isfinite(rtt)) throw ParseError(source + ": row " + std::to_string(row) + " has negative rtt");
    t.seconds.push_back({tput, rtt});
  }
  if (t.seconds.empty()) throw ParseError(source + ": no data rows");
  return t;
}

inline NetworkTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace " + path);
  auto t = parse_trace(in, path);
  if (path.find("5g") != std::string::npos || path.find("5G") != std::string::npos) {
    t.label = "5G";
  } else if (path.find("4g") != std::string::npos || path.find("4G") != std::string::npos) {
    t.label = "4G";
  }
  return t;
}

inline void write_trace(const NetworkTrace& t, std::ostream& out) {
  out << "t_sec,throughput_mbps,rtt_ms\n";
  char buf[96];
  for (std::size_t i = 0; i < t.seconds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.3f,%.2f\n", i, t.seconds[i].throughput_mbps, t.seconds[i].rtt_ms);
    out << buf;
  }
}

// Per-second throughput samples (one number per second, separated by
// whitespace, commas or newlines; '#' starts a comment) into a trace with a
// constant RTT. `scale` converts the input unit to Mbps, e.g. 0.001 for kbps.
// Non-positive samples are lifted to `floor_mbps`.
inline NetworkTrace convert_throughput_list(std::istream& in, double rtt_ms, double scale = 1.0,
                                            double floor_mbps = 0.01, const std::string& source = "<list>") {
  if (!(rtt_ms >= 0.0)) throw InvalidArgument("convert: rtt must be >= 0");
  if (!(scale > 0.0)) throw InvalidArgument("convert: scale must be > 0");
  NetworkTrace t;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t' || c == '\r') c = ' ';
    }
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (used != tok.size() || !std::isfinite(v)) {
        throw ParseError(source + ": line " + std::to_string(row) + ": not a number '" + tok + "'");
      }
      t.seconds.push_back({std::max(floor_mbps, v * scale), rtt_ms});
    }
  }
  if (t.seconds.empty()) throw ParseError(source + ": no throughput samples");
  return t;
}

// Earliest time at which `bytes` have been sent starting at `start_ms`.
inline double transmit(const NetworkTrace& trace, double bytes, double start_ms) {
  if (!(bytes > 0.0)) throw InvalidArgument("transmit: bytes must be > 0");
  if (!(start_ms >= 0.0)) throw InvalidArgument("transmit: start time must be >= 0");
  double bits = bytes * 8.0;
  double t = start_ms;
  auto sec = static_cast<std::int64_t>(std::floor(t / 1000.0));
  for (;;) {
    const double rate = trace.at_second(sec).throughput_mbps * 1000.0;  // bits per ms
    const double boundary = static_cast<double>(sec + 1) * 1000.0;
    const double capacity = rate * (boundary - t);
    if (capacity >= bits) return t + bits / rate;
    bits -= capacity;
    t = boundary;
    ++sec;
  }
}

inline double rtt_at(const NetworkTrace& trace, double t_ms) {
  if (!(t_ms >= 0.0)) throw InvalidArgument("rtt_at: time must be >= 0");
  return trace.at_second(static_cast<std::int64_t>(std::floor(t_ms / 1000.0))).rtt_ms;
}

enum class TraceKind { k4G, k5G };

// Synthetic cellular uplink: the trace mean is drawn from the kind's range
// (4G 10.4-36.4 Mbps, 5G 12.2-135.5 Mbps) and per-second throughput follows
// a log-normal AR(1) process around it. RTT is centred on 39 ms (4G) or
// 34 ms (5G).
inline NetworkTrace generate_trace(TraceKind kind, std::uint64_t seed, int duration_s = 300) {
  if (duration_s < 1) throw InvalidArgument("generate_trace: duration must be >= 1");
  SeqRng rng(hash_mix({seed, hash_name(kind == TraceKind::k4G ? "4g" : "5g")}));
  const bool is4g = kind == TraceKind::k4G;
  const double mean = is4g ? rng.uniform(10.4, 36.4) : rng.uniform(12.2, 135.5);
  const double rtt_mean = (is4g ? 39.0 : 34.0) * rng.uniform(0.85, 1.15);
  const double sigma = is4g ? 0.45 : 0.55;
  const double phi = 0.85;
  NetworkTrace t;
  t.label = is4g ? "4G" : "5G";
  double x = rng.normal();
  double r = rng.normal();
  for (int s = 0; s < duration_s; ++s) {
    x = phi * x + std::sqrt(1.0 - phi * phi) * rng.normal();
    r = 0.7 * r + std::sqrt(1.0 - 0.49) * rng.normal();
    const double tput = std::max(0.5, mean * std::exp(sigma * x - 0.5 * sigma * sigma));
    const double rtt = std::max(8.0, rtt_mean * (1.0 + 0.2 * r));
    // Values are rounded to the CSV precision so generated and reloaded traces agree.
    t.seconds.push_back({std::round(tput * 1000.0) / 1000.0, std::round(rtt * 100.0) / 100.0});
  }
  return t;
}

// "4g:SEED" / "5g:SEED" name a synthetic trace, anything else is a CSV path.
inline NetworkTrace resolve_trace(const std::string& spec, int duration_s = 300) {
  auto synth = [&](const char* prefix, TraceKind k) -> std::optional<NetworkTrace> {
    const std::string p(prefix);
    if (spec.rfind(p, 0) != 0) return std::nullopt;
    try {
      return generate_trace(k, std::stoull(spec.substr(p.size())), duration_s);
    } catch (const std::logic_error&) {
      throw ConfigError("bad trace spec '" + spec + "'");
    }
  };
  if (auto t = synth("4g:", TraceKind::k4G)) return *t;
  if (auto t = synth("5g:", TraceKind::k5G)) return *t;
  return load_trace(spec);
}

}  // namespace edgemix
