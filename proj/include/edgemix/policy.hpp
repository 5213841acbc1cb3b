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

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "edgemix/error.hpp"

namespace edgemix {

enum class PolicyKind { kBack2Back, kTrackB2B, kTrackRoI, kTrackUD, kViTMAlis, kRandom };

enum class Ablation { kNone, kNoRegType, kNoMlps, kNoDynaRes };

struct Policy {
  PolicyKind kind = PolicyKind::kViTMAlis;
  Ablation ablation = Ablation::kNone;
  int jpeg_quality = 95;
  int ud_threshold_intervals = 15;  // TrackUD: downsample after an offload slower than this
  std::uint64_t random_seed = 0;    // kRandom only
};

inline std::string policy_name(const Policy& p) {
  switch (p.kind) {
    case PolicyKind::kBack2Back: return "Back2Back";
    case PolicyKind::kTrackB2B: return "TrackB2B";
    case PolicyKind::kTrackRoI: return "TrackRoI";
    case PolicyKind::kTrackUD: return "TrackUD";
    case PolicyKind::kRandom: return "Random";
    case PolicyKind::kViTMAlis: break;
  }
  switch (p.ablation) {
    case Ablation::kNone: return "ViTMAlis";
    case Ablation::kNoRegType: return "ViTMAlis-noRegType";
    case Ablation::kNoMlps: return "ViTMAlis-noMLPs";
    case Ablation::kNoDynaRes: return "ViTMAlis-noDynaRes";
  }
  return "?";
}

inline void validate(const Policy& p) {
  if (p.jpeg_quality < 1 || p.jpeg_quality > 100) throw InvalidArgument("jpeg_quality must be in [1,100]");
  if (p.ud_threshold_intervals < 1) throw InvalidArgument("ud_threshold_intervals must be >= 1");
  if (p.kind != PolicyKind::kViTMAlis && p.ablation != Ablation::kNone) {
    throw InvalidArgument("ablations apply to ViTMAlis only");
  }
}

// Case-insensitive; accepts the names produced by policy_name.
inline Policy parse_policy(const std::string& name) {
  std::string s;
  for (char c : name) {
    if (c != '-' && c != '_') s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  Policy p;
  if (s == "back2back") p.kind = PolicyKind::kBack2Back;
  else if (s == "trackb2b") p.kind = PolicyKind::kTrackB2B;
  else if (s == "trackroi") p.kind = PolicyKind::kTrackRoI;
  else if (s == "trackud") p.kind = PolicyKind::kTrackUD;
  else if (s == "random") p.kind = PolicyKind::kRandom;
  else if (s == "vitmalis") p.kind = PolicyKind::kViTMAlis;
  else if (s == "vitmalisnoregtype") p.ablation = Ablation::kNoRegType;
  else if (s == "vitmalisnomlps") p.ablation = Ablation::kNoMlps;
  else if (s == "vitmalisnodynares") p.ablation = Ablation::kNoDynaRes;
  else throw ConfigError("unknown policy '" + name + "'");
  return p;
}

inline std::vector<Policy> baseline_policies() {
  return {parse_policy("Back2Back"), parse_policy("TrackB2B"), parse_policy("TrackRoI"), parse_policy("TrackUD")};
}

inline std::vector<Policy> ablation_policies() {
  return {parse_policy("ViTMAlis-noRegType"), parse_policy("ViTMAlis-noMLPs"), parse_policy("ViTMAlis-noDynaRes")};
}

inline bool uses_estimator(const Policy& p) { return p.kind == PolicyKind::kViTMAlis; }
inline bool uses_region_types(const Policy& p) {
  return p.kind == PolicyKind::kViTMAlis || p.kind == PolicyKind::kTrackRoI;
}
inline bool uses_tracking(const Policy& p) { return p.kind != PolicyKind::kBack2Back; }

}  // namespace edgemix
