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

#include "edgemix/error.hpp"
#include "edgemix/rng.hpp"
#include "edgemix/box.hpp"
#include "edgemix/bytes.hpp"
#include "edgemix/grid.hpp"
#include "edgemix/scene.hpp"
#include "edgemix/motion.hpp"
#include "edgemix/mlp.hpp"
#include "edgemix/estimator.hpp"
#include "edgemix/optimizer.hpp"
#include "edgemix/netsim.hpp"
#include "edgemix/serversim.hpp"
#include "edgemix/metrics.hpp"
#include "edgemix/policy.hpp"
#include "edgemix/client.hpp"
#include "edgemix/experiment.hpp"
#include "edgemix/wire.hpp"
