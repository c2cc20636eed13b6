/*
 * Copyright 2026 The mmlime Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Umbrella header.

#pragma once

#include "mmlime/audio_features.hpp"
#include "mmlime/cli.hpp"
#include "mmlime/core.hpp"
#include "mmlime/external_predictor.hpp"
#include "mmlime/global_agg.hpp"
#include "mmlime/hpss.hpp"
#include "mmlime/json_io.hpp"
#include "mmlime/lime_engine.hpp"
#include "mmlime/predictor.hpp"
#include "mmlime/report_io.hpp"
#include "mmlime/selfcheck.hpp"
#include "mmlime/stft.hpp"
#include "mmlime/text_features.hpp"
#include "mmlime/wav.hpp"
