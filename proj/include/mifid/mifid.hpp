/* Copyright 2026 The mifid-engine Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef MIFID_MIFID_HPP
#define MIFID_MIFID_HPP

#include "mifid/analysis.hpp"
#include "mifid/calibration.hpp"
#include "mifid/error.hpp"
#include "mifid/feature_store.hpp"
#include "mifid/memorization.hpp"
#include "mifid/metrics.hpp"
#include "mifid/npy.hpp"
#include "mifid/persistence.hpp"
#include "mifid/pipeline.hpp"
#include "mifid/synth.hpp"
#include "mifid/text.hpp"
#include "mifid/version.hpp"

#endif  // MIFID_MIFID_HPP
