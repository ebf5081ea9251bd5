// Copyright 2026 The nmrb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NMRB_NMRB_HPP
#define NMRB_NMRB_HPP

#include "nmrb/analysis.hpp"
#include "nmrb/asf.hpp"
#include "nmrb/channel.hpp"
#include "nmrb/classical.hpp"
#include "nmrb/clifford.hpp"
#include "nmrb/curve.hpp"
#include "nmrb/fit.hpp"
#include "nmrb/linalg.hpp"
#include "nmrb/noise_models.hpp"
#include "nmrb/random.hpp"
#include "nmrb/rb_sim.hpp"
#include "nmrb/sequence.hpp"

#endif  // NMRB_NMRB_HPP
