// Copyright 2026 The impactlab Authors
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


#ifndef IMPACTLAB_HARNESS_HPP_
#define IMPACTLAB_HARNESS_HPP_

#include "impactlab/harness/format.hpp"
#include "impactlab/harness/metrics.hpp"
#include "impactlab/harness/replay.hpp"
#include "impactlab/harness/run.hpp"
#include "impactlab/harness/spec.hpp"
#include "impactlab/harness/summarize.hpp"

#endif  // IMPACTLAB_HARNESS_HPP_
