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

#ifndef IMPACTLAB_NN_HPP_
#define IMPACTLAB_NN_HPP_

#include "impactlab/nn/checkpoint.hpp"
#include "impactlab/nn/gradcheck.hpp"
#include "impactlab/nn/graph.hpp"
#include "impactlab/nn/inference.hpp"
#include "impactlab/nn/layers.hpp"
#include "impactlab/nn/ops.hpp"
#include "impactlab/nn/optimizer.hpp"
#include "impactlab/nn/tensor.hpp"

#endif  // IMPACTLAB_NN_HPP_
