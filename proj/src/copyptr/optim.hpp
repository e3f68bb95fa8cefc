// Copyright 2026 The copyptr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COPYPTR_OPTIM_HPP_
#define COPYPTR_OPTIM_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "copyptr/graph.hpp"

namespace copyptr::ad {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators, lazily shaped on the first step.
struct AdamState {
  AdamHyper hyper;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update of every parameter from its `grad`.
// Throws kShapeMismatch if the state belongs to differently shaped params.
void adam_step(ParameterSet& params, AdamState& state, double lr);

// p -= lr * grad
void sgd_step(ParameterSet& params, double lr);

// Linear warmup to `base`, then decay with the inverse square root of the
// update index. warmup == 0 gives a constant rate.
struct LrSchedule {
  double base = 1e-3;
  std::int64_t warmup = 0;

  double rate(std::int64_t update_index) const;
};

// Binary checkpoint: "CPTRCKPT" magic, u32 format version, u32 parameter
// count, then per parameter a u32-length name, u32 rank, u64 dims and raw
// little-endian doubles in row-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParameterSet& params,
                     const std::filesystem::path& path);
// Restores values by name into `params`. Throws kCheckpointMismatch when a
// name is missing or a shape differs, kFileNotFound / kIo on file trouble.
void load_checkpoint(ParameterSet& params, const std::filesystem::path& path);

}  // namespace copyptr::ad

#endif  // COPYPTR_OPTIM_HPP_
