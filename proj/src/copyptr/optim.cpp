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

#include "copyptr/optim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "copyptr/error.hpp"

namespace copyptr::ad {

void adam_step(ParameterSet& params, AdamState& state, double lr) {
  if (state.m.empty()) {
    for (const Parameter& p : params) {
      state.m.emplace_back(p.value.shape(), std::vector<double>(p.value.size()));
      state.v.emplace_back(p.value.shape(), std::vector<double>(p.value.size()));
    }
  }
  if (state.m.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "Adam state for " +
                                               std::to_string(state.m.size()) +
                                               " parameters, got " +
                                               std::to_string(params.size()));
  }
  ++state.step;
  const AdamHyper& h = state.hyper;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    if (!m.same_shape(p.value) || !p.grad.same_shape(p.value)) {
      throw Error(ErrorCode::kShapeMismatch, "Adam state for " + p.name);
    }
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g;
      v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.value[k] -= lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

void sgd_step(ParameterSet& params, double lr) {
  for (Parameter& p : params) {
    for (std::size_t k = 0; k < p.value.size(); ++k) p.value[k] -= lr * p.grad[k];
  }
}

double LrSchedule::rate(std::int64_t update_index) const {
  if (warmup <= 0) return base;
  const double u = static_cast<double>(std::max<std::int64_t>(update_index, 1));
  const double w = static_cast<double>(warmup);
  return base * std::min(u / w, std::sqrt(w / u));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'C', 'P', 'T', 'R', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::kCheckpointMismatch, "truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const ParameterSet& params,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

void load_checkpoint(ParameterSet& params, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kCheckpointMismatch, "not a checkpoint: " + path.string());
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kCheckpointMismatch,
                "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(in);
  std::map<std::string, Tensor> loaded;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rank = get<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get<std::uint64_t>(in));
      n *= d;
    }
    std::vector<double> values(n);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw Error(ErrorCode::kCheckpointMismatch, "truncated checkpoint");
    loaded.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (loaded.size() != params.size()) {
    throw Error(ErrorCode::kCheckpointMismatch,
                "checkpoint has " + std::to_string(loaded.size()) +
                    " parameters, model has " + std::to_string(params.size()));
  }
  for (const Parameter& p : params) {
    auto it = loaded.find(p.name);
    if (it == loaded.end()) {
      throw Error(ErrorCode::kCheckpointMismatch, "missing parameter " + p.name);
    }
    if (!it->second.same_shape(p.value)) {
      throw Error(ErrorCode::kCheckpointMismatch,
                  p.name + ": checkpoint " + it->second.shape_string() +
                      ", model " + p.value.shape_string());
    }
  }
  for (Parameter& p : params) p.value = std::move(loaded.at(p.name));
}

}  // namespace copyptr::ad
