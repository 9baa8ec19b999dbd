// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pcsim/photocore.hpp"

namespace pcsim::detail {

// Weight tile as programmed on the core. When the weight DAC is bypassed the
// raw values are used in place of integer codes.
struct DriveTile {
  std::vector<std::int32_t> codes;
  std::vector<float> raw;
  std::vector<float> scales;
  bool quantized = true;
};

struct DriveVector {
  std::vector<std::int32_t> codes;
  std::vector<float> raw;
  float scale = 0.0f;
  bool quantized = true;
};

struct KernelConstants {
  std::size_t n = 0;
  double delta_x = 0, delta_w = 0, delta_y = 0;
  double gain = 1.0;
  double sigma = 0.0;
  bool quantize_output = true;

  explicit KernelConstants(const PhotocoreConfig &cfg);
};

DriveTile prepare_tile(std::span<const float> tile, const PhotocoreConfig &cfg,
                       std::optional<float> shared_scale);
DriveVector prepare_vector(std::span<const float> x, const PhotocoreConfig &cfg,
                           std::optional<float> shared_scale);

/// Output of one MVP, bf16-rounded, written to out[0..n).
void run_tile(const DriveTile &w, const DriveVector &x, const KernelConstants &k,
              const NoiseSource &noise, NoiseKey key, std::span<float> out);

/// Shared scale of a whole operand under ScaleMode::per_tensor.
std::optional<float> shared_scale(const Tensor &t, const PhotocoreConfig &cfg);

} // namespace pcsim::detail
