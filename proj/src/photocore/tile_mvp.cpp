// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include <algorithm>
#include <cmath>

#include "pcsim/bf16.hpp"
#include "pcsim/error.hpp"
#include "tile_kernel.hpp"

namespace pcsim::detail {

KernelConstants::KernelConstants(const PhotocoreConfig &cfg)
    : n(cfg.n), delta_x(static_cast<double>(cfg.input_params().delta)),
      delta_w(static_cast<double>(cfg.weight_params().delta)),
      delta_y(static_cast<double>(cfg.output_params().delta)), gain(cfg.gain),
      sigma(cfg.sigma()), quantize_output(cfg.quantize_output()) {}

DriveTile prepare_tile(std::span<const float> tile, const PhotocoreConfig &cfg,
                       std::optional<float> shared) {
  const std::size_t n = cfg.n;
  DriveTile d;
  d.quantized = cfg.quantize_weight();
  if (d.quantized) {
    QuantizedTile q = shared ? quantize_tile(tile, n, cfg.weight_params(), *shared)
                             : quantize_tile(tile, n, cfg.weight_params());
    d.codes = std::move(q.q);
    d.scales = std::move(q.row_scales);
  } else {
    d.raw.assign(tile.begin(), tile.end());
    d.scales = shared ? std::vector<float>(n, *shared) : extract_row_scales(tile, n);
  }
  return d;
}

DriveVector prepare_vector(std::span<const float> x, const PhotocoreConfig &cfg,
                           std::optional<float> shared) {
  DriveVector d;
  d.quantized = cfg.quantize_input();
  d.scale = shared ? *shared : vector_scale(x);
  if (d.quantized) {
    d.codes = quantize(x, d.scale, cfg.input_params());
  } else {
    d.raw.assign(x.begin(), x.end());
  }
  return d;
}

std::optional<float> shared_scale(const Tensor &t, const PhotocoreConfig &cfg) {
  if (cfg.scale_mode == ScaleMode::per_tensor) {
    return per_tensor_scale(t.data());
  }
  return std::nullopt;
}

void run_tile(const DriveTile &w, const DriveVector &x, const KernelConstants &k,
              const NoiseSource &noise, NoiseKey key, std::span<float> out) {
  const std::size_t n = k.n;
  const bool exact = w.quantized && x.quantized;
  // Full-scale "levels" of each operand: the DAC code range when quantized,
  // the scale itself when the raw value drives the core.
  const double lx = x.quantized ? k.delta_x : static_cast<double>(x.scale);
  for (std::size_t i = 0; i < n; ++i) {
    const double sw = w.scales[i];
    const double sx = x.scale;
    if (sw == 0.0 || sx == 0.0) {
      out[i] = 0.0f;
      continue;
    }
    double yq = 0.0;
    if (exact) {
      std::int64_t acc = 0;
      const std::int32_t *wr = w.codes.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        acc += std::int64_t{wr[j]} * std::int64_t{x.codes[j]};
      }
      yq = static_cast<double>(acc);
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        const double a = w.quantized ? static_cast<double>(w.codes[i * n + j])
                                     : static_cast<double>(w.raw[i * n + j]);
        const double b = x.quantized ? static_cast<double>(x.codes[j])
                                     : static_cast<double>(x.raw[j]);
        yq += a * b;
      }
    }
    const double lw = w.quantized ? k.delta_w : sw;
    // sigma is in integer-code units; rescale so the noise keeps the same
    // fraction of full scale when an operand drives the core unquantized
    double eps = 0.0;
    if (k.sigma > 0.0) {
      key.element = i;
      eps = k.sigma * noise.normal(key);
      if (!exact) {
        eps *= (lx * lw) / (k.delta_x * k.delta_w);
      }
    }
    double y;
    if (k.quantize_output) {
      const double full_scale = static_cast<double>(n) * lx * lw;
      const double v = yq * k.gain + eps;
      const double qy =
          std::clamp(std::round(v / full_scale * k.delta_y), -k.delta_y, k.delta_y);
      y = qy * (static_cast<double>(n) * sw * sx) / (k.gain * k.delta_y);
    } else {
      const double unit = (sw * sx) / (lw * lx);
      y = yq * unit + eps * unit / k.gain;
    }
    out[i] = static_cast<float>(bf16_round(y));
  }
}

} // namespace pcsim::detail

namespace pcsim {

std::vector<float> tile_mvp(const QuantizedTile &wq, const QuantizedVector &xq,
                            const PhotocoreConfig &cfg, const NoiseSource &noise,
                            const NoiseKey &key) {
  cfg.validate();
  if (wq.n != cfg.n || xq.q.size() != cfg.n) {
    throw ShapeError("tile_mvp operands do not match tile size " +
                     std::to_string(cfg.n));
  }
  if (wq.params.delta != cfg.weight_params().delta ||
      xq.params.delta != cfg.input_params().delta) {
    throw ShapeError("tile_mvp operands quantized with foreign bit-widths");
  }
  detail::DriveTile w{wq.q, {}, wq.row_scales, true};
  detail::DriveVector x{xq.q, {}, xq.scale, true};
  std::vector<float> out(cfg.n);
  detail::run_tile(w, x, detail::KernelConstants(cfg), noise, key, out);
  return out;
}

} // namespace pcsim
