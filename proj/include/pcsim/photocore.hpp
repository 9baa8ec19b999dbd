// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcsim/abfp.hpp"
#include "pcsim/model.hpp"
#include "pcsim/noise.hpp"
#include "pcsim/tensor.hpp"

namespace pcsim {

/// Quantization stage switched off for ablations.
enum class Bypass { none, input_q, weight_q, output_q, all };

/// Scale granularity: ABFP per-vector scales or one scale per operand tensor.
enum class ScaleMode { abfp, per_tensor };

const char *to_string(Bypass b);
Bypass parse_bypass(const std::string &s);
const char *to_string(ScaleMode m);
ScaleMode parse_scale_mode(const std::string &s);

struct PhotocoreConfig {
  std::size_t n = 64;
  int bits_x = 10;
  int bits_w = 7;
  int bits_y = 11;
  double gain = 4.0;
  /// Noise std in pre-ADC counts (units of Y^q * G). Unset means one
  /// twentieth of an output ADC step.
  std::optional<double> noise_sigma;
  std::uint64_t rng_seed = 0;
  Bypass bypass = Bypass::none;
  ScaleMode scale_mode = ScaleMode::abfp;

  /// Throws ConfigError. Rejects n * delta_x * delta_w > 2^31.
  void validate() const;

  QuantParams input_params() const { return QuantParams(bits_x); }
  QuantParams weight_params() const { return QuantParams(bits_w); }
  QuantParams output_params() const { return QuantParams(bits_y); }

  /// Output ADC step in pre-ADC counts: n * delta_x * delta_w / delta_y.
  double adc_step_counts() const;
  double sigma() const;
  /// Standard deviation of the noise as seen in one tile output with weight row
  /// scale `sw` and input scale `sx`, independent of bypass settings.
  double output_sigma(double sw, double sx) const;

  bool quantize_input() const { return bypass != Bypass::input_q && bypass != Bypass::all; }
  bool quantize_weight() const { return bypass != Bypass::weight_q && bypass != Bypass::all; }
  bool quantize_output() const { return bypass != Bypass::output_q && bypass != Bypass::all; }
};

/// Operand zero-padded to multiples of n and cut into n x n blocks.
struct TiledOperand {
  std::size_t n = 0;
  std::size_t rows = 0, cols = 0;               // original extents
  std::size_t padded_rows = 0, padded_cols = 0; // multiples of n
  std::size_t tile_rows = 0, tile_cols = 0;
  std::vector<std::vector<float>> tiles; // row-major grid, each n*n row-major

  const std::vector<float> &tile(std::size_t tr, std::size_t tc) const {
    return tiles[tr * tile_cols + tc];
  }
  /// Reassembles the tiles and crops the padding.
  Tensor untile() const;
};

/// Tiles a rank-2 tensor. Throws ShapeError on other ranks or n == 0.
TiledOperand tile_operand(const Tensor &matrix, std::size_t n);

/// One photo-core MVP on already quantized operands: integer product,
/// gain, additive noise, output ADC quantize/dequantize, bfloat16 result.
/// Of the bypass settings only the output stage is honoured here; the
/// operands' own stages are fixed by how they were quantized.
std::vector<float> tile_mvp(const QuantizedTile &wq, const QuantizedVector &xq,
                            const PhotocoreConfig &cfg, const NoiseSource &noise,
                            const NoiseKey &key);

/// Identifies one GEMM of a forward pass for noise keying.
struct GemmId {
  std::uint64_t layer = 0;
  std::uint64_t gemm = 0;
};

/// W [M x K] times X [K x N] on the simulated core. Partial tile outputs are
/// accumulated in bfloat16 in ascending K-tile order. Tiles run in parallel
/// under OpenMP; the result is bit-identical to serial::photocore_gemm.
Tensor photocore_gemm(const Tensor &w, const Tensor &x, const PhotocoreConfig &cfg,
                      const NoiseSource &noise, GemmId id = {});

namespace serial {
/// Single-threaded reference of photocore_gemm, kept for testing and
/// benchmarking.
Tensor photocore_gemm(const Tensor &w, const Tensor &x, const PhotocoreConfig &cfg,
                      const NoiseSource &noise, GemmId id = {});
} // namespace serial

/// A conv2d layer split into one [c_out x c_in] GEMM per kernel offset over
/// the unpadded input pixels; shift-adding the partial products rebuilds
/// the convolution.
struct Kn2RowLowering {
  std::vector<Tensor> weights; // kh*kw matrices in (r, s) order
  Tensor input;                // [c_in, H*W]
  std::size_t c_out = 0, kh = 0, kw = 0;
  std::size_t stride = 1, padding = 0;
  std::size_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
};

Kn2RowLowering lower_conv_kn2row(const Layer &layer, const Tensor &input);
/// partials[k] is weights[k] applied to input, [c_out, H*W].
Tensor kn2row_recompose(const Kn2RowLowering &lowering, std::span<const Tensor> partials);

struct SimOptions {
  /// Per-layer execution domain overriding the model's own.
  std::optional<std::vector<Domain>> domains;
};

/// Forward pass with photocore layers routed through photocore_gemm and all
/// other work in float32.
Tensor simulate_forward(const ModelGraph &model, const Tensor &input,
                        const PhotocoreConfig &cfg, const NoiseSource &noise,
                        const SimOptions &opts = {});
/// Output of every layer of the simulated forward pass.
std::vector<Tensor> simulate_trace(const ModelGraph &model, const Tensor &input,
                                   const PhotocoreConfig &cfg, const NoiseSource &noise,
                                   const SimOptions &opts = {});

/// Domain vector with only layer `index` on the photocore.
std::vector<Domain> only_layer_on_photocore(const ModelGraph &model, std::size_t index);
std::vector<Domain> all_digital(const ModelGraph &model);

} // namespace pcsim
