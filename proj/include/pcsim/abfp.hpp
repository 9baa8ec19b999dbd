// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pcsim {

/// Symmetric integer grid with `bits` bits: codes in [-delta, delta] where
/// delta = 2^(bits-1) - 1.
struct QuantParams {
  int bits = 8;
  std::int64_t delta = 127;

  QuantParams() = default;
  /// Throws DomainError unless 2 <= bits <= 31.
  explicit QuantParams(int bits);
};

/// clip(round_half_away(x / scale * delta), -delta, delta) per element.
/// scale == 0 is only allowed for an all-zero x and yields zeros.
void quantize(std::span<const float> x, double scale, const QuantParams &p,
              std::span<std::int32_t> out);
std::vector<std::int32_t> quantize(std::span<const float> x, double scale,
                                   const QuantParams &p);

/// Reconstructed real value of one code.
inline double dequantize(std::int32_t q, double scale, const QuantParams &p) {
  return static_cast<double>(q) / static_cast<double>(p.delta) * scale;
}

/// bf16_round(max |x|).
float vector_scale(std::span<const float> x);

/// One bf16 scale per row of a row-major n x n tile.
std::vector<float> extract_row_scales(std::span<const float> tile, std::size_t n);

/// Weight tile as loaded onto the core: codes plus per-row scales.
struct QuantizedTile {
  std::size_t n = 0;
  std::vector<std::int32_t> q; // n x n, row-major
  std::vector<float> row_scales;
  QuantParams params;
};

/// Input vector segment as driven through the input DACs.
struct QuantizedVector {
  std::vector<std::int32_t> q;
  float scale = 0.0f;
  QuantParams params;
};

/// Per-row ABFP quantization of an n x n tile.
QuantizedTile quantize_tile(std::span<const float> tile, std::size_t n,
                            const QuantParams &p);
/// Same, with every row sharing `shared_scale` (the per-tensor-max scheme).
QuantizedTile quantize_tile(std::span<const float> tile, std::size_t n,
                            const QuantParams &p, float shared_scale);

QuantizedVector quantize_input_vector(std::span<const float> x, const QuantParams &p);
QuantizedVector quantize_input_vector(std::span<const float> x, const QuantParams &p,
                                      float shared_scale);

/// bf16_round of the global max magnitude.
float per_tensor_scale(std::span<const float> values);

} // namespace pcsim
