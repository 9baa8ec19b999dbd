// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/abfp.hpp"

#include <algorithm>
#include <cmath>

#include "pcsim/bf16.hpp"
#include "pcsim/error.hpp"

namespace pcsim {

QuantParams::QuantParams(int b) : bits(b) {
  if (b < 2 || b > 31) {
    throw DomainError("quantizer bit-width must lie in [2, 31], got " +
                      std::to_string(b));
  }
  delta = (std::int64_t{1} << (b - 1)) - 1;
}

void quantize(std::span<const float> x, double scale, const QuantParams &p,
              std::span<std::int32_t> out) {
  if (!(scale > 0.0)) {
    if (std::any_of(x.begin(), x.end(), [](float v) { return v != 0.0f; })) {
      throw DomainError("quantize: non-positive scale with nonzero input");
    }
    std::fill(out.begin(), out.end(), 0);
    return;
  }
  const double d = static_cast<double>(p.delta);
  for (std::size_t i = 0; i < x.size(); ++i) {
    // std::round is half-away-from-zero
    const double r = std::round(static_cast<double>(x[i]) / scale * d);
    out[i] = static_cast<std::int32_t>(std::clamp(r, -d, d));
  }
}

std::vector<std::int32_t> quantize(std::span<const float> x, double scale,
                                   const QuantParams &p) {
  std::vector<std::int32_t> out(x.size());
  quantize(x, scale, p, out);
  return out;
}

float vector_scale(std::span<const float> x) {
  float m = 0.0f;
  for (float v : x) {
    m = std::max(m, std::fabs(v));
  }
  return bf16_round(m);
}

std::vector<float> extract_row_scales(std::span<const float> tile, std::size_t n) {
  std::vector<float> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = vector_scale(tile.subspan(i * n, n));
  }
  return s;
}

QuantizedTile quantize_tile(std::span<const float> tile, std::size_t n,
                            const QuantParams &p) {
  QuantizedTile t{n, std::vector<std::int32_t>(n * n), extract_row_scales(tile, n), p};
  for (std::size_t i = 0; i < n; ++i) {
    quantize(tile.subspan(i * n, n), t.row_scales[i], p,
             std::span(t.q).subspan(i * n, n));
  }
  return t;
}

QuantizedTile quantize_tile(std::span<const float> tile, std::size_t n,
                            const QuantParams &p, float shared_scale) {
  QuantizedTile t{n, std::vector<std::int32_t>(n * n),
                  std::vector<float>(n, shared_scale), p};
  for (std::size_t i = 0; i < n; ++i) {
    quantize(tile.subspan(i * n, n), shared_scale, p,
             std::span(t.q).subspan(i * n, n));
  }
  return t;
}

QuantizedVector quantize_input_vector(std::span<const float> x, const QuantParams &p) {
  return quantize_input_vector(x, p, vector_scale(x));
}

QuantizedVector quantize_input_vector(std::span<const float> x, const QuantParams &p,
                                      float shared_scale) {
  return QuantizedVector{quantize(x, shared_scale, p), shared_scale, p};
}

float per_tensor_scale(std::span<const float> values) { return vector_scale(values); }

} // namespace pcsim
