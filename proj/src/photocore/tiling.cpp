// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include <algorithm>

#include "pcsim/error.hpp"
#include "pcsim/photocore.hpp"

namespace pcsim {

TiledOperand tile_operand(const Tensor &m, std::size_t n) {
  if (m.rank() != 2) {
    throw ShapeError("tile_operand expects a matrix, got " + shape_str(m.shape()));
  }
  if (n == 0) {
    throw ShapeError("tile size must be positive");
  }
  TiledOperand t;
  t.n = n;
  t.rows = m.dim(0);
  t.cols = m.dim(1);
  t.tile_rows = (t.rows + n - 1) / n;
  t.tile_cols = (t.cols + n - 1) / n;
  t.padded_rows = t.tile_rows * n;
  t.padded_cols = t.tile_cols * n;
  t.tiles.assign(t.tile_rows * t.tile_cols, std::vector<float>(n * n, 0.0f));
  const auto d = m.data();
  for (std::size_t tr = 0; tr < t.tile_rows; ++tr) {
    for (std::size_t tc = 0; tc < t.tile_cols; ++tc) {
      auto &tile = t.tiles[tr * t.tile_cols + tc];
      const std::size_t r_end = std::min(n, t.rows - tr * n);
      const std::size_t c_end = std::min(n, t.cols - tc * n);
      for (std::size_t i = 0; i < r_end; ++i) {
        const float *src = d.data() + (tr * n + i) * t.cols + tc * n;
        std::copy(src, src + c_end, tile.begin() + static_cast<std::ptrdiff_t>(i * n));
      }
    }
  }
  return t;
}

Tensor TiledOperand::untile() const {
  Tensor m({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m[r * cols + c] = tile(r / n, c / n)[(r % n) * n + (c % n)];
    }
  }
  return m;
}

} // namespace pcsim
