// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include <algorithm>

#include "pcsim/bf16.hpp"
#include "tile_kernel.hpp"

namespace pcsim {

namespace detail {
void check_gemm_operands(const Tensor &w, const Tensor &x);
}

namespace serial {

Tensor photocore_gemm(const Tensor &w, const Tensor &x, const PhotocoreConfig &cfg,
                      const NoiseSource &noise, GemmId id) {
  cfg.validate();
  detail::check_gemm_operands(w, x);
  const std::size_t n = cfg.n;
  const TiledOperand wt = tile_operand(w, n);
  const TiledOperand xt = tile_operand(x, n);
  const auto w_shared = detail::shared_scale(w, cfg);
  const auto x_shared = detail::shared_scale(x, cfg);
  const detail::KernelConstants k(cfg);
  const std::size_t vectors = x.dim(1);

  Tensor y({w.dim(0), vectors});
  std::vector<float> acc(n), part(n), seg(n);
  for (std::size_t tr = 0; tr < wt.tile_rows; ++tr) {
    for (std::size_t v = 0; v < vectors; ++v) {
      std::fill(acc.begin(), acc.end(), 0.0f);
      for (std::size_t tc = 0; tc < wt.tile_cols; ++tc) {
        const auto wtile = detail::prepare_tile(wt.tile(tr, tc), cfg, w_shared);
        const auto &xtile = xt.tile(tc, v / n);
        for (std::size_t j = 0; j < n; ++j) {
          seg[j] = xtile[j * n + v % n];
        }
        const auto xvec = detail::prepare_vector(seg, cfg, x_shared);
        detail::run_tile(wtile, xvec, k, noise, NoiseKey{id.layer, id.gemm, tr, tc, v, 0},
                         part);
        for (std::size_t i = 0; i < n; ++i) {
          acc[i] = static_cast<float>(
              bf16_round(static_cast<double>(acc[i]) + static_cast<double>(part[i])));
        }
      }
      for (std::size_t i = 0; i < n && tr * n + i < w.dim(0); ++i) {
        y[(tr * n + i) * vectors + v] = acc[i];
      }
    }
  }
  return y;
}

} // namespace serial
} // namespace pcsim
