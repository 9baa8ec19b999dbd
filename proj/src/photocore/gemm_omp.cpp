// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include <omp.h>

#include <algorithm>

#include "pcsim/bf16.hpp"
#include "pcsim/error.hpp"
#include "tile_kernel.hpp"

namespace pcsim {

namespace detail {

void check_gemm_operands(const Tensor &w, const Tensor &x) {
  if (w.rank() != 2 || x.rank() != 2 || w.dim(1) != x.dim(0)) {
    throw ShapeError("photocore_gemm: " + shape_str(w.shape()) + " x " +
                     shape_str(x.shape()) + " is not a valid product");
  }
}

} // namespace detail

Tensor photocore_gemm(const Tensor &w, const Tensor &x, const PhotocoreConfig &cfg,
                      const NoiseSource &noise, GemmId id) {
  cfg.validate();
  detail::check_gemm_operands(w, x);
  const std::size_t n = cfg.n;
  const std::size_t m_rows = w.dim(0);
  const std::size_t vectors = x.dim(1);
  const TiledOperand wt = tile_operand(w, n);
  const std::size_t kt = wt.tile_cols;
  const std::size_t mt = wt.tile_rows;
  const auto w_shared = detail::shared_scale(w, cfg);
  const auto x_shared = detail::shared_scale(x, cfg);
  const detail::KernelConstants k(cfg);

  // Weight-stationary: every tile is quantized once up front.
  std::vector<detail::DriveTile> wtiles(mt * kt);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(wtiles.size()); ++t) {
    wtiles[t] = detail::prepare_tile(wt.tiles[t], cfg, w_shared);
  }

  // Input vector segments, one per (K-tile, column).
  const std::size_t k_dim = x.dim(0);
  const auto xd = x.data();
  std::vector<detail::DriveVector> xsegs(kt * vectors);
#pragma omp parallel
  {
    std::vector<float> seg(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(xsegs.size()); ++s) {
      const std::size_t tc = static_cast<std::size_t>(s) / vectors;
      const std::size_t v = static_cast<std::size_t>(s) % vectors;
      std::fill(seg.begin(), seg.end(), 0.0f);
      const std::size_t end = std::min(n, k_dim - tc * n);
      for (std::size_t j = 0; j < end; ++j) {
        seg[j] = xd[(tc * n + j) * vectors + v];
      }
      xsegs[s] = detail::prepare_vector(seg, cfg, x_shared);
    }
  }

  Tensor y({m_rows, vectors});
  auto yd = y.data();
#pragma omp parallel
  {
    std::vector<float> acc(n), part(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(mt * vectors); ++p) {
      const std::size_t tr = static_cast<std::size_t>(p) / vectors;
      const std::size_t v = static_cast<std::size_t>(p) % vectors;
      std::fill(acc.begin(), acc.end(), 0.0f);
      for (std::size_t tc = 0; tc < kt; ++tc) {
        const NoiseKey key{id.layer, id.gemm, tr, tc, v, 0};
        detail::run_tile(wtiles[tr * kt + tc], xsegs[tc * vectors + v], k, noise, key,
                         part);
        for (std::size_t i = 0; i < n; ++i) {
          acc[i] = static_cast<float>(
              bf16_round(static_cast<double>(acc[i]) + static_cast<double>(part[i])));
        }
      }
      const std::size_t r_end = std::min(n, m_rows - tr * n);
      for (std::size_t i = 0; i < r_end; ++i) {
        yd[(tr * n + i) * vectors + v] = acc[i];
      }
    }
  }
  return y;
}

} // namespace pcsim
