// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstddef>
#include <vector>

#include "pcsim/model.hpp"

namespace pcsim {

/// Laser power constants and transfer timings. Units are relative.
struct CostParams {
  double alpha = 1.0;
  double beta = 1.0;
  double t_mvp = 1.0e-9;
  double t_weight_send = 40e-9;
  double t_weight_load = 10e-9;

  /// Solves alpha, beta from two measured power ratios P(gain)/P(1): `ratio_a`
  /// at tile size `n_a` and `ratio_b` at `n_b` (n_b > n_a).
  static CostParams calibrated(double ratio_a = 1.4, std::size_t n_a = 64,
                               double ratio_b = 1.9, std::size_t n_b = 128,
                               double gain = 2.0);

  /// Throws DomainError unless alpha > 1, beta > 0 and timings >= 0.
  void validate() const;
};

/// P(G, n) = (G * alpha^n + beta) * n.
double power(double gain, std::size_t n, const CostParams &p);

struct LayerWorkload {
  std::size_t layer_index = 0;
  std::size_t gemms = 0;        // kn2row offsets, 1 for dense
  std::size_t weight_tiles = 0; // over all gemms
  std::size_t vectors = 0;      // input vectors per inference per gemm
  std::size_t mvps = 0;         // over the whole batch
  std::size_t padded_zeros = 0; // zero-padding elements in weight tiles
  std::size_t tile_elements = 0;
};

struct WorkloadStats {
  std::size_t n = 0;
  std::size_t batch = 1;
  std::vector<LayerWorkload> layers;

  std::size_t weight_tiles() const;
  std::size_t mvps() const;
  std::size_t padded_zeros() const;
  std::size_t tile_elements() const;
  /// Fraction of weight-tile elements holding real data; 1 for an empty workload.
  double utilization() const;
};

/// Shape-only accounting of the model's photocore layers.
WorkloadStats workload_stats(const ModelGraph &model, std::size_t n, std::size_t batch);

/// MVPs * t_mvp + weight tiles * (send + load); weights are loaded once per batch.
double execution_time(const WorkloadStats &w, const CostParams &p);

double energy(const ModelGraph &model, std::size_t n, double gain, std::size_t batch,
              const CostParams &p);
double energy(const WorkloadStats &w, double gain, const CostParams &p);

/// Inferences per second for one batch.
double throughput(const ModelGraph &model, std::size_t n, double gain, std::size_t batch,
                  const CostParams &p);
double throughput(const WorkloadStats &w, const CostParams &p);

} // namespace pcsim
