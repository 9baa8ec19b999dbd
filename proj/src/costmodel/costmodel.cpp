// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/costmodel.hpp"

#include <cmath>
#include <limits>

#include "pcsim/error.hpp"

namespace pcsim {

CostParams CostParams::calibrated(double ratio_a, std::size_t n_a, double ratio_b,
                                  std::size_t n_b, double gain) {
  if (!(ratio_a > 1.0 && ratio_a < gain && ratio_b > 1.0 && ratio_b < gain) ||
      n_b <= n_a || n_a == 0) {
    throw DomainError("gain-cost ratios must lie in (1, gain) with n_b > n_a > 0");
  }
  // P(g)/P(1) = r  <=>  alpha^n = beta * (r - 1) / (g - r)
  const double k_a = (ratio_a - 1.0) / (gain - ratio_a);
  const double k_b = (ratio_b - 1.0) / (gain - ratio_b);
  const double t = static_cast<double>(n_b) / static_cast<double>(n_a);
  CostParams p;
  p.beta = std::pow(k_b / std::pow(k_a, t), 1.0 / (t - 1.0));
  p.alpha = std::pow(k_a * p.beta, 1.0 / static_cast<double>(n_a));
  p.validate();
  return p;
}

void CostParams::validate() const {
  if (!(alpha > 1.0) || !(beta > 0.0)) {
    throw DomainError("cost model needs alpha > 1 and beta > 0");
  }
  if (!(t_mvp >= 0.0) || !(t_weight_send >= 0.0) || !(t_weight_load >= 0.0)) {
    throw DomainError("cost model timings must be non-negative");
  }
}

double power(double gain, std::size_t n, const CostParams &p) {
  if (!(gain > 0.0) || n == 0) {
    throw DomainError("power needs gain > 0 and n >= 1");
  }
  const double nd = static_cast<double>(n);
  return (gain * std::pow(p.alpha, nd) + p.beta) * nd;
}

std::size_t WorkloadStats::weight_tiles() const {
  std::size_t s = 0;
  for (const auto &l : layers) {
    s += l.weight_tiles;
  }
  return s;
}

std::size_t WorkloadStats::mvps() const {
  std::size_t s = 0;
  for (const auto &l : layers) {
    s += l.mvps;
  }
  return s;
}

std::size_t WorkloadStats::padded_zeros() const {
  std::size_t s = 0;
  for (const auto &l : layers) {
    s += l.padded_zeros;
  }
  return s;
}

std::size_t WorkloadStats::tile_elements() const {
  std::size_t s = 0;
  for (const auto &l : layers) {
    s += l.tile_elements;
  }
  return s;
}

double WorkloadStats::utilization() const {
  const std::size_t total = tile_elements();
  if (total == 0) {
    return 1.0;
  }
  return 1.0 - static_cast<double>(padded_zeros()) / static_cast<double>(total);
}

WorkloadStats workload_stats(const ModelGraph &model, std::size_t n, std::size_t batch) {
  if (n == 0 || batch == 0) {
    throw DomainError("workload_stats needs n >= 1 and batch >= 1");
  }
  const auto shapes = model.output_shapes();
  WorkloadStats ws;
  ws.n = n;
  ws.batch = batch;
  Shape in = model.input_shape;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer &layer = model.layers[i];
    if (layer.is_weighted() && layer.domain == Domain::photocore) {
      LayerWorkload lw;
      lw.layer_index = i;
      std::size_t rows = 0, cols = 0;
      if (layer.kind == LayerKind::dense) {
        rows = layer.weight.dim(0);
        cols = layer.weight.dim(1);
        lw.gemms = 1;
        lw.vectors = shape_numel(in) / in[0];
      } else {
        rows = layer.weight.dim(0);
        cols = layer.weight.dim(1);
        lw.gemms = layer.weight.dim(2) * layer.weight.dim(3);
        lw.vectors = in[1] * in[2];
      }
      const std::size_t row_tiles = (rows + n - 1) / n;
      const std::size_t col_tiles = (cols + n - 1) / n;
      lw.weight_tiles = lw.gemms * row_tiles * col_tiles;
      lw.mvps = lw.weight_tiles * lw.vectors * batch;
      lw.tile_elements = lw.weight_tiles * n * n;
      lw.padded_zeros = lw.tile_elements - lw.gemms * rows * cols;
      ws.layers.push_back(lw);
    }
    in = shapes[i];
  }
  return ws;
}

double execution_time(const WorkloadStats &w, const CostParams &p) {
  return static_cast<double>(w.mvps()) * p.t_mvp +
         static_cast<double>(w.weight_tiles()) * (p.t_weight_send + p.t_weight_load);
}

double energy(const WorkloadStats &w, double gain, const CostParams &p) {
  return execution_time(w, p) * power(gain, w.n, p);
}

double energy(const ModelGraph &model, std::size_t n, double gain, std::size_t batch,
              const CostParams &p) {
  return energy(workload_stats(model, n, batch), gain, p);
}

double throughput(const WorkloadStats &w, const CostParams &p) {
  const double t = execution_time(w, p);
  if (t == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return static_cast<double>(w.batch) / t;
}

double throughput(const ModelGraph &model, std::size_t n, double gain, std::size_t batch,
                  const CostParams &p) {
  (void)gain; // the time model does not depend on gain
  return throughput(workload_stats(model, n, batch), p);
}

} // namespace pcsim
