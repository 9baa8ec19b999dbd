// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcsim/costmodel.hpp"
#include "pcsim/dataset.hpp"
#include "pcsim/metrics.hpp"
#include "pcsim/photocore.hpp"

namespace pcsim {

/// Class-id mask from [C, H, W] logits (first maximum wins).
LabelMask predict_mask(const Tensor &logits);

/// Predicted masks for every sample. Sample i draws noise from stream i of
/// `noise`; samples run in parallel.
std::vector<LabelMask> predict(const ModelGraph &model, const Dataset &data,
                               const PhotocoreConfig &cfg, const NoiseSource &noise,
                               const SimOptions &opt = {});

/// Metrics of the simulated model over the whole dataset (pixel-level pooling).
MetricReport evaluate(const ModelGraph &model, const Dataset &data, const PhotocoreConfig &cfg,
                      const NoiseSource &noise, const SimOptions &opt = {});

/// Metrics of the float32 reference model.
MetricReport evaluate_reference(const ModelGraph &model, const Dataset &data);

struct SensitivityRow {
  std::size_t layer_index = 0;
  LayerKind layer_kind = LayerKind::dense;
  double miou_fp32 = 0.0;
  double miou_quantized = 0.0;
  double miou_drop = 0.0;
};

/// One row per eligible layer, each run with only that layer on the photocore.
/// Noise comes from `cfg.rng_seed`.
std::vector<SensitivityRow> layer_sensitivity_scan(const ModelGraph &model, const Dataset &data,
                                                   const PhotocoreConfig &cfg);

struct AblationRow {
  std::string setting; // all | no_input_q | no_weight_q | no_output_q
  MetricReport report; // percent fields are relative to float32
};

/// Quantization stages disabled one at a time on `layer_index` alone.
std::vector<AblationRow> quantization_ablation(const ModelGraph &model, const Dataset &data,
                                               const PhotocoreConfig &cfg,
                                               std::size_t layer_index);

struct AbfpComparison {
  MetricReport fp32;
  MetricReport with_abfp;
  MetricReport without_abfp;
};

/// Default pipeline against per-tensor scaling, same noise seed.
AbfpComparison abfp_ablation(const ModelGraph &model, const Dataset &data,
                             const PhotocoreConfig &cfg);

struct RangeUtilization {
  std::size_t layer_index = 0;
  double max_abs = 0.0; // s
  double mean = 0.0;    // of the normalized outputs
  double stddev = 0.0;
  std::vector<double> histogram; // 2*delta_y+1 bins over [-1, 1], sums to 1
  double three_sigma_level_fraction = 0.0;
};

/// Float32 outputs of `layer_index` normalized by their maximum magnitude and
/// binned onto the output ADC levels.
RangeUtilization range_utilization(const ModelGraph &model, const Dataset &data,
                                   std::size_t layer_index, unsigned bits_y = 11);

/// Same statistics over raw values (exposed for testing).
RangeUtilization range_utilization_of(const std::vector<float> &values, unsigned bits_y);

struct SweepRow {
  std::size_t n = 0;
  double gain = 0.0;
  double miou = 0.0;      // mean over seeds
  double pixel_acc = 0.0; // mean over seeds
  double energy = 0.0;
  double power = 0.0;
  double time = 0.0;
  double throughput_ips = 0.0;
  double utilization = 0.0;
};

struct SweepGrid {
  std::vector<std::size_t> n;
  std::vector<double> gain;
  std::size_t seeds = 1; // noise seeds cfg.rng_seed + 0 .. seeds-1
  std::size_t batch = 4;
};

/// Row-major over (n, gain). Accuracy is skipped when `data` is empty.
std::vector<SweepRow> sweep(const ModelGraph &model, const Dataset &data,
                            const PhotocoreConfig &base, const CostParams &cost,
                            const SweepGrid &grid);

} // namespace pcsim
