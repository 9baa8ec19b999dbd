// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcsim/dataset.hpp"
#include "pcsim/photocore.hpp"

namespace pcsim {

struct LayerNoise {
  std::size_t layer_index = 0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t sample_count = 0;
};

/// Per-layer Gaussian fit of (simulated - float32) layer outputs.
struct NoiseProfile {
  std::uint64_t seed = 0;
  std::vector<LayerNoise> layers;

  /// Throws FormatError on negative/non-finite moments or duplicate layers.
  void validate() const;
  /// Diagnostics for layers whose mean exceeds their std (saturation bias).
  std::vector<std::string> warnings() const;
};

inline constexpr int kNoiseProfileVersion = 1;

std::string profile_to_json(const NoiseProfile &p);
/// Parses and validates against the versioned schema; throws FormatError.
NoiseProfile profile_from_json(const std::string &text);
void save_profile(const NoiseProfile &p, const std::filesystem::path &path);
NoiseProfile load_profile(const std::filesystem::path &path);

/// For each eligible layer, runs that layer alone on the photocore and fits the
/// elementwise output difference. Throws DomainError if a layer yields fewer
/// than `min_samples` elements.
NoiseProfile estimate_noise_profile(const ModelGraph &model, const Dataset &calibration,
                                    const PhotocoreConfig &cfg,
                                    std::size_t min_samples = 10000);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  /// Rescales each minibatch gradient to at most this global L2 norm; 0 = off.
  double clip_norm = 1.0;
  /// Layer indices whose parameters stay fixed.
  std::vector<std::size_t> frozen_layers;

  void validate() const;
};

struct TrainResult {
  ModelGraph model;
  std::vector<double> epoch_loss; // mean training loss of each epoch
};

/// Minibatch SGD on softmax cross-entropy over non-background pixels, with
/// N(mean, std) noise added to every profiled layer output on each forward
/// pass. Throws DomainError if the loss becomes non-finite.
TrainResult dnf_train(const ModelGraph &model, const Dataset &train, const NoiseProfile &profile,
                      const TrainConfig &tc);

/// dnf_train without noise.
TrainResult fine_tune(const ModelGraph &model, const Dataset &train, const TrainConfig &tc);

namespace train {

/// Double-precision parameters of every layer (empty for parameterless ones).
struct Params {
  std::vector<std::vector<double>> weight;
  std::vector<std::vector<double>> bias;
};

Params params_of(const ModelGraph &model);
ModelGraph with_params(ModelGraph model, const Params &p);
Params zeros_like(const Params &p);

/// Additive per-layer offsets applied after each layer's forward pass; empty
/// entries mean none.
using Injection = std::vector<std::vector<double>>;

/// Mean cross-entropy over the sample's non-background pixels, accumulating
/// d(loss)/d(param) into `grad` scaled by `weight`. Returns 0 and leaves
/// `grad` untouched if the label has no foreground.
double loss_and_grad(const ModelGraph &model, const Params &p, const SegmentationSample &s,
                     const Injection &inject, Params *grad, double weight = 1.0);

} // namespace train

} // namespace pcsim
