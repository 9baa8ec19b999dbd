// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pcsim/dataset.hpp"
#include "pcsim/photocore.hpp"

namespace pcsim::fixtures {

enum class Kind {
  uniform,        // small conv net, no outliers
  outlier_layer,  // mixing layer fed by a channel about 100x the others
  saturating,     // positive common-mode outputs that clip under gain
  cnn_workload,   // shape-only conv workload for cost sweeps
  maskformer_workload, // shape-only stack of 1024x1024 dense layers
};

const char *to_string(Kind k);
/// Accepts the names above with '-' or '_'; throws ConfigError otherwise.
Kind parse_kind(const std::string &s);

/// A toy segmentation task. Labels are the float32 model's own predictions,
/// with the least confident pixels marked background, so the float32
/// reference scores mIoU 1 on both splits.
struct Fixture {
  Kind kind = Kind::uniform;
  std::uint64_t seed = 0;
  ModelGraph model;
  Dataset train;
  Dataset test;
  PhotocoreConfig config;     // suggested simulation settings
  std::size_t focus_layer = 0; // layer of interest for ablation/rangeutil
};

Fixture generate(Kind kind, std::uint64_t seed);

/// Writes model.json, fixture.json and train/ + test/ dataset directories.
void save_fixture(const Fixture &f, const std::filesystem::path &dir);

/// Images with smooth blob structure in [0, 1].
Tensor smooth_image(std::size_t channels, std::size_t height, std::size_t width,
                    std::uint64_t seed);

/// Labels from the reference model's logits; pixels whose top-1 margin falls in
/// the lowest `ignore_fraction` over the whole split become background.
Dataset label_with_teacher(const ModelGraph &model, std::vector<Tensor> images,
                           double ignore_fraction);

} // namespace pcsim::fixtures
