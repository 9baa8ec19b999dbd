// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pcsim/tensor.hpp"

namespace pcsim {

/// Label value of pixels that belong to no class.
inline constexpr std::int32_t kBackground = -1;

/// H x W class ids (or kBackground), row-major.
struct LabelMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }
  bool operator==(const LabelMask &) const = default;
};

struct SegmentationSample {
  Tensor image; // C x H x W
  LabelMask label;
};

using Dataset = std::vector<SegmentationSample>;

/// Mask from an [H, W] tensor holding integral class ids.
LabelMask mask_from_tensor(const Tensor &t);
Tensor mask_to_tensor(const LabelMask &m);

/// Throws FormatError if any label is outside {background} U [0, class_count).
void validate_labels(const LabelMask &m, std::size_t class_count);

/// Directory of img_%04d.pcten / lbl_%04d.pcten pairs, numbered from 0.
Dataset load_dataset(const std::filesystem::path &dir);
void save_dataset(const Dataset &data, const std::filesystem::path &dir);

} // namespace pcsim
