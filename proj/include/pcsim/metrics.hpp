// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pcsim/dataset.hpp"

namespace pcsim {

/// Segmentation quality of one configuration. Background label pixels are
/// ignored everywhere.
struct MetricReport {
  double pixel_accuracy = 0.0;
  /// IoU per class id; empty when the class is absent from both masks.
  std::vector<std::optional<double>> per_class_iou;
  double miou = 0.0;
  /// Ratios against a baseline report, when one was attached.
  std::optional<double> pixel_accuracy_pct_fp32;
  std::optional<double> miou_pct_fp32;
};

/// Fraction of non-background label pixels predicted correctly.
/// Throws ShapeError on size mismatch, DomainError if there is no foreground.
double pixel_accuracy(const LabelMask &pred, const LabelMask &label);

/// Per-class IoU and their mean over classes present in either mask.
MetricReport mean_iou(const LabelMask &pred, const LabelMask &label, std::size_t class_count);

/// Pixel-level confusion counts summed over many mask pairs. Merging is exact
/// integer addition, so the result does not depend on accumulation order.
class MetricAccumulator {
public:
  explicit MetricAccumulator(std::size_t class_count);

  void add(const LabelMask &pred, const LabelMask &label);
  void merge(const MetricAccumulator &other);

  /// Throws DomainError when no foreground pixel was seen.
  MetricReport report() const;

  std::size_t class_count() const { return intersection_.size(); }

private:
  std::uint64_t correct_ = 0;
  std::uint64_t foreground_ = 0;
  std::vector<std::uint64_t> intersection_;
  std::vector<std::uint64_t> pred_count_;
  std::vector<std::uint64_t> label_count_;
};

/// Copy of `r` with the percent-of-baseline fields filled in.
MetricReport relative_to(MetricReport r, const MetricReport &fp32);

} // namespace pcsim
