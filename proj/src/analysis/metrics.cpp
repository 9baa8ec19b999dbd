// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/metrics.hpp"

#include <string>

#include "pcsim/error.hpp"

namespace pcsim {

namespace {

void check_pair(const LabelMask &pred, const LabelMask &label) {
  if (pred.height != label.height || pred.width != label.width ||
      pred.labels.size() != label.labels.size()) {
    throw ShapeError("prediction " + std::to_string(pred.height) + "x" +
                     std::to_string(pred.width) + " vs label " + std::to_string(label.height) +
                     "x" + std::to_string(label.width));
  }
}

} // namespace

double pixel_accuracy(const LabelMask &pred, const LabelMask &label) {
  check_pair(pred, label);
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < label.labels.size(); ++i) {
    if (label.labels[i] == kBackground) {
      continue;
    }
    ++total;
    correct += pred.labels[i] == label.labels[i];
  }
  if (total == 0) {
    throw DomainError("pixel accuracy undefined: label mask has no foreground pixels");
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

MetricReport mean_iou(const LabelMask &pred, const LabelMask &label, std::size_t class_count) {
  MetricAccumulator acc(class_count);
  acc.add(pred, label);
  return acc.report();
}

MetricAccumulator::MetricAccumulator(std::size_t class_count)
    : intersection_(class_count), pred_count_(class_count), label_count_(class_count) {
  if (class_count == 0) {
    throw DomainError("metrics need at least one class");
  }
}

void MetricAccumulator::add(const LabelMask &pred, const LabelMask &label) {
  check_pair(pred, label);
  const auto c = static_cast<std::int32_t>(class_count());
  for (std::size_t i = 0; i < label.labels.size(); ++i) {
    const std::int32_t l = label.labels[i];
    const std::int32_t p = pred.labels[i];
    if (l == kBackground) {
      continue;
    }
    if (l < 0 || l >= c || p < kBackground || p >= c) {
      throw DomainError("class id out of range at pixel " + std::to_string(i));
    }
    ++foreground_;
    ++label_count_[static_cast<std::size_t>(l)];
    if (p != kBackground) {
      ++pred_count_[static_cast<std::size_t>(p)];
    }
    if (p == l) {
      ++correct_;
      ++intersection_[static_cast<std::size_t>(l)];
    }
  }
}

void MetricAccumulator::merge(const MetricAccumulator &other) {
  if (other.class_count() != class_count()) {
    throw ShapeError("cannot merge metric accumulators with different class counts");
  }
  correct_ += other.correct_;
  foreground_ += other.foreground_;
  for (std::size_t k = 0; k < class_count(); ++k) {
    intersection_[k] += other.intersection_[k];
    pred_count_[k] += other.pred_count_[k];
    label_count_[k] += other.label_count_[k];
  }
}

MetricReport MetricAccumulator::report() const {
  if (foreground_ == 0) {
    throw DomainError("metrics undefined: no foreground pixels");
  }
  MetricReport r;
  r.pixel_accuracy = static_cast<double>(correct_) / static_cast<double>(foreground_);
  r.per_class_iou.resize(class_count());
  double sum = 0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < class_count(); ++k) {
    const std::uint64_t uni = pred_count_[k] + label_count_[k] - intersection_[k];
    if (uni == 0) {
      continue;
    }
    const double iou = static_cast<double>(intersection_[k]) / static_cast<double>(uni);
    r.per_class_iou[k] = iou;
    sum += iou;
    ++present;
  }
  r.miou = sum / static_cast<double>(present);
  return r;
}

MetricReport relative_to(MetricReport r, const MetricReport &fp32) {
  r.pixel_accuracy_pct_fp32 = 100.0 * r.pixel_accuracy / fp32.pixel_accuracy;
  r.miou_pct_fp32 = fp32.miou > 0 ? std::optional(100.0 * r.miou / fp32.miou) : std::nullopt;
  return r;
}

} // namespace pcsim
