// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/dataset.hpp"

#include <cmath>
#include <cstdio>

#include "pcsim/error.hpp"

namespace pcsim {

namespace {

std::string numbered(const char *prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu.pcten", prefix, i);
  return buf;
}

} // namespace

LabelMask mask_from_tensor(const Tensor &t) {
  if (t.rank() != 2) {
    throw FormatError("label tensor must be [H, W], got " + shape_str(t.shape()));
  }
  LabelMask m{t.dim(0), t.dim(1), {}};
  m.labels.reserve(t.size());
  for (float v : t.data()) {
    if (v != std::floor(v)) {
      throw FormatError("label tensor holds a non-integral value");
    }
    m.labels.push_back(static_cast<std::int32_t>(v));
  }
  return m;
}

Tensor mask_to_tensor(const LabelMask &m) {
  std::vector<float> d(m.labels.begin(), m.labels.end());
  return Tensor({m.height, m.width}, std::move(d));
}

void validate_labels(const LabelMask &m, std::size_t class_count) {
  for (auto v : m.labels) {
    if (v != kBackground && (v < 0 || static_cast<std::size_t>(v) >= class_count)) {
      throw FormatError("label " + std::to_string(v) + " outside [0, " +
                        std::to_string(class_count) + ") and not background");
    }
  }
}

Dataset load_dataset(const std::filesystem::path &dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw FormatError("dataset directory " + dir.string() + " does not exist");
  }
  Dataset data;
  for (std::size_t i = 0;; ++i) {
    const auto img = dir / numbered("img", i);
    const auto lbl = dir / numbered("lbl", i);
    if (!std::filesystem::exists(img)) {
      if (std::filesystem::exists(lbl)) {
        throw FormatError("label " + lbl.string() + " has no image");
      }
      break;
    }
    SegmentationSample s{load_tensor(img), mask_from_tensor(load_tensor(lbl))};
    if (s.image.rank() != 3 || s.image.dim(1) != s.label.height ||
        s.image.dim(2) != s.label.width) {
      throw FormatError("sample " + std::to_string(i) +
                        ": image and label extents disagree");
    }
    data.push_back(std::move(s));
  }
  if (data.empty()) {
    throw FormatError("dataset directory " + dir.string() + " holds no samples");
  }
  return data;
}

void save_dataset(const Dataset &data, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < data.size(); ++i) {
    save_tensor(data[i].image, dir / numbered("img", i));
    save_tensor(mask_to_tensor(data[i].label), dir / numbered("lbl", i));
  }
}

} // namespace pcsim
