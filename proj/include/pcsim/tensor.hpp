// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pcsim {

enum class ElemFormat { f32, bf16 };

const char *to_string(ElemFormat f);
ElemFormat parse_elem_format(const std::string &s);

using Shape = std::vector<std::size_t>;

/// Element count of a shape; throws FormatError on overflow or zero extents.
std::size_t shape_numel(const Shape &shape);
std::string shape_str(const Shape &shape);

/// Dense row-major tensor. Storage is always float; for bf16 tensors every
/// stored value is bf16-exact.
class Tensor {
public:
  Tensor() = default;
  Tensor(Shape shape, ElemFormat fmt = ElemFormat::f32);
  Tensor(Shape shape, std::vector<float> data, ElemFormat fmt = ElemFormat::f32);

  const Shape &shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  ElemFormat format() const { return format_; }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  const std::vector<float> &values() const { return data_; }

  float operator[](std::size_t i) const { return data_[i]; }
  float &operator[](std::size_t i) { return data_[i]; }

  // 3-D accessor for C x H x W activations.
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  float &at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  /// Same data under a new shape with the same element count.
  Tensor reshaped(Shape shape) const;

  /// Checks every invariant; throws FormatError.
  void validate() const;

  bool operator==(const Tensor &other) const = default;

private:
  Shape shape_;
  std::vector<float> data_;
  ElemFormat format_ = ElemFormat::f32;
};

/// Copy with every element rounded to bfloat16.
Tensor to_bf16(const Tensor &t);

// Binary tensor file: "PCTEN01\0", u32 LE header length, JSON header
// {"shape":[...],"format":"f32"|"bf16"}, then the LE payload.
std::vector<unsigned char> encode_tensor(const Tensor &t);
Tensor decode_tensor(std::span<const unsigned char> bytes);

Tensor load_tensor(const std::filesystem::path &path);
void save_tensor(const Tensor &t, const std::filesystem::path &path);

} // namespace pcsim
