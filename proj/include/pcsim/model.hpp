// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "pcsim/tensor.hpp"

namespace pcsim {

enum class LayerKind { dense, conv2d, relu, add_bias, argmax_channel };
enum class Domain { photocore, digital };

const char *to_string(LayerKind k);
const char *to_string(Domain d);
LayerKind parse_layer_kind(const std::string &s);
Domain parse_domain(const std::string &s);

/// One node of a sequential model.
///
/// dense:    weight [out, in]; acts on dim 0 of its input, so a C x H x W
///           activation is treated as C features at each of H*W positions.
/// conv2d:   weight [c_out, c_in, kh, kw], symmetric zero padding, stride.
/// add_bias: bias [C] added along dim 0.
/// argmax_channel: [C, ...] -> [...] holding the winning channel index.
struct Layer {
  LayerKind kind = LayerKind::relu;
  Domain domain = Domain::digital;
  Tensor weight;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t padding = 0;

  bool is_weighted() const {
    return kind == LayerKind::dense || kind == LayerKind::conv2d;
  }

  static Layer dense(Tensor w, Domain d = Domain::photocore);
  static Layer conv2d(Tensor w, std::size_t stride, std::size_t padding,
                      Domain d = Domain::photocore);
  static Layer relu();
  static Layer add_bias(Tensor b);
  static Layer argmax_channel();
};

/// Output shape of a layer applied to `in`; throws ShapeError.
Shape layer_output_shape(const Layer &layer, const Shape &in);

struct ModelGraph {
  Shape input_shape;
  std::size_t class_count = 0;
  std::vector<Layer> layers;

  /// Throws ShapeError when layers do not chain or a weight is malformed.
  void validate() const;
  /// Output shape of each layer, in order.
  std::vector<Shape> output_shapes() const;
  /// Indices of dense/conv2d layers.
  std::vector<std::size_t> eligible_layers() const;
  /// Index of the last weighted layer's output feeding the loss: the last
  /// layer that is not argmax_channel.
  std::size_t logits_layer() const;
};

// Float32 kernels shared by the reference path and the digital layers of
// the simulated path.
namespace digital {
Tensor dense(const Tensor &weight, const Tensor &x);
Tensor conv2d(const Layer &layer, const Tensor &x);
Tensor relu(const Tensor &x);
Tensor add_bias(const Tensor &bias, const Tensor &x);
Tensor argmax_channel(const Tensor &x);
Tensor apply(const Layer &layer, const Tensor &x);
} // namespace digital

/// Full float32 forward pass.
Tensor reference_forward(const ModelGraph &model, const Tensor &input);
/// Output of every layer of the float32 forward pass.
std::vector<Tensor> reference_trace(const ModelGraph &model, const Tensor &input);

/// Model JSON document ("pcmodel_version": 1). Weights are written inline as
/// base64 little-endian payloads; on load a weight may instead reference a
/// tensor file relative to `base_dir`.
std::string model_to_json(const ModelGraph &model);
ModelGraph model_from_json(const std::string &text,
                           const std::filesystem::path &base_dir = {});
ModelGraph load_model(const std::filesystem::path &path);
void save_model(const ModelGraph &model, const std::filesystem::path &path);

} // namespace pcsim
