// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/error.hpp"
#include "pcsim/photocore.hpp"

namespace pcsim {

namespace {

Tensor photocore_layer(const Layer &layer, std::size_t index, const Tensor &x,
                       const PhotocoreConfig &cfg, const NoiseSource &noise) {
  if (layer.kind == LayerKind::dense) {
    const Shape out_shape = layer_output_shape(layer, x.shape());
    const std::size_t in_f = layer.weight.dim(1);
    const Tensor xm = x.reshaped({in_f, x.size() / in_f});
    return photocore_gemm(layer.weight, xm, cfg, noise, {index, 0}).reshaped(out_shape);
  }
  const Kn2RowLowering low = lower_conv_kn2row(layer, x);
  std::vector<Tensor> partials;
  partials.reserve(low.weights.size());
  for (std::size_t k = 0; k < low.weights.size(); ++k) {
    partials.push_back(photocore_gemm(low.weights[k], low.input, cfg, noise, {index, k}));
  }
  return kn2row_recompose(low, partials);
}

} // namespace

std::vector<Tensor> simulate_trace(const ModelGraph &model, const Tensor &input,
                                   const PhotocoreConfig &cfg, const NoiseSource &noise,
                                   const SimOptions &opts) {
  cfg.validate();
  if (input.shape() != model.input_shape) {
    throw ShapeError("input " + shape_str(input.shape()) +
                     " does not match model input " + shape_str(model.input_shape));
  }
  if (opts.domains && opts.domains->size() != model.layers.size()) {
    throw ShapeError("domain override has the wrong number of layers");
  }
  std::vector<Tensor> outs;
  outs.reserve(model.layers.size());
  const Tensor *cur = &input;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer &layer = model.layers[i];
    const Domain d = opts.domains ? (*opts.domains)[i] : layer.domain;
    if (d == Domain::photocore && layer.is_weighted()) {
      outs.push_back(photocore_layer(layer, i, *cur, cfg, noise));
    } else {
      outs.push_back(digital::apply(layer, *cur));
    }
    cur = &outs.back();
  }
  return outs;
}

Tensor simulate_forward(const ModelGraph &model, const Tensor &input,
                        const PhotocoreConfig &cfg, const NoiseSource &noise,
                        const SimOptions &opts) {
  auto outs = simulate_trace(model, input, cfg, noise, opts);
  if (outs.empty()) {
    return input;
  }
  return std::move(outs.back());
}

std::vector<Domain> only_layer_on_photocore(const ModelGraph &model, std::size_t index) {
  if (index >= model.layers.size() || !model.layers[index].is_weighted()) {
    throw ShapeError("layer " + std::to_string(index) + " cannot run on the photocore");
  }
  std::vector<Domain> d(model.layers.size(), Domain::digital);
  d[index] = Domain::photocore;
  return d;
}

std::vector<Domain> all_digital(const ModelGraph &model) {
  return std::vector<Domain>(model.layers.size(), Domain::digital);
}

} // namespace pcsim
