// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/error.hpp"
#include "pcsim/photocore.hpp"

namespace pcsim {

Kn2RowLowering lower_conv_kn2row(const Layer &layer, const Tensor &input) {
  if (layer.kind != LayerKind::conv2d) {
    throw ShapeError("kn2row lowering needs a conv2d layer");
  }
  const Shape out = layer_output_shape(layer, input.shape());
  const auto &w = layer.weight;
  Kn2RowLowering l;
  l.c_out = w.dim(0);
  l.kh = w.dim(2);
  l.kw = w.dim(3);
  l.stride = layer.stride;
  l.padding = layer.padding;
  l.in_h = input.dim(1);
  l.in_w = input.dim(2);
  l.out_h = out[1];
  l.out_w = out[2];
  const std::size_t cin = w.dim(1);
  l.input = input.reshaped({cin, l.in_h * l.in_w});
  l.weights.reserve(l.kh * l.kw);
  for (std::size_t r = 0; r < l.kh; ++r) {
    for (std::size_t s = 0; s < l.kw; ++s) {
      Tensor m({l.c_out, cin});
      for (std::size_t co = 0; co < l.c_out; ++co) {
        for (std::size_t ci = 0; ci < cin; ++ci) {
          m[co * cin + ci] = w[((co * cin + ci) * l.kh + r) * l.kw + s];
        }
      }
      l.weights.push_back(std::move(m));
    }
  }
  return l;
}

Tensor kn2row_recompose(const Kn2RowLowering &l, std::span<const Tensor> partials) {
  if (partials.size() != l.kh * l.kw) {
    throw ShapeError("kn2row recomposition needs one partial per kernel offset");
  }
  for (const auto &p : partials) {
    if (p.shape() != Shape{l.c_out, l.in_h * l.in_w}) {
      throw ShapeError("kn2row partial has shape " + shape_str(p.shape()));
    }
  }
  Tensor y({l.c_out, l.out_h, l.out_w});
  const auto pad = static_cast<std::ptrdiff_t>(l.padding);
  const auto stride = static_cast<std::ptrdiff_t>(l.stride);
  for (std::size_t r = 0; r < l.kh; ++r) {
    for (std::size_t s = 0; s < l.kw; ++s) {
      const Tensor &p = partials[r * l.kw + s];
      for (std::size_t co = 0; co < l.c_out; ++co) {
        for (std::size_t oy = 0; oy < l.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy) * stride +
                          static_cast<std::ptrdiff_t>(r) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(l.in_h)) {
            continue;
          }
          for (std::size_t ox = 0; ox < l.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox) * stride +
                            static_cast<std::ptrdiff_t>(s) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(l.in_w)) {
              continue;
            }
            y.at(co, oy, ox) +=
                p[co * l.in_h * l.in_w + static_cast<std::size_t>(iy) * l.in_w +
                  static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
  return y;
}

} // namespace pcsim
