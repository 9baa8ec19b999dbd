// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pcsim/base64.hpp"
#include "pcsim/error.hpp"

namespace pcsim {

using nlohmann::json;

const char *to_string(LayerKind k) {
  switch (k) {
  case LayerKind::dense:
    return "dense";
  case LayerKind::conv2d:
    return "conv2d";
  case LayerKind::relu:
    return "relu";
  case LayerKind::add_bias:
    return "add_bias";
  case LayerKind::argmax_channel:
    return "argmax_channel";
  }
  return "?";
}

const char *to_string(Domain d) {
  return d == Domain::photocore ? "photocore" : "digital";
}

LayerKind parse_layer_kind(const std::string &s) {
  for (auto k : {LayerKind::dense, LayerKind::conv2d, LayerKind::relu,
                 LayerKind::add_bias, LayerKind::argmax_channel}) {
    if (s == to_string(k)) {
      return k;
    }
  }
  throw FormatError("unknown layer kind '" + s + "'");
}

Domain parse_domain(const std::string &s) {
  if (s == "photocore") {
    return Domain::photocore;
  }
  if (s == "digital") {
    return Domain::digital;
  }
  throw FormatError("unknown execution domain '" + s + "'");
}

Layer Layer::dense(Tensor w, Domain d) {
  Layer l;
  l.kind = LayerKind::dense;
  l.weight = std::move(w);
  l.domain = d;
  return l;
}

Layer Layer::conv2d(Tensor w, std::size_t stride, std::size_t padding, Domain d) {
  Layer l;
  l.kind = LayerKind::conv2d;
  l.weight = std::move(w);
  l.stride = stride;
  l.padding = padding;
  l.domain = d;
  return l;
}

Layer Layer::relu() { return Layer{}; }

Layer Layer::add_bias(Tensor b) {
  Layer l;
  l.kind = LayerKind::add_bias;
  l.bias = std::move(b);
  return l;
}

Layer Layer::argmax_channel() {
  Layer l;
  l.kind = LayerKind::argmax_channel;
  return l;
}

Shape layer_output_shape(const Layer &layer, const Shape &in) {
  if (in.empty()) {
    throw ShapeError("layer input has rank 0");
  }
  if (!layer.is_weighted() && layer.domain == Domain::photocore) {
    throw ShapeError(std::string(to_string(layer.kind)) +
                     " layers can only execute in the digital domain");
  }
  switch (layer.kind) {
  case LayerKind::dense: {
    const auto &w = layer.weight.shape();
    if (w.size() != 2 || w[1] != in[0]) {
      throw ShapeError("dense weight " + shape_str(w) +
                       " does not accept input " + shape_str(in));
    }
    Shape out = in;
    out[0] = w[0];
    return out;
  }
  case LayerKind::conv2d: {
    const auto &w = layer.weight.shape();
    if (w.size() != 4 || in.size() != 3 || w[1] != in[0]) {
      throw ShapeError("conv2d weight " + shape_str(w) +
                       " does not accept input " + shape_str(in));
    }
    if (layer.stride == 0) {
      throw ShapeError("conv2d stride must be positive");
    }
    const std::size_t ph = in[1] + 2 * layer.padding;
    const std::size_t pw = in[2] + 2 * layer.padding;
    if (w[2] > ph || w[3] > pw) {
      throw ShapeError("conv2d kernel " + shape_str(w) +
                       " larger than padded input " + shape_str(in));
    }
    return {w[0], (ph - w[2]) / layer.stride + 1, (pw - w[3]) / layer.stride + 1};
  }
  case LayerKind::relu:
    return in;
  case LayerKind::add_bias:
    if (layer.bias.rank() != 1 || layer.bias.dim(0) != in[0]) {
      throw ShapeError("bias " + shape_str(layer.bias.shape()) +
                       " does not match input " + shape_str(in));
    }
    return in;
  case LayerKind::argmax_channel:
    if (in.size() < 2) {
      throw ShapeError("argmax_channel needs rank >= 2 input");
    }
    return Shape(in.begin() + 1, in.end());
  }
  throw ShapeError("unknown layer kind");
}

void ModelGraph::validate() const { output_shapes(); }

std::vector<Shape> ModelGraph::output_shapes() const {
  std::vector<Shape> shapes;
  shapes.reserve(layers.size());
  Shape cur = input_shape;
  shape_numel(cur);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try {
      cur = layer_output_shape(layers[i], cur);
    } catch (const ShapeError &e) {
      throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
    }
    shapes.push_back(cur);
  }
  return shapes;
}

std::vector<std::size_t> ModelGraph::eligible_layers() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].is_weighted()) {
      idx.push_back(i);
    }
  }
  return idx;
}

std::size_t ModelGraph::logits_layer() const {
  std::size_t i = layers.size();
  while (i > 0 && layers[i - 1].kind == LayerKind::argmax_channel) {
    --i;
  }
  if (i == 0) {
    throw ShapeError("model has no layer producing logits");
  }
  return i - 1;
}

namespace digital {

Tensor dense(const Tensor &weight, const Tensor &x) {
  const Shape out_shape = layer_output_shape(Layer::dense(weight), x.shape());
  const std::size_t out_f = weight.dim(0);
  const std::size_t in_f = weight.dim(1);
  const std::size_t cols = x.size() / in_f;
  Tensor y(out_shape);
  auto yd = y.data();
  const auto wd = weight.data();
  const auto xd = x.data();
  for (std::size_t o = 0; o < out_f; ++o) {
    float *yrow = yd.data() + o * cols;
    for (std::size_t i = 0; i < in_f; ++i) {
      const float w = wd[o * in_f + i];
      const float *xrow = xd.data() + i * cols;
      for (std::size_t m = 0; m < cols; ++m) {
        yrow[m] += w * xrow[m];
      }
    }
  }
  return y;
}

Tensor conv2d(const Layer &layer, const Tensor &x) {
  const Shape out_shape = layer_output_shape(layer, x.shape());
  const auto &w = layer.weight;
  const std::size_t cout = w.dim(0), cin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(x.dim(1));
  const std::ptrdiff_t wd = static_cast<std::ptrdiff_t>(x.dim(2));
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(layer.padding);
  const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(layer.stride);
  Tensor y(out_shape);
  const std::size_t oh = out_shape[1], ow = out_shape[2];
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t r = 0; r < kh; ++r) {
        for (std::size_t s = 0; s < kw; ++s) {
          const float k = w[((co * cin + ci) * kh + r) * kw + s];
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy =
                static_cast<std::ptrdiff_t>(oy) * stride + static_cast<std::ptrdiff_t>(r) - pad;
            if (iy < 0 || iy >= h) {
              continue;
            }
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox) * stride + static_cast<std::ptrdiff_t>(s) - pad;
              if (ix < 0 || ix >= wd) {
                continue;
              }
              y.at(co, oy, ox) += k * x.at(ci, static_cast<std::size_t>(iy),
                                           static_cast<std::size_t>(ix));
            }
          }
        }
      }
    }
  }
  return y;
}

Tensor relu(const Tensor &x) {
  Tensor y = x;
  for (float &v : y.data()) {
    v = std::max(v, 0.0f);
  }
  return y;
}

Tensor add_bias(const Tensor &bias, const Tensor &x) {
  layer_output_shape(Layer::add_bias(bias), x.shape());
  Tensor y = x;
  const std::size_t inner = x.size() / x.dim(0);
  auto yd = y.data();
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    for (std::size_t m = 0; m < inner; ++m) {
      yd[c * inner + m] += bias[c];
    }
  }
  return y;
}

Tensor argmax_channel(const Tensor &x) {
  const Shape out_shape = layer_output_shape(Layer::argmax_channel(), x.shape());
  const std::size_t inner = x.size() / x.dim(0);
  Tensor y(out_shape);
  const auto xd = x.data();
  for (std::size_t m = 0; m < inner; ++m) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < x.dim(0); ++c) {
      if (xd[c * inner + m] > xd[best * inner + m]) {
        best = c;
      }
    }
    y[m] = static_cast<float>(best);
  }
  return y;
}

Tensor apply(const Layer &layer, const Tensor &x) {
  switch (layer.kind) {
  case LayerKind::dense:
    return dense(layer.weight, x);
  case LayerKind::conv2d:
    return conv2d(layer, x);
  case LayerKind::relu:
    return relu(x);
  case LayerKind::add_bias:
    return add_bias(layer.bias, x);
  case LayerKind::argmax_channel:
    return argmax_channel(x);
  }
  throw ShapeError("unknown layer kind");
}

} // namespace digital

std::vector<Tensor> reference_trace(const ModelGraph &model, const Tensor &input) {
  if (input.shape() != model.input_shape) {
    throw ShapeError("input " + shape_str(input.shape()) +
                     " does not match model input " + shape_str(model.input_shape));
  }
  std::vector<Tensor> outs;
  outs.reserve(model.layers.size());
  const Tensor *cur = &input;
  for (const auto &layer : model.layers) {
    outs.push_back(digital::apply(layer, *cur));
    cur = &outs.back();
  }
  return outs;
}

Tensor reference_forward(const ModelGraph &model, const Tensor &input) {
  if (input.shape() != model.input_shape) {
    throw ShapeError("input " + shape_str(input.shape()) +
                     " does not match model input " + shape_str(model.input_shape));
  }
  Tensor cur = input;
  for (const auto &layer : model.layers) {
    cur = digital::apply(layer, cur);
  }
  return cur;
}

namespace {

json tensor_to_json(const Tensor &t) {
  const auto bytes = encode_tensor(t);
  // Strip the file framing: the JSON object already carries shape and format.
  const std::size_t hlen = bytes[8] | (bytes[9] << 8) | (bytes[10] << 16) |
                           (std::size_t(bytes[11]) << 24);
  const std::span<const unsigned char> payload(bytes.data() + 12 + hlen,
                                               bytes.size() - 12 - hlen);
  return json{{"shape", t.shape()},
              {"format", to_string(t.format())},
              {"data", base64_encode(payload)}};
}

Tensor tensor_from_json(const json &j, const std::filesystem::path &base_dir) {
  if (j.contains("file")) {
    return load_tensor(base_dir / j.at("file").get<std::string>());
  }
  const Shape shape = j.at("shape").get<Shape>();
  const ElemFormat fmt = parse_elem_format(j.at("format").get<std::string>());
  const auto payload = base64_decode(j.at("data").get<std::string>());
  std::string header = "{\"shape\":" + shape_str(shape) + ",\"format\":\"" +
                       to_string(fmt) + "\"}";
  std::vector<unsigned char> bytes = {'P', 'C', 'T', 'E', 'N', '0', '1', '\0'};
  for (int i = 0; i < 4; ++i) {
    bytes.push_back(static_cast<unsigned char>(header.size() >> (8 * i)));
  }
  bytes.insert(bytes.end(), header.begin(), header.end());
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  return decode_tensor(bytes);
}

} // namespace

std::string model_to_json(const ModelGraph &model) {
  model.validate();
  json layers = json::array();
  for (const auto &l : model.layers) {
    json jl = {{"kind", to_string(l.kind)}, {"domain", to_string(l.domain)}};
    if (l.is_weighted()) {
      jl["weight"] = tensor_to_json(l.weight);
    }
    if (l.kind == LayerKind::conv2d) {
      jl["stride"] = l.stride;
      jl["padding"] = l.padding;
    }
    if (l.kind == LayerKind::add_bias) {
      jl["bias"] = tensor_to_json(l.bias);
    }
    layers.push_back(std::move(jl));
  }
  json doc = {{"pcmodel_version", 1},
              {"input_shape", model.input_shape},
              {"class_count", model.class_count},
              {"layers", std::move(layers)}};
  return doc.dump(1);
}

ModelGraph model_from_json(const std::string &text,
                           const std::filesystem::path &base_dir) {
  ModelGraph m;
  try {
    const json doc = json::parse(text);
    if (doc.at("pcmodel_version").get<int>() != 1) {
      throw FormatError("unsupported pcmodel_version");
    }
    m.input_shape = doc.at("input_shape").get<Shape>();
    m.class_count = doc.at("class_count").get<std::size_t>();
    for (const auto &jl : doc.at("layers")) {
      Layer l;
      l.kind = parse_layer_kind(jl.at("kind").get<std::string>());
      l.domain = parse_domain(jl.value("domain", std::string("digital")));
      if (l.is_weighted()) {
        l.weight = tensor_from_json(jl.at("weight"), base_dir);
      }
      if (l.kind == LayerKind::conv2d) {
        l.stride = jl.value("stride", std::size_t{1});
        l.padding = jl.value("padding", std::size_t{0});
      }
      if (l.kind == LayerKind::add_bias) {
        l.bias = tensor_from_json(jl.at("bias"), base_dir);
      }
      m.layers.push_back(std::move(l));
    }
  } catch (const json::exception &e) {
    throw FormatError(std::string("malformed model document: ") + e.what());
  }
  m.validate();
  return m;
}

ModelGraph load_model(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open model file " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str(), path.parent_path());
}

void save_model(const ModelGraph &model, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw FormatError("cannot write model file " + path.string());
  }
  out << model_to_json(model) << '\n';
}

} // namespace pcsim
