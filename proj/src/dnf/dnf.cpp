// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/dnf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pcsim/error.hpp"
#include "../util/parallel.hpp"
#include "pcsim/noise.hpp"
#include "../util/portable_rng.hpp"

namespace pcsim {

using json = nlohmann::ordered_json;

void NoiseProfile::validate() const {
  std::set<std::size_t> seen;
  for (const LayerNoise &l : layers) {
    if (!std::isfinite(l.mean) || !std::isfinite(l.std) || l.std < 0.0) {
      throw FormatError("noise profile layer " + std::to_string(l.layer_index) +
                        " has invalid moments");
    }
    if (!seen.insert(l.layer_index).second) {
      throw FormatError("noise profile lists layer " + std::to_string(l.layer_index) + " twice");
    }
  }
}

std::vector<std::string> NoiseProfile::warnings() const {
  std::vector<std::string> out;
  for (const LayerNoise &l : layers) {
    if (std::fabs(l.mean) > l.std) {
      std::ostringstream os;
      os << "layer " << l.layer_index << ": |mean| " << std::fabs(l.mean) << " exceeds std "
         << l.std << "; outputs are likely saturating";
      out.push_back(os.str());
    }
  }
  return out;
}

std::string profile_to_json(const NoiseProfile &p) {
  p.validate();
  json j;
  j["noise_profile_version"] = kNoiseProfileVersion;
  j["seed"] = p.seed;
  j["layers"] = json::array();
  for (const LayerNoise &l : p.layers) {
    j["layers"].push_back(
        {{"index", l.layer_index}, {"mean", l.mean}, {"std", l.std}, {"sample_count", l.sample_count}});
  }
  return j.dump(2) + "\n";
}

namespace {

const json &field(const json &obj, const char *key, const char *where) {
  if (!obj.contains(key)) {
    throw FormatError(std::string(where) + " is missing '" + key + "'");
  }
  return obj.at(key);
}

void only_keys(const json &obj, std::initializer_list<const char *> keys, const char *where) {
  for (const auto &[k, _] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char *x) { return k == x; })) {
      throw FormatError(std::string(where) + " has unknown key '" + k + "'");
    }
  }
}

} // namespace

NoiseProfile profile_from_json(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw FormatError(std::string("noise profile is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw FormatError("noise profile must be a JSON object");
  }
  only_keys(j, {"noise_profile_version", "seed", "layers"}, "noise profile");
  const json &version = field(j, "noise_profile_version", "noise profile");
  if (!version.is_number_integer() || version.get<int>() != kNoiseProfileVersion) {
    throw FormatError("unsupported noise_profile_version " + version.dump());
  }
  const json &seed = field(j, "seed", "noise profile");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    throw FormatError("noise profile seed must be a non-negative integer");
  }
  const json &layers = field(j, "layers", "noise profile");
  if (!layers.is_array()) {
    throw FormatError("noise profile 'layers' must be an array");
  }
  NoiseProfile p;
  p.seed = seed.get<std::uint64_t>();
  for (const json &l : layers) {
    if (!l.is_object()) {
      throw FormatError("noise profile layer entries must be objects");
    }
    only_keys(l, {"index", "mean", "std", "sample_count"}, "noise profile layer");
    const json &idx = field(l, "index", "noise profile layer");
    const json &mean = field(l, "mean", "noise profile layer");
    const json &sd = field(l, "std", "noise profile layer");
    const json &count = field(l, "sample_count", "noise profile layer");
    if (!idx.is_number_unsigned() || !mean.is_number() || !sd.is_number() ||
        !count.is_number_unsigned()) {
      throw FormatError("noise profile layer fields have wrong types");
    }
    p.layers.push_back(
        {idx.get<std::size_t>(), mean.get<double>(), sd.get<double>(), count.get<std::size_t>()});
  }
  p.validate();
  return p;
}

void save_profile(const NoiseProfile &p, const std::filesystem::path &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw FormatError("cannot write " + path.string());
  }
  os << profile_to_json(p);
}

NoiseProfile load_profile(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw FormatError("cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << is.rdbuf();
  return profile_from_json(ss.str());
}

NoiseProfile estimate_noise_profile(const ModelGraph &model, const Dataset &calibration,
                                    const PhotocoreConfig &cfg, std::size_t min_samples) {
  model.validate();
  cfg.validate();
  if (calibration.empty()) {
    throw DomainError("noise profile estimation needs calibration samples");
  }
  const NoiseSource noise(cfg.rng_seed);
  NoiseProfile prof;
  prof.seed = cfg.rng_seed;
  for (std::size_t layer : model.eligible_layers()) {
    const SimOptions opt{only_layer_on_photocore(model, layer)};
    struct Moments {
      double sum = 0, sum2 = 0;
      std::size_t count = 0;
    };
    std::vector<Moments> per(calibration.size());
    detail::parallel_for(calibration.size(), [&](std::size_t s) {
      const Tensor sim =
          simulate_trace(model, calibration[s].image, cfg, noise.for_stream(s), opt)[layer];
      const Tensor ref = reference_trace(model, calibration[s].image)[layer];
      Moments m;
      for (std::size_t e = 0; e < sim.size(); ++e) {
        const double d = static_cast<double>(sim[e]) - static_cast<double>(ref[e]);
        m.sum += d;
        m.sum2 += d * d;
      }
      m.count = sim.size();
      per[s] = m;
    });
    Moments total;
    for (const Moments &m : per) {
      total.sum += m.sum;
      total.sum2 += m.sum2;
      total.count += m.count;
    }
    if (total.count < min_samples) {
      throw DomainError("layer " + std::to_string(layer) + " produced " +
                        std::to_string(total.count) + " output elements; at least " +
                        std::to_string(min_samples) + " are required");
    }
    const double n = static_cast<double>(total.count);
    const double mean = total.sum / n;
    const double var = std::max(0.0, total.sum2 / n - mean * mean);
    prof.layers.push_back({layer, mean, std::sqrt(var), total.count});
  }
  return prof;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (epochs == 0 || batch_size == 0) {
    throw ConfigError("epochs and batch size must be at least 1");
  }
  if (!(clip_norm >= 0.0) || !std::isfinite(clip_norm)) {
    throw ConfigError("gradient clip norm must be finite and >= 0");
  }
}

namespace train {

Params params_of(const ModelGraph &model) {
  Params p;
  for (const Layer &l : model.layers) {
    p.weight.emplace_back(l.weight.data().begin(), l.weight.data().end());
    p.bias.emplace_back(l.bias.data().begin(), l.bias.data().end());
  }
  return p;
}

ModelGraph with_params(ModelGraph model, const Params &p) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    Layer &l = model.layers[i];
    for (std::size_t k = 0; k < p.weight[i].size(); ++k) {
      l.weight[k] = static_cast<float>(p.weight[i][k]);
    }
    for (std::size_t k = 0; k < p.bias[i].size(); ++k) {
      l.bias[k] = static_cast<float>(p.bias[i][k]);
    }
  }
  return model;
}

Params zeros_like(const Params &p) {
  Params z = p;
  for (auto &v : z.weight) {
    std::fill(v.begin(), v.end(), 0.0);
  }
  for (auto &v : z.bias) {
    std::fill(v.begin(), v.end(), 0.0);
  }
  return z;
}

namespace {

using Vec = std::vector<double>;

struct ConvGeom {
  std::size_t co, ci, kh, kw, h, w, oh, ow, stride, pad;
};

ConvGeom conv_geom(const Layer &l, const Shape &in, const Shape &out) {
  return {l.weight.dim(0), l.weight.dim(1), l.weight.dim(2), l.weight.dim(3), in[1], in[2],
          out[1],          out[2],          l.stride,        l.padding};
}

// Calls f(o, c, ky, kx, in_index, out_index) for every tap landing inside the
// input.
template <class F> void for_each_tap(const ConvGeom &g, F &&f) {
  for (std::size_t o = 0; o < g.co; ++o) {
    for (std::size_t c = 0; c < g.ci; ++c) {
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const std::size_t wi = ((o * g.ci + c) * g.kh + ky) * g.kw + kx;
          for (std::size_t y = 0; y < g.oh; ++y) {
            const std::ptrdiff_t iy = std::ptrdiff_t(y * g.stride + ky) - std::ptrdiff_t(g.pad);
            if (iy < 0 || iy >= std::ptrdiff_t(g.h)) {
              continue;
            }
            for (std::size_t x = 0; x < g.ow; ++x) {
              const std::ptrdiff_t ix =
                  std::ptrdiff_t(x * g.stride + kx) - std::ptrdiff_t(g.pad);
              if (ix < 0 || ix >= std::ptrdiff_t(g.w)) {
                continue;
              }
              f(wi, (c * g.h + std::size_t(iy)) * g.w + std::size_t(ix),
                (o * g.oh + y) * g.ow + x);
            }
          }
        }
      }
    }
  }
}

Vec forward(const Layer &l, const Vec &w, const Vec &b, const Vec &x, const Shape &in,
            const Shape &out) {
  Vec y(shape_numel(out), 0.0);
  switch (l.kind) {
  case LayerKind::dense: {
    const std::size_t o_n = l.weight.dim(0), i_n = l.weight.dim(1), r_n = x.size() / i_n;
    for (std::size_t o = 0; o < o_n; ++o) {
      for (std::size_t i = 0; i < i_n; ++i) {
        const double wv = w[o * i_n + i];
        for (std::size_t r = 0; r < r_n; ++r) {
          y[o * r_n + r] += wv * x[i * r_n + r];
        }
      }
    }
    break;
  }
  case LayerKind::conv2d:
    for_each_tap(conv_geom(l, in, out), [&](std::size_t wi, std::size_t xi, std::size_t yi) {
      y[yi] += w[wi] * x[xi];
    });
    break;
  case LayerKind::relu:
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = x[i] > 0.0 ? x[i] : 0.0;
    }
    break;
  case LayerKind::add_bias: {
    const std::size_t per = x.size() / b.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = x[i] + b[i / per];
    }
    break;
  }
  case LayerKind::argmax_channel:
    throw ShapeError("argmax_channel is not differentiable");
  }
  return y;
}

// Returns d(loss)/d(input); accumulates parameter gradients scaled by `scale`.
Vec backward(const Layer &l, const Vec &w, const Vec &b, const Vec &x, const Vec &gy,
             const Shape &in, const Shape &out, Vec *gw, Vec *gb, double scale) {
  Vec gx(x.size(), 0.0);
  switch (l.kind) {
  case LayerKind::dense: {
    const std::size_t o_n = l.weight.dim(0), i_n = l.weight.dim(1), r_n = x.size() / i_n;
    for (std::size_t o = 0; o < o_n; ++o) {
      for (std::size_t i = 0; i < i_n; ++i) {
        double acc = 0.0;
        const double wv = w[o * i_n + i];
        for (std::size_t r = 0; r < r_n; ++r) {
          acc += gy[o * r_n + r] * x[i * r_n + r];
          gx[i * r_n + r] += wv * gy[o * r_n + r];
        }
        if (gw) {
          (*gw)[o * i_n + i] += scale * acc;
        }
      }
    }
    break;
  }
  case LayerKind::conv2d:
    for_each_tap(conv_geom(l, in, out), [&](std::size_t wi, std::size_t xi, std::size_t yi) {
      gx[xi] += w[wi] * gy[yi];
      if (gw) {
        (*gw)[wi] += scale * gy[yi] * x[xi];
      }
    });
    break;
  case LayerKind::relu:
    for (std::size_t i = 0; i < x.size(); ++i) {
      gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
    }
    break;
  case LayerKind::add_bias: {
    const std::size_t per = x.size() / b.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
      gx[i] = gy[i];
      if (gb) {
        (*gb)[i / per] += scale * gy[i];
      }
    }
    break;
  }
  case LayerKind::argmax_channel:
    throw ShapeError("argmax_channel is not differentiable");
  }
  return gx;
}

} // namespace

double loss_and_grad(const ModelGraph &model, const Params &p, const SegmentationSample &s,
                     const Injection &inject, Params *grad, double weight) {
  const std::size_t last = model.logits_layer();
  const auto shapes = model.output_shapes();
  if (s.image.shape() != model.input_shape) {
    throw ShapeError("sample shape " + shape_str(s.image.shape()) + " does not match model input " +
                     shape_str(model.input_shape));
  }
  std::vector<Vec> acts{Vec(s.image.data().begin(), s.image.data().end())};
  for (std::size_t i = 0; i <= last; ++i) {
    const Shape &in = i == 0 ? model.input_shape : shapes[i - 1];
    Vec y = forward(model.layers[i], p.weight[i], p.bias[i], acts.back(), in, shapes[i]);
    if (i < inject.size() && !inject[i].empty()) {
      for (std::size_t e = 0; e < y.size(); ++e) {
        y[e] += inject[i][e];
      }
    }
    acts.push_back(std::move(y));
  }

  const Vec &logits = acts.back();
  const std::size_t classes = shapes[last][0];
  const std::size_t pixels = logits.size() / classes;
  if (pixels != s.label.size()) {
    throw ShapeError("label mask has " + std::to_string(s.label.size()) + " pixels, logits have " +
                     std::to_string(pixels));
  }
  const auto fg = static_cast<std::size_t>(std::count_if(
      s.label.labels.begin(), s.label.labels.end(), [](std::int32_t v) { return v != kBackground; }));
  if (fg == 0) {
    return 0.0;
  }
  Vec g(logits.size(), 0.0);
  double loss = 0.0;
  for (std::size_t px = 0; px < pixels; ++px) {
    const std::int32_t label = s.label.labels[px];
    if (label == kBackground) {
      continue;
    }
    double mx = -INFINITY;
    for (std::size_t k = 0; k < classes; ++k) {
      mx = std::max(mx, logits[k * pixels + px]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      z += std::exp(logits[k * pixels + px] - mx);
    }
    const double log_z = mx + std::log(z);
    loss += log_z - logits[static_cast<std::size_t>(label) * pixels + px];
    for (std::size_t k = 0; k < classes; ++k) {
      const double prob = std::exp(logits[k * pixels + px] - log_z);
      g[k * pixels + px] = (prob - (k == static_cast<std::size_t>(label) ? 1.0 : 0.0)) /
                           static_cast<double>(fg);
    }
  }
  loss /= static_cast<double>(fg);

  if (grad) {
    for (std::size_t i = last + 1; i-- > 0;) {
      const Shape &in = i == 0 ? model.input_shape : shapes[i - 1];
      const Layer &l = model.layers[i];
      g = backward(l, p.weight[i], p.bias[i], acts[i], g, in, shapes[i],
                   l.kind == LayerKind::dense || l.kind == LayerKind::conv2d ? &grad->weight[i]
                                                                             : nullptr,
                   l.kind == LayerKind::add_bias ? &grad->bias[i] : nullptr, weight);
    }
  }
  return loss;
}

} // namespace train

namespace {

TrainResult run_training(const ModelGraph &model, const Dataset &data, const NoiseProfile *profile,
                         const TrainConfig &tc) {
  model.validate();
  tc.validate();
  if (data.empty()) {
    throw DomainError("training needs at least one sample");
  }
  const auto shapes = model.output_shapes();
  for (std::size_t i : tc.frozen_layers) {
    if (i >= model.layers.size()) {
      throw ConfigError("frozen layer " + std::to_string(i) + " does not exist");
    }
  }
  std::vector<const LayerNoise *> noise_at(model.layers.size(), nullptr);
  if (profile) {
    profile->validate();
    const auto eligible = model.eligible_layers();
    for (const LayerNoise &l : profile->layers) {
      if (std::find(eligible.begin(), eligible.end(), l.layer_index) == eligible.end()) {
        throw ShapeError("noise profile names layer " + std::to_string(l.layer_index) +
                         ", which is not an eligible layer of the model");
      }
      if (l.std > 0.0 || l.mean != 0.0) {
        noise_at[l.layer_index] = &l;
      }
    }
  }

  detail::PortableRng order_rng(derive_seed(tc.seed, "dnf-shuffle"));
  detail::PortableRng noise_rng(derive_seed(tc.seed, "dnf-noise"));
  train::Params p = train::params_of(model);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  TrainResult result;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      train::Params grad = train::zeros_like(p);
      const double w = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        train::Injection inject(model.layers.size());
        for (std::size_t i = 0; i < model.layers.size(); ++i) {
          if (noise_at[i]) {
            inject[i].resize(shape_numel(shapes[i]));
            for (double &v : inject[i]) {
              v = noise_at[i]->mean + noise_at[i]->std * noise_rng.normal();
            }
          }
        }
        epoch_loss += train::loss_and_grad(model, p, data[order[k]], inject, &grad, w);
      }
      if (!std::isfinite(epoch_loss)) {
        throw DomainError("training diverged in epoch " + std::to_string(epoch + 1) +
                          " (non-finite loss); lower the learning rate");
      }
      for (std::size_t i : tc.frozen_layers) {
        std::fill(grad.weight[i].begin(), grad.weight[i].end(), 0.0);
        std::fill(grad.bias[i].begin(), grad.bias[i].end(), 0.0);
      }
      double step = tc.learning_rate;
      if (tc.clip_norm > 0.0) {
        double sq = 0.0;
        for (std::size_t i = 0; i < p.weight.size(); ++i) {
          for (double g : grad.weight[i]) {
            sq += g * g;
          }
          for (double g : grad.bias[i]) {
            sq += g * g;
          }
        }
        const double norm = std::sqrt(sq);
        if (norm > tc.clip_norm) {
          step *= tc.clip_norm / norm;
        }
      }
      for (std::size_t i = 0; i < p.weight.size(); ++i) {
        for (std::size_t k = 0; k < p.weight[i].size(); ++k) {
          p.weight[i][k] -= step * grad.weight[i][k];
        }
        for (std::size_t k = 0; k < p.bias[i].size(); ++k) {
          p.bias[i][k] -= step * grad.bias[i][k];
        }
      }
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  for (const auto &v : p.weight) {
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw DomainError("training diverged (non-finite weights)");
      }
    }
  }
  result.model = train::with_params(model, p);
  return result;
}

} // namespace

TrainResult dnf_train(const ModelGraph &model, const Dataset &train, const NoiseProfile &profile,
                      const TrainConfig &tc) {
  return run_training(model, train, &profile, tc);
}

TrainResult fine_tune(const ModelGraph &model, const Dataset &train, const TrainConfig &tc) {
  return run_training(model, train, nullptr, tc);
}

} // namespace pcsim
