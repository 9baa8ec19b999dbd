// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>

#include "json.hpp"

#include "pcsim/error.hpp"
#include "pcsim/noise.hpp"
#include "../util/portable_rng.hpp"

namespace pcsim::fixtures {

namespace {

using Rng = detail::PortableRng;

Tensor normal_tensor(Shape shape, double stddev, Rng &rng) {
  Tensor t(std::move(shape));
  for (float &v : t.data()) {
    v = static_cast<float>(stddev * rng.normal());
  }
  return t;
}

std::vector<Tensor> images(std::size_t count, std::size_t channels, std::size_t h,
                           std::size_t w, std::uint64_t seed) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(smooth_image(channels, h, w, mix64(seed + i)));
  }
  return out;
}

struct Splits {
  std::size_t train = 48;
  std::size_t test = 32;
};

using ImageHook = std::function<void(Tensor &)>;

constexpr double kMedianMargin = 4.0;

// Scales the classifier so the median top-1 logit margin over `imgs` is
// kMedianMargin (a confident teacher), then appends a digital per-class bias
// chosen so every class wins a similar share of pixels; keeps mIoU from
// hinging on a near-empty class.
void calibrate_classifier(ModelGraph &model, const std::vector<Tensor> &imgs) {
  const std::size_t c = model.class_count;
  {
    std::vector<float> margins;
    for (const Tensor &img : imgs) {
      const Tensor l = reference_forward(model, img);
      const std::size_t hw = l.size() / c;
      for (std::size_t p = 0; p < hw; ++p) {
        std::vector<float> v;
        for (std::size_t k = 0; k < c; ++k) {
          v.push_back(l[k * hw + p]);
        }
        std::partial_sort(v.begin(), v.begin() + 2, v.end(), std::greater<>());
        margins.push_back(v[0] - v[1]);
      }
    }
    std::nth_element(margins.begin(), margins.begin() + std::ptrdiff_t(margins.size() / 2),
                     margins.end());
    const double scale = kMedianMargin / margins[margins.size() / 2];
    Layer &head = model.layers[model.eligible_layers().back()];
    for (float &w : head.weight.data()) {
      w = static_cast<float>(w * scale);
    }
  }
  std::vector<std::vector<float>> logits; // per class, all pixels
  logits.resize(c);
  for (const Tensor &img : imgs) {
    const Tensor l = reference_forward(model, img);
    const std::size_t hw = l.size() / c;
    for (std::size_t k = 0; k < c; ++k) {
      logits[k].insert(logits[k].end(), l.data().begin() + static_cast<std::ptrdiff_t>(k * hw),
                       l.data().begin() + static_cast<std::ptrdiff_t>((k + 1) * hw));
    }
  }
  const std::size_t pixels = logits[0].size();
  double spread = 0;
  for (const auto &v : logits) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    spread = std::max(spread, static_cast<double>(*hi - *lo));
  }
  std::vector<double> bias(c, 0.0);
  for (int iter = 0; iter < 400; ++iter) {
    std::vector<double> wins(c, 0.0);
    for (std::size_t p = 0; p < pixels; ++p) {
      std::size_t arg = 0;
      double best = logits[0][p] + bias[0];
      for (std::size_t k = 1; k < c; ++k) {
        const double v = logits[k][p] + bias[k];
        if (v > best) {
          best = v;
          arg = k;
        }
      }
      wins[arg] += 1.0;
    }
    const double step = 0.5 * spread / (1.0 + 0.05 * iter);
    for (std::size_t k = 0; k < c; ++k) {
      bias[k] -= step * (wins[k] / static_cast<double>(pixels) - 1.0 / static_cast<double>(c));
    }
  }
  Tensor b({c});
  for (std::size_t k = 0; k < c; ++k) {
    b[k] = static_cast<float>(bias[k]);
  }
  model.layers.push_back(Layer::add_bias(b));
}

void add_splits(Fixture &f, std::size_t channels, std::size_t h, std::size_t w,
                double ignore_fraction, Splits s = {}, const ImageHook &hook = {}) {
  auto make = [&](std::size_t count, const char *purpose) {
    auto v = images(count, channels, h, w, derive_seed(f.seed, purpose));
    if (hook) {
      std::for_each(v.begin(), v.end(), hook);
    }
    return v;
  };
  auto train = make(s.train, "train-images");
  calibrate_classifier(f.model, train);
  f.train = label_with_teacher(f.model, std::move(train), ignore_fraction);
  f.test = label_with_teacher(f.model, make(s.test, "test-images"), ignore_fraction);
}

Fixture make_uniform(std::uint64_t seed) {
  Fixture f;
  f.kind = Kind::uniform;
  Rng rng(derive_seed(seed, "uniform-weights"));
  f.model = ModelGraph{{3, 16, 16},
                       4,
                       {Layer::conv2d(normal_tensor({8, 3, 3, 3}, 0.35, rng), 1, 1),
                        Layer::add_bias(normal_tensor({8}, 0.1, rng)), Layer::relu(),
                        Layer::conv2d(normal_tensor({8, 8, 3, 3}, 0.2, rng), 1, 1),
                        Layer::add_bias(normal_tensor({8}, 0.1, rng)), Layer::relu(),
                        Layer::conv2d(normal_tensor({4, 8, 1, 1}, 0.5, rng), 1, 0)}};
  f.focus_layer = 3;
  f.seed = seed;
  add_splits(f, 3, 16, 16, 0.1);
  return f;
}

// Layer 0 produces ordinary channels, one dead channel (always zero after the
// relu) and one channel driven ~100x harder by a sparse "glint" input. Layer 3
// (1x1 mixing) sees the outlier in every input vector, so its per-vector scale
// and hence its output ADC step are set by it; it also passes the outlier
// through negated, which the next relu removes. Each layer-3 feature exists
// twice: a flat row, and a spiky row carrying a quarter of the same signal next
// to a full-scale weight on the dead channel. Both rows share the same ADC
// step, so the spiky copy is four times noisier on the core; the float32
// classifier reads only the spiky copies. Every layer-3 weight is exact on
// the 7-bit grid.
constexpr std::size_t kOrdinary = 10;
constexpr std::size_t kFeatures = 5;
constexpr double kOutlierGain = 100.0;
constexpr double kGlintFloor = 0.1;

Fixture make_outlier(std::uint64_t seed) {
  Fixture f;
  f.kind = Kind::outlier_layer;
  f.seed = seed;
  Rng rng(derive_seed(seed, "outlier-weights"));
  const std::size_t dead = kOrdinary, glint = kOrdinary + 1, mid = kOrdinary + 2;

  Tensor w0({mid, 4, 3, 3});
  Tensor b0({mid});
  for (std::size_t o = 0; o < kOrdinary; ++o) {
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t k = 0; k < 9; ++k) {
        w0[((o * 4) + c) * 9 + k] = static_cast<float>(0.3 * rng.normal());
      }
    }
    b0[o] = static_cast<float>(0.1 * rng.normal());
  }
  b0[dead] = -1.0f;
  // ordinary channels average about 0.3 in magnitude; the glint response is
  // scaled to sit two orders above that
  for (std::size_t k = 0; k < 9; ++k) {
    w0[((glint * 4) + 3) * 9 + k] =
        static_cast<float>(kOutlierGain * 0.3 / 9.0 * rng.uniform(0.5, 1.5));
  }

  const std::size_t rows = 2 * kFeatures + 1;
  Tensor w3({rows, mid, 1, 1});
  for (std::size_t feat = 0; feat < kFeatures; ++feat) {
    float *flat = &w3[(2 * feat) * mid];
    float *spiky = &w3[(2 * feat + 1) * mid];
    flat[dead] = spiky[dead] = 1.0f;
    for (std::size_t c = 0; c < kOrdinary; ++c) {
      const std::int64_t code = 4 * rng.integer(-15, 15);
      flat[c] = static_cast<float>(static_cast<double>(code) / 63.0);
      spiky[c] = static_cast<float>(static_cast<double>(code / 4) / 63.0);
    }
  }
  w3[(rows - 1) * mid + glint] = -1.0f;

  const auto glints = [](Tensor &img) {
    for (std::size_t i = 3 * 256; i < 4 * 256; ++i) {
      img[i] = static_cast<float>(kGlintFloor + (1.0 - kGlintFloor) * std::pow(img[i], 8.0));
    }
  };
  // orient each feature to fire on at least half of the pixels; a feature
  // that is mostly negative leaves the classifier a few bright pixels and a
  // heavy-tailed logit distribution
  const ModelGraph probe{{4, 16, 16},
                         rows,
                         {Layer::conv2d(w0, 1, 1), Layer::add_bias(b0), Layer::relu(),
                          Layer::conv2d(w3, 1, 0)}};
  std::vector<std::vector<float>> pre(kFeatures);
  for (Tensor &img : images(16, 4, 16, 16, derive_seed(seed, "outlier-probe"))) {
    glints(img);
    const Tensor out = reference_forward(probe, img);
    for (std::size_t feat = 0; feat < kFeatures; ++feat) {
      const float *row = out.data().data() + (2 * feat + 1) * 256;
      pre[feat].insert(pre[feat].end(), row, row + 256);
    }
  }
  for (std::size_t feat = 0; feat < kFeatures; ++feat) {
    auto &v = pre[feat];
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    if (v[v.size() / 2] < 0.0f) {
      for (std::size_t r : {2 * feat, 2 * feat + 1}) {
        for (std::size_t c = 0; c < kOrdinary; ++c) {
          w3[r * mid + c] = -w3[r * mid + c];
        }
      }
    }
  }

  Tensor w5({4, rows, 1, 1});
  for (std::size_t o = 0; o < 4; ++o) {
    for (std::size_t feat = 0; feat < kFeatures; ++feat) {
      w5[o * rows + 2 * feat + 1] = static_cast<float>(rng.normal());
    }
  }
  f.model = ModelGraph{{4, 16, 16},
                       4,
                       {Layer::conv2d(w0, 1, 1), Layer::add_bias(b0), Layer::relu(),
                        Layer::conv2d(w3, 1, 0), Layer::relu(), Layer::conv2d(w5, 1, 0)}};
  f.focus_layer = 3;
  // channel 3 becomes a dim floor with sparse bright glints
  add_splits(f, 4, 16, 16, 0.15, {}, glints);
  return f;
}

// One 1x1 layer over 64 positive channels whose rows share a large positive
// common mode; class evidence lives in small per-class deviations. Gain lifts
// the deviations above the noise until the common mode clips the ADC.
constexpr std::size_t kSatChannels = 64;

Fixture make_saturating(std::uint64_t seed) {
  Fixture f;
  f.kind = Kind::saturating;
  f.seed = seed;
  Rng rng(derive_seed(seed, "saturating-weights"));
  Tensor w({4, kSatChannels, 1, 1});
  for (std::size_t o = 0; o < 4; ++o) {
    for (std::size_t c = 0; c < kSatChannels; ++c) {
      w[o * kSatChannels + c] = static_cast<float>(0.35 + 0.15 * rng.normal());
    }
  }
  f.model = ModelGraph{{kSatChannels, 12, 12}, 4, {Layer::conv2d(w, 1, 0)}};
  f.focus_layer = 0;
  f.config.noise_sigma = 3.0 * f.config.adc_step_counts();
  add_splits(f, kSatChannels, 12, 12, 0.0, {48, 24});
  return f;
}

Fixture make_cnn_workload(std::uint64_t seed) {
  Fixture f;
  f.kind = Kind::cnn_workload;
  f.seed = seed;
  f.model = ModelGraph{{16, 32, 32},
                       8,
                       {Layer::conv2d(Tensor({256, 16, 3, 3}), 1, 1), Layer::relu(),
                        Layer::conv2d(Tensor({256, 256, 3, 3}), 1, 1), Layer::relu(),
                        Layer::conv2d(Tensor({8, 256, 1, 1}), 1, 0)}};
  f.focus_layer = 2;
  return f;
}

Fixture make_maskformer_workload(std::uint64_t seed) {
  Fixture f;
  f.kind = Kind::maskformer_workload;
  f.seed = seed;
  std::vector<Layer> layers{Layer::dense(Tensor({1024, 256})), Layer::relu()};
  for (int i = 0; i < 6; ++i) {
    layers.push_back(Layer::dense(Tensor({1024, 1024})));
    layers.push_back(Layer::relu());
  }
  layers.push_back(Layer::dense(Tensor({8, 1024})));
  f.model = ModelGraph{{256, 32, 32}, 8, std::move(layers)};
  f.focus_layer = 2;
  return f;
}

} // namespace

const char *to_string(Kind k) {
  switch (k) {
  case Kind::uniform:
    return "uniform";
  case Kind::outlier_layer:
    return "outlier-layer";
  case Kind::saturating:
    return "saturating";
  case Kind::cnn_workload:
    return "cnn-workload";
  case Kind::maskformer_workload:
    return "maskformer-workload";
  }
  return "?";
}

Kind parse_kind(const std::string &s) {
  std::string t = s;
  std::replace(t.begin(), t.end(), '_', '-');
  for (Kind k : {Kind::uniform, Kind::outlier_layer, Kind::saturating, Kind::cnn_workload,
                 Kind::maskformer_workload}) {
    if (t == to_string(k)) {
      return k;
    }
  }
  throw ConfigError("unknown fixture kind '" + s +
                    "' (expected uniform, outlier-layer, saturating, cnn-workload or "
                    "maskformer-workload)");
}

Tensor smooth_image(std::size_t channels, std::size_t height, std::size_t width,
                    std::uint64_t seed) {
  Rng rng(seed);
  Tensor img({channels, height, width});
  const double h = static_cast<double>(height), w = static_cast<double>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    for (int b = 0; b < 4; ++b) {
      const double cy = rng.uniform(0, h), cx = rng.uniform(0, w);
      const double r = rng.uniform(0.15, 0.4) * std::max(h, w);
      const double a = rng.uniform(0.3, 1.0);
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double d2 = std::pow(double(y) - cy, 2) + std::pow(double(x) - cx, 2);
          img.at(c, y, x) += static_cast<float>(a * std::exp(-d2 / (2 * r * r)));
        }
      }
    }
    float peak = 0;
    for (std::size_t i = 0; i < height * width; ++i) {
      peak = std::max(peak, img[c * height * width + i]);
    }
    for (std::size_t i = 0; i < height * width; ++i) {
      img[c * height * width + i] /= peak;
    }
  }
  return img;
}

Dataset label_with_teacher(const ModelGraph &model, std::vector<Tensor> imgs,
                           double ignore_fraction) {
  const std::size_t logits_at = model.logits_layer();
  Dataset data;
  std::vector<std::vector<float>> margins;
  std::vector<float> all;
  for (Tensor &img : imgs) {
    const Tensor logits = reference_trace(model, img)[logits_at];
    const std::size_t c = logits.dim(0), hw = logits.dim(1) * logits.dim(2);
    LabelMask m{logits.dim(1), logits.dim(2), std::vector<std::int32_t>(hw)};
    std::vector<float> margin(hw);
    for (std::size_t p = 0; p < hw; ++p) {
      float best = logits[p], second = -INFINITY;
      std::int32_t arg = 0;
      for (std::size_t k = 1; k < c; ++k) {
        const float v = logits[k * hw + p];
        if (v > best) {
          second = best;
          best = v;
          arg = static_cast<std::int32_t>(k);
        } else if (v > second) {
          second = v;
        }
      }
      m.labels[p] = arg;
      margin[p] = best - second;
    }
    all.insert(all.end(), margin.begin(), margin.end());
    margins.push_back(std::move(margin));
    data.push_back({std::move(img), std::move(m)});
  }
  if (ignore_fraction > 0 && !all.empty()) {
    const auto cut = static_cast<std::size_t>(ignore_fraction * static_cast<double>(all.size()));
    std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cut), all.end());
    const float threshold = all[cut];
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (std::size_t p = 0; p < margins[i].size(); ++p) {
        if (margins[i][p] < threshold) {
          data[i].label.labels[p] = kBackground;
        }
      }
    }
  }
  return data;
}

Fixture generate(Kind kind, std::uint64_t seed) {
  switch (kind) {
  case Kind::uniform:
    return make_uniform(seed);
  case Kind::outlier_layer:
    return make_outlier(seed);
  case Kind::saturating:
    return make_saturating(seed);
  case Kind::cnn_workload:
    return make_cnn_workload(seed);
  case Kind::maskformer_workload:
    return make_maskformer_workload(seed);
  }
  throw ConfigError("unknown fixture kind");
}

void save_fixture(const Fixture &f, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  save_model(f.model, dir / "model.json");
  if (!f.train.empty()) {
    save_dataset(f.train, dir / "train");
  }
  if (!f.test.empty()) {
    save_dataset(f.test, dir / "test");
  }
  nlohmann::ordered_json meta;
  meta["kind"] = to_string(f.kind);
  meta["seed"] = f.seed;
  meta["focus_layer"] = f.focus_layer;
  meta["n"] = f.config.n;
  meta["gain"] = f.config.gain;
  meta["noise_sigma"] = f.config.sigma();
  meta["train_samples"] = f.train.size();
  meta["test_samples"] = f.test.size();
  std::ofstream os(dir / "fixture.json", std::ios::binary);
  if (!os) {
    throw FormatError("cannot write " + (dir / "fixture.json").string());
  }
  os << meta.dump(2) << '\n';
}

} // namespace pcsim::fixtures
