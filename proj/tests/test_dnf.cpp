// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>

#include "json.hpp"

#include "pcsim/analysis.hpp"
#include "pcsim/dnf.hpp"
#include "pcsim/error.hpp"
#include "pcsim/fixtures.hpp"
#include "test_util.hpp"

using namespace pcsim;

namespace {

SegmentationSample random_sample(const Shape &img, std::size_t h, std::size_t w,
                                 std::size_t classes, std::mt19937_64 &rng) {
  SegmentationSample s{testutil::random_tensor(img, rng), {h, w, {}}};
  for (std::size_t i = 0; i < h * w; ++i) {
    s.label.labels.push_back(i % 5 == 0 ? kBackground : std::int32_t(rng() % classes));
  }
  return s;
}

// Worst relative error of analytic vs central-difference gradients.
double gradient_check(const ModelGraph &m, const SegmentationSample &s) {
  using namespace train;
  const Params p = params_of(m);
  Params g = zeros_like(p);
  loss_and_grad(m, p, s, {}, &g);
  double worst = 0;
  const double h = 1e-6;
  auto check = [&](std::vector<std::vector<double>> Params::*field) {
    for (std::size_t l = 0; l < (p.*field).size(); ++l) {
      for (std::size_t k = 0; k < (p.*field)[l].size(); ++k) {
        Params up = p, down = p;
        (up.*field)[l][k] += h;
        (down.*field)[l][k] -= h;
        const double fd = (loss_and_grad(m, up, s, {}, nullptr) -
                           loss_and_grad(m, down, s, {}, nullptr)) / (2 * h);
        const double an = (g.*field)[l][k];
        worst = std::max(worst, std::fabs(fd - an) / std::max(1e-3, std::fabs(fd) + std::fabs(an)));
      }
    }
  };
  check(&Params::weight);
  check(&Params::bias);
  return worst;
}

} // namespace

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(21);
  SUBCASE("conv / bias / relu / conv") {
    const ModelGraph m{{2, 5, 6},
                       3,
                       {Layer::conv2d(testutil::random_tensor({4, 2, 3, 3}, rng), 1, 1),
                        Layer::add_bias(testutil::random_tensor({4}, rng)), Layer::relu(),
                        Layer::conv2d(testutil::random_tensor({3, 4, 1, 1}, rng), 1, 0)}};
    CHECK(gradient_check(m, random_sample({2, 5, 6}, 5, 6, 3, rng)) < 1e-4);
  }
  SUBCASE("strided conv without padding") {
    const ModelGraph m{{2, 7, 7},
                       3,
                       {Layer::conv2d(testutil::random_tensor({3, 2, 3, 3}, rng), 2, 0)}};
    CHECK(gradient_check(m, random_sample({2, 7, 7}, 3, 3, 3, rng)) < 1e-4);
  }
  SUBCASE("dense over a pixel grid") {
    const ModelGraph m{{3, 4, 4},
                       4,
                       {Layer::dense(testutil::random_tensor({5, 3}, rng)), Layer::relu(),
                        Layer::dense(testutil::random_tensor({4, 5}, rng)),
                        Layer::add_bias(testutil::random_tensor({4}, rng))}};
    CHECK(gradient_check(m, random_sample({3, 4, 4}, 4, 4, 4, rng)) < 1e-4);
  }
}

TEST_CASE("loss matches a hand-computed value") {
  // one pixel, logits [0, ln 3]: softmax = [1/4, 3/4]
  const ModelGraph m{{2, 1, 1}, 2, {Layer::dense(Tensor({2, 2}, {1, 0, 0, 1}))}};
  SegmentationSample s{Tensor({2, 1, 1}, {0.0f, float(std::log(3.0))}), {1, 1, {0}}};
  const auto p = train::params_of(m);
  CHECK(train::loss_and_grad(m, p, s, {}, nullptr) == doctest::Approx(std::log(4.0)).epsilon(1e-6));
  s.label.labels[0] = kBackground;
  CHECK(train::loss_and_grad(m, p, s, {}, nullptr) == 0.0);
}

TEST_CASE("noise profile JSON round trip and schema checks") {
  NoiseProfile p;
  p.seed = 17;
  p.layers = {{0, 0.001, 0.25, 12000}, {3, -0.5, 0.125, 40960}};
  const NoiseProfile q = profile_from_json(profile_to_json(p));
  CHECK(q.seed == 17);
  REQUIRE(q.layers.size() == 2);
  CHECK(q.layers[1].layer_index == 3);
  CHECK(q.layers[1].mean == -0.5);
  CHECK(q.layers[1].std == 0.125);
  CHECK(q.layers[0].sample_count == 12000);
  CHECK(profile_to_json(q) == profile_to_json(p));

  const auto good = nlohmann::json::parse(profile_to_json(p));
  auto rejects = [&](const std::function<void(nlohmann::json &)> &edit) {
    nlohmann::json j = good;
    edit(j);
    CHECK_THROWS_AS(profile_from_json(j.dump()), FormatError);
  };
  rejects([](auto &j) { j["noise_profile_version"] = 2; });
  rejects([](auto &j) { j["extra"] = 0; });
  rejects([](auto &j) { j["layers"][0]["note"] = "x"; });
  rejects([](auto &j) { j["layers"][0]["std"] = -0.25; });
  rejects([](auto &j) { j["layers"][1]["index"] = 0; });
  rejects([](auto &j) { j["layers"][0]["std"] = "0.25"; });
  rejects([](auto &j) { j.erase("seed"); });
  CHECK_THROWS_AS(profile_from_json("[1, 2"), FormatError);

  // the second layer's mean exceeds its std
  const auto w = p.warnings();
  REQUIRE(w.size() == 1);
  CHECK(w[0].find("layer 3") != std::string::npos);
}

TEST_CASE("noise profile estimation") {
  const auto f = fixtures::generate(fixtures::Kind::uniform, 0);
  const NoiseProfile p = estimate_noise_profile(f.model, f.train, f.config);
  REQUIRE(p.layers.size() == f.model.eligible_layers().size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    CHECK(p.layers[i].layer_index == f.model.eligible_layers()[i]);
    CHECK(p.layers[i].sample_count >= 10000);
    CHECK(p.layers[i].std > 0.0);
  }
  const NoiseProfile again = estimate_noise_profile(f.model, f.train, f.config);
  CHECK(profile_to_json(again) == profile_to_json(p));

  PhotocoreConfig exact = f.config;
  exact.bypass = Bypass::all;
  exact.noise_sigma = 0.0;
  for (const auto &l : estimate_noise_profile(f.model, f.train, exact).layers) {
    // only bf16 partial sums remain: a few units of the 8-bit mantissa
    double sum2 = 0;
    std::size_t count = 0;
    for (const auto &s : f.train) {
      for (float v : reference_trace(f.model, s.image)[l.layer_index].values()) {
        sum2 += double(v) * v;
        ++count;
      }
    }
    CHECK(l.std < std::ldexp(std::sqrt(sum2 / double(count)), -8));
  }

  CHECK_THROWS_AS(estimate_noise_profile(f.model, f.train, f.config, 1u << 30), DomainError);
  CHECK_THROWS_AS(estimate_noise_profile(f.model, {}, f.config), DomainError);
}

TEST_CASE("output ADC noise of an identity layer follows the uniform-quantization law") {
  // 8 channels through an identity 1x1 conv. Weights are exact, input steps
  // are 32x finer than the output step, so the error is the output ADC
  // rounding: step = n * sx / (G * delta_y) for each pixel's input scale sx.
  const std::size_t c = 8, h = 16, w = 16;
  Tensor eye({c, c, 1, 1});
  for (std::size_t i = 0; i < c; ++i) {
    eye[i * c + i] = 1.0f;
  }
  const ModelGraph m{{c, h, w}, c, {Layer::conv2d(eye, 1, 0)}};
  std::mt19937_64 rng(8);
  Dataset data;
  for (int i = 0; i < 6; ++i) {
    data.push_back({testutil::random_tensor({c, h, w}, rng, 0.0f, 1.0f), {h, w, {}}});
    data.back().label.labels.assign(h * w, 0);
  }
  PhotocoreConfig cfg;
  cfg.noise_sigma = 0.0;
  const NoiseProfile p = estimate_noise_profile(m, data, cfg);
  REQUIRE(p.layers.size() == 1);

  double step2 = 0;
  std::size_t count = 0;
  for (const auto &s : data) {
    for (std::size_t px = 0; px < h * w; ++px) {
      double sx = 0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        sx = std::max(sx, double(s.image[ch * h * w + px]));
      }
      const double step = double(cfg.n) * sx / (cfg.gain * 1023.0);
      step2 += c * step * step;
      count += c;
    }
  }
  const double expected = std::sqrt(step2 / double(count) / 12.0);
  CHECK(p.layers[0].std == doctest::Approx(expected).epsilon(0.2));
  CHECK(std::abs(p.layers[0].mean) < 0.1 * expected);
}

TEST_CASE("training configuration and plumbing") {
  TrainConfig bad;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.clip_norm = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const auto f = fixtures::generate(fixtures::Kind::uniform, 1);
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 4;

  NoiseProfile zero;
  for (std::size_t l : f.model.eligible_layers()) {
    zero.layers.push_back({l, 0.0, 0.0, 10000});
  }
  const TrainResult a = dnf_train(f.model, f.train, zero, tc);
  const TrainResult b = fine_tune(f.model, f.train, tc);
  CHECK(a.epoch_loss == b.epoch_loss);
  for (std::size_t i = 0; i < a.model.layers.size(); ++i) {
    CHECK(a.model.layers[i].weight.values() == b.model.layers[i].weight.values());
    CHECK(a.model.layers[i].bias.values() == b.model.layers[i].bias.values());
  }

  tc.frozen_layers = {0};
  const TrainResult frozen = fine_tune(f.model, f.train, tc);
  CHECK(frozen.model.layers[0].weight.values() == f.model.layers[0].weight.values());
  CHECK(frozen.model.layers[3].weight.values() != f.model.layers[3].weight.values());
  tc.frozen_layers = {99};
  CHECK_THROWS_AS(fine_tune(f.model, f.train, tc), ConfigError);

  NoiseProfile wrong = zero;
  wrong.layers[0].layer_index = 1; // a relu
  CHECK_THROWS_AS(dnf_train(f.model, f.train, wrong, TrainConfig{}), ShapeError);
}

TEST_CASE("noisy training lowers the loss on the outlier fixture") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto f = fixtures::generate(fixtures::Kind::outlier_layer, seed);
    const NoiseProfile p = estimate_noise_profile(f.model, f.train, f.config);
    TrainConfig tc;
    tc.epochs = 4;
    tc.seed = seed;
    tc.frozen_layers = {f.focus_layer};
    const TrainResult r = dnf_train(f.model, f.train, p, tc);
    REQUIRE(r.epoch_loss.size() == 4);
    CHECK(r.epoch_loss.back() < r.epoch_loss.front());
  }
}
