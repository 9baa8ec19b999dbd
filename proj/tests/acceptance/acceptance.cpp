// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

// Release gate. Runs every acceptance check, prints one PASS/FAIL line each
// and exits nonzero if any fails.

#include <unistd.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracle/gemm_oracle.hpp"
#include "oracle/metric_cases.hpp"
#include "pcsim/analysis.hpp"
#include "pcsim/cli.hpp"
#include "pcsim/costmodel.hpp"
#include "pcsim/dnf.hpp"
#include "pcsim/fixtures.hpp"
#include "pcsim/metrics.hpp"
#include "pcsim/photocore.hpp"
#include "test_util.hpp"

using namespace pcsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PhotocoreConfig config(std::size_t n, double gain, double sigma, Bypass b) {
  PhotocoreConfig c;
  c.n = n;
  c.gain = gain;
  c.noise_sigma = sigma;
  c.bypass = b;
  return c;
}

// 1 ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  const NoiseSource noise(0);
  const int sizes[] = {2, 4, 8};
  const double gains[] = {1.0, 2.0, 4.0};
  std::size_t mismatches = 0, values = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 1 + int(rng() % 16), inner = 1 + int(rng() % 16), cols = 1 + int(rng() % 16);
    const int n = sizes[trial % 3];
    const double gain = gains[rng() % 3];
    const Tensor w = testutil::random_tensor({std::size_t(rows), std::size_t(inner)}, rng);
    const Tensor x = testutil::random_tensor({std::size_t(inner), std::size_t(cols)}, rng);
    const Tensor y = photocore_gemm(w, x, config(std::size_t(n), gain, 0.0, Bypass::none), noise);
    oracle::GemmParams p;
    p.n = n;
    p.gain = gain;
    const auto want = oracle::photocore_gemm(w.values(), rows, inner, x.values(), cols, p);
    for (std::size_t i = 0; i < want.size(); ++i) {
      mismatches += std::bit_cast<std::uint32_t>(y[i]) != std::bit_cast<std::uint32_t>(want[i]);
    }
    values += want.size();
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0,
          fmt("50 pairs, %zu values, %zu bit mismatches, %.2f s", values, mismatches, secs)};
}

// 2 ---------------------------------------------------------------------------

ModelGraph random_toy_model(std::mt19937_64 &rng) {
  const std::size_t c0 = 1 + rng() % 6, h = 4 + rng() % 7, w = 4 + rng() % 7;
  const std::size_t classes = 2 + rng() % 4;
  std::vector<Layer> layers;
  std::size_t c = c0;
  const std::size_t depth = 1 + rng() % 3;
  for (std::size_t d = 0; d < depth; ++d) {
    const std::size_t out = 2 + rng() % 10;
    if (rng() % 3 == 0) {
      layers.push_back(Layer::dense(testutil::random_tensor({out, c}, rng)));
    } else {
      const std::size_t k = rng() % 2 ? 3 : 1;
      layers.push_back(Layer::conv2d(testutil::random_tensor({out, c, k, k}, rng), 1, k / 2));
    }
    layers.push_back(Layer::add_bias(testutil::random_tensor({out}, rng)));
    layers.push_back(Layer::relu());
    c = out;
  }
  layers.push_back(Layer::conv2d(testutil::random_tensor({classes, c, 1, 1}, rng), 1, 0));
  return ModelGraph{{c0, h, w}, classes, std::move(layers)};
}

Outcome bypass_equivalence() {
  std::mt19937_64 rng(77);
  const std::size_t sizes[] = {2, 4, 8, 16};
  // error relative to the largest reference output of the model; the
  // per-element ratio is reported only, since near-zero outputs that cancel
  // across K-tiles carry bf16 rounding of the full-size partial sums
  double worst = 0, elementwise = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const ModelGraph m = random_toy_model(rng);
    const Tensor x = testutil::random_tensor(m.input_shape, rng);
    const auto cfg = config(sizes[rng() % 4], 1.0 + double(rng() % 8), 0.0, Bypass::all);
    const Tensor y = simulate_forward(m, x, cfg, NoiseSource(trial));
    const Tensor ref = reference_forward(m, x);
    double scale = 0, err = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      scale = std::max(scale, double(std::fabs(ref[i])));
      err = std::max(err, double(std::fabs(y[i] - ref[i])));
    }
    worst = std::max(worst, scale > 0 ? err / scale : err);
    elementwise = std::max(elementwise, testutil::max_rel_diff(y.data(), ref.data()));
  }

  // single K tile with small integers: every intermediate is exact in bf16
  std::size_t exact = 0, cases = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 8, cin = 1 + rng() % n, cout = 1 + rng() % 6;
    Tensor wt = trial % 2 ? testutil::int_tensor({cout, cin}, rng, -3, 3)
                          : testutil::int_tensor({cout, cin, 1, 1}, rng, -3, 3);
    const Layer l = trial % 2 ? Layer::dense(std::move(wt)) : Layer::conv2d(std::move(wt), 1, 0);
    const ModelGraph m{{cin, 3, 4}, cout, {l}};
    const Tensor x = testutil::int_tensor(m.input_shape, rng, -4, 4);
    exact += simulate_forward(m, x, config(n, 2.0, 0.0, Bypass::all), NoiseSource(1)) ==
             reference_forward(m, x);
    ++cases;
  }
  return {worst <= 1e-2 && exact == cases,
          fmt("20 models, worst error / max|ref| = %.2e (per-element worst %.2e, not gated); "
              "%zu/%zu single-tile cases exact",
              worst, elementwise, exact, cases)};
}

// 3 ---------------------------------------------------------------------------

Outcome energy_calibration() {
  const auto p = CostParams::calibrated();
  const ModelGraph m = fixtures::generate(fixtures::Kind::cnn_workload, 0).model;
  const double r64 = energy(m, 64, 2.0, 4, p) / energy(m, 64, 1.0, 4, p);
  const double r128 = energy(m, 128, 2.0, 4, p) / energy(m, 128, 1.0, 4, p);
  double residual = 0;
  for (std::size_t n : {16, 64, 128, 512}) {
    const double e1 = energy(m, n, 1.0, 4, p), e2 = energy(m, n, 2.0, 4, p);
    for (double g : {0.5, 3.0, 7.5, 16.0}) {
      const double fit = e1 + (g - 1.0) * (e2 - e1);
      const double e = energy(m, n, g, 4, p);
      residual = std::max(residual, std::fabs(e - fit) / e);
    }
  }
  const bool ok = std::fabs(r64 / 1.40 - 1) <= 0.01 && std::fabs(r128 / 1.90 - 1) <= 0.01 &&
                  residual < 1e-12;
  return {ok, fmt("alpha=%.6g beta=%.6g, ratio@64 %.6f, ratio@128 %.6f, linear residual %.1e",
                  p.alpha, p.beta, r64, r128, residual)};
}

// 4, 5 ------------------------------------------------------------------------

const std::vector<std::size_t> kTileGrid{16, 32, 64, 128, 256, 512};

Outcome energy_shape() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto p = CostParams::calibrated();
  const ModelGraph m = fixtures::generate(fixtures::Kind::cnn_workload, 0).model;
  std::vector<double> e;
  for (auto n : kTileGrid) {
    e.push_back(energy(m, n, 1.0, 4, p));
  }
  const auto best = std::size_t(std::min_element(e.begin(), e.end()) - e.begin());
  bool ok = kTileGrid[best] == 64 || kTileGrid[best] == 128;
  for (std::size_t i = 0; i < e.size() - 1; ++i) {
    ok = ok && (i < best ? e[i] > e[i + 1] : e[i] < e[i + 1]);
  }
  const double secs = seconds_since(t0);
  std::string curve;
  for (std::size_t i = 0; i < e.size(); ++i) {
    curve += fmt(" %zu:%.3g", kTileGrid[i], e[i] / e[2]);
  }
  return {ok && secs < 5.0,
          fmt("minimum at n=%zu, E/E(64):%s, %.3f s", kTileGrid[best], curve.c_str(), secs)};
}

Outcome throughput_monotonicity() {
  const auto p = CostParams::calibrated();
  const ModelGraph cnn = fixtures::generate(fixtures::Kind::cnn_workload, 0).model;
  const ModelGraph mf = fixtures::generate(fixtures::Kind::maskformer_workload, 0).model;
  bool monotone = true, below = true;
  double prev = 0;
  std::string curve;
  for (auto n : kTileGrid) {
    const double t = throughput(cnn, n, 1.0, 4, p), tm = throughput(mf, n, 1.0, 4, p);
    monotone = monotone && t >= prev;
    below = below && tm < t;
    prev = t;
    curve += fmt(" %zu:%.3g/%.3g", n, t, tm);
  }
  return {monotone && below, fmt("images/s cnn/maskformer:%s", curve.c_str())};
}

// 6, 7 ------------------------------------------------------------------------

Outcome abfp_superiority() {
  bool ok = true;
  std::string gaps;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto f = fixtures::generate(fixtures::Kind::outlier_layer, s);
    auto cfg = f.config;
    cfg.rng_seed = 100 + s;
    const auto c = abfp_ablation(f.model, f.test, cfg);
    const double gap = c.with_abfp.miou - c.without_abfp.miou;
    ok = ok && gap >= 0.05;
    gaps += fmt(" %.3f", gap);
  }
  return {ok, "gap per seed:" + gaps};
}

Outcome output_q_dominance() {
  bool ok = true;
  std::string rec;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto f = fixtures::generate(fixtures::Kind::outlier_layer, s);
    auto cfg = f.config;
    cfg.rng_seed = 100 + s;
    const double fp = evaluate_reference(f.model, f.test).miou;
    const auto rows = quantization_ablation(f.model, f.test, cfg, f.focus_layer);
    const double base = rows[0].report.miou;
    auto recovery = [&](std::size_t i) { return (rows[i].report.miou - base) / (fp - base); };
    const double in = recovery(1), wt = recovery(2), out = recovery(3);
    ok = ok && fp > base && out >= 0.8 && in <= 0.2 && wt <= 0.2;
    rec += fmt(" [%.2f %.2f %.2f]", in, wt, out);
  }
  return {ok, "recovery [input weight output] per seed:" + rec};
}

// 8 ---------------------------------------------------------------------------

Outcome gain_sweet_spot() {
  const auto f = fixtures::generate(fixtures::Kind::saturating, 0);
  auto cfg = f.config;
  const std::vector<double> gains{1, 2, 4, 8, 16, 32};
  std::vector<double> miou;
  for (double g : gains) {
    cfg.gain = g;
    double sum = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      sum += evaluate(f.model, f.test, cfg, NoiseSource(s)).miou;
    }
    miou.push_back(sum / 20);
  }
  const auto peak = std::size_t(std::max_element(miou.begin(), miou.end()) - miou.begin());
  const bool ok = cfg.noise_sigma > 0 && peak > 0 && peak + 1 < gains.size() &&
                  miou.front() < miou[peak] && miou.back() < miou[peak];
  std::string curve;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    curve += fmt(" G%g:%.3f", gains[i], miou[i]);
  }
  return {ok, fmt("sigma=%g, mean mIoU over 20 seeds:", cfg.noise_sigma) + curve};
}

// 9 ---------------------------------------------------------------------------

Outcome noise_statistics() {
  // W=[1,1] against X=[1,-1]: the exact product is 0, so the output is the error
  const std::size_t draws = 100000;
  const Tensor w({1, 2}, {1, 1});
  Tensor x({2, draws});
  for (std::size_t v = 0; v < draws; ++v) {
    x[v] = 1.0f;
    x[draws + v] = -1.0f;
  }
  bool ok = true;
  std::string detail;
  const struct {
    std::size_t n;
    double gain, sigma;
  } cases[] = {{2, 2.0, 3000.0}, {8, 1.0, 500.0}, {64, 4.0, 20000.0}};
  std::uint64_t seed = 11;
  for (const auto &c : cases) {
    const auto cfg = config(c.n, c.gain, c.sigma, Bypass::all);
    const Tensor y = photocore_gemm(w, x, cfg, NoiseSource(seed++));
    double s = 0, s2 = 0;
    for (float v : y.data()) {
      s += v;
      s2 += double(v) * v;
    }
    const double mean = s / draws;
    const double sd = std::sqrt(s2 / draws - mean * mean);
    const double want = cfg.output_sigma(1.0, 1.0);
    const double se = sd / std::sqrt(double(draws));
    ok = ok && std::fabs(mean) <= 3 * se && std::fabs(sd - want) <= 0.05 * want;
    detail += fmt(" [n=%zu mean/SE %+.2f std/target %.4f]", c.n, mean / se, sd / want);
  }
  return {ok, "1e5 draws each:" + detail};
}

// 10 --------------------------------------------------------------------------

Outcome metric_correctness() {
  std::size_t good = 0;
  const auto cases = oracle::metric_cases();
  for (const auto &c : cases) {
    bool same = pixel_accuracy(c.pred, c.label) ==
                double(c.accuracy.first) / double(c.accuracy.second);
    const MetricReport r = mean_iou(c.pred, c.label, c.classes);
    same = same && r.per_class_iou.size() == c.classes && r.miou == oracle::expected_miou(c);
    for (std::size_t k = 0; same && k < c.classes; ++k) {
      same = r.per_class_iou[k].has_value() == c.iou[k].has_value() &&
             (!c.iou[k] || *r.per_class_iou[k] == double(c.iou[k]->first) / c.iou[k]->second);
    }
    good += same;
  }
  const LabelMask a{2, 3, {0, 1, 2, 2, 1, 0}};
  const LabelMask b{2, 3, {1, 2, 0, 0, 2, 1}};
  const bool perfect = mean_iou(a, a, 3).miou == 1.0 && pixel_accuracy(a, a) == 1.0;
  const bool disjoint = mean_iou(b, a, 3).miou == 0.0 && pixel_accuracy(b, a) == 0.0;
  return {good == cases.size() && perfect && disjoint,
          fmt("%zu/%zu frozen cases exact, perfect=%s, disjoint=%s", good, cases.size(),
              perfect ? "1.0" : "wrong", disjoint ? "0.0" : "wrong")};
}

// 11 --------------------------------------------------------------------------

SegmentationSample random_sample(const Shape &img, std::size_t h, std::size_t w,
                                 std::size_t classes, std::mt19937_64 &rng) {
  SegmentationSample s{testutil::random_tensor(img, rng), {h, w, {}}};
  for (std::size_t i = 0; i < h * w; ++i) {
    s.label.labels.push_back(i % 5 == 0 ? kBackground : std::int32_t(rng() % classes));
  }
  return s;
}

// Worst relative disagreement between analytic and central-difference gradients.
double gradient_error(const ModelGraph &m, const SegmentationSample &s,
                      const train::Injection &inject) {
  using namespace train;
  const Params p = params_of(m);
  Params g = zeros_like(p);
  loss_and_grad(m, p, s, inject, &g);
  const double h = 1e-6;
  double worst = 0;
  auto check = [&](std::vector<std::vector<double>> Params::*field) {
    for (std::size_t l = 0; l < (p.*field).size(); ++l) {
      for (std::size_t k = 0; k < (p.*field)[l].size(); ++k) {
        Params up = p, down = p;
        (up.*field)[l][k] += h;
        (down.*field)[l][k] -= h;
        const double fd = (loss_and_grad(m, up, s, inject, nullptr) -
                           loss_and_grad(m, down, s, inject, nullptr)) / (2 * h);
        const double an = (g.*field)[l][k];
        worst = std::max(worst, std::fabs(fd - an) / std::max(1e-3, std::fabs(fd) + std::fabs(an)));
      }
    }
  };
  check(&Params::weight);
  check(&Params::bias);
  return worst;
}

double gradient_checks() {
  std::mt19937_64 rng(31);
  double worst = 0;
  {
    const ModelGraph m{{2, 5, 6},
                       3,
                       {Layer::conv2d(testutil::random_tensor({4, 2, 3, 3}, rng), 1, 1),
                        Layer::add_bias(testutil::random_tensor({4}, rng)), Layer::relu(),
                        Layer::conv2d(testutil::random_tensor({3, 4, 1, 1}, rng), 1, 0)}};
    const auto s = random_sample({2, 5, 6}, 5, 6, 3, rng);
    worst = std::max(worst, gradient_error(m, s, {}));
    // with additive offsets on the first conv output, as during noisy training
    train::Injection inject(m.layers.size());
    for (int i = 0; i < 4 * 5 * 6; ++i) {
      inject[0].push_back(std::normal_distribution<double>(0.0, 0.1)(rng));
    }
    worst = std::max(worst, gradient_error(m, s, inject));
  }
  {
    const ModelGraph m{{2, 7, 7}, 3, {Layer::conv2d(testutil::random_tensor({3, 2, 3, 3}, rng), 2, 0)}};
    worst = std::max(worst, gradient_error(m, random_sample({2, 7, 7}, 3, 3, 3, rng), {}));
  }
  {
    const ModelGraph m{{3, 4, 4},
                       4,
                       {Layer::dense(testutil::random_tensor({5, 3}, rng)), Layer::relu(),
                        Layer::dense(testutil::random_tensor({4, 5}, rng)),
                        Layer::add_bias(testutil::random_tensor({4}, rng))}};
    worst = std::max(worst, gradient_error(m, random_sample({3, 4, 4}, 4, 4, 4, rng), {}));
  }
  return worst;
}

Outcome dnf_recovery() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto f = fixtures::generate(fixtures::Kind::outlier_layer, s);
    auto cfg = f.config;
    cfg.rng_seed = 1000 + s;
    TrainConfig tc;
    tc.seed = s;
    tc.frozen_layers = {f.focus_layer};
    const auto profile = estimate_noise_profile(f.model, f.train, cfg);
    const auto r = dnf_train(f.model, f.train, profile, tc);
    const double oob = evaluate(f.model, f.test, cfg, NoiseSource(cfg.rng_seed + 7)).miou;
    const double dnf = evaluate(r.model, f.test, cfg, NoiseSource(cfg.rng_seed + 7)).miou;
    wins += dnf > oob;
    detail += fmt(" %.3f->%.3f", oob, dnf);
  }
  const double grad = gradient_checks();
  return {wins >= 4 && grad < 1e-4,
          fmt("%d/5 seeds improve (oob->dnf:%s), gradient error %.1e", wins, detail.c_str(), grad)};
}

// 12 --------------------------------------------------------------------------

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path &dir) {
  std::map<std::string, std::string> out;
  if (fs::exists(dir)) {
    for (const auto &e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file()) {
        out[fs::relative(e.path(), dir).string()] = slurp(e.path());
      }
    }
  }
  return out;
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "photocore-sim");
  std::vector<const char *> argv;
  for (const auto &a : args) {
    argv.push_back(a.c_str());
  }
  std::ostringstream out, err;
  return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / ("pcsim_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "gen.toml") << "[genfixture]\nkind = \"outlier-layer\"\n";
  if (invoke({"genfixture", "--config", (dir / "gen.toml").string(), "--seed", "3", "--out",
              (dir / "fx").string()}) != 0) {
    fs::remove_all(dir);
    return {false, "genfixture failed"};
  }
  const std::string cfg = (dir / "fx" / "config.toml").string();
  std::size_t identical = 0, files = 0;
  std::string failed;
  for (const char *c : cli::kCommands) {
    std::map<std::string, std::string> runs[2];
    int codes[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path o = dir / (std::string(c) + std::to_string(k));
      codes[k] = invoke({c, "--config", cfg, "--seed", "9", "--out", o.string()});
      runs[k] = tree(o);
    }
    files += runs[0].size();
    if (codes[0] == 0 && codes[1] == 0 && !runs[0].empty() && runs[0] == runs[1]) {
      ++identical;
    } else {
      failed += std::string(" ") + c;
    }
  }
  fs::remove_all(dir);
  const std::size_t total = std::size(cli::kCommands);
  return {identical == total,
          fmt("%zu/%zu commands byte-identical on rerun (%zu files)", identical, total, files) +
              (failed.empty() ? "" : "; differs:" + failed)};
}

} // namespace

int main() {
  const std::pair<const char *, std::function<Outcome()>> criteria[] = {
      {"oracle equivalence", oracle_equivalence},
      {"bypass equivalence", bypass_equivalence},
      {"energy calibration", energy_calibration},
      {"energy vs tile size", energy_shape},
      {"throughput monotonicity", throughput_monotonicity},
      {"ABFP superiority", abfp_superiority},
      {"output quantization dominance", output_q_dominance},
      {"gain sweet spot", gain_sweet_spot},
      {"noise statistics", noise_statistics},
      {"metric correctness", metric_correctness},
      {"DNF recovery", dnf_recovery},
      {"determinism", cli_determinism},
  };
  int failures = 0;
  int id = 0;
  for (const auto &[name, run] : criteria) {
    ++id;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", id - failures, id);
  return failures == 0 ? 0 : 1;
}
