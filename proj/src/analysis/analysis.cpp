// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/analysis.hpp"


#include <algorithm>
#include <cmath>

#include "pcsim/error.hpp"
#include "../util/parallel.hpp"

namespace pcsim {

LabelMask predict_mask(const Tensor &logits) {
  if (logits.rank() != 3) {
    throw ShapeError("logits must be [C, H, W], got " + shape_str(logits.shape()));
  }
  const Tensor ids = digital::argmax_channel(logits);
  LabelMask m{logits.dim(1), logits.dim(2), {}};
  m.labels.reserve(ids.size());
  for (float v : ids.data()) {
    m.labels.push_back(static_cast<std::int32_t>(v));
  }
  return m;
}

std::vector<LabelMask> predict(const ModelGraph &model, const Dataset &data,
                               const PhotocoreConfig &cfg, const NoiseSource &noise,
                               const SimOptions &opt) {
  model.validate();
  cfg.validate();
  const std::size_t logits = model.logits_layer();
  std::vector<LabelMask> out(data.size());
  detail::parallel_for(data.size(), [&](std::size_t s) {
    const auto trace = simulate_trace(model, data[s].image, cfg, noise.for_stream(s), opt);
    out[s] = predict_mask(trace[logits]);
  });
  return out;
}

namespace {

MetricReport score(const std::vector<LabelMask> &pred, const Dataset &data,
                   std::size_t class_count) {
  MetricAccumulator acc(class_count);
  for (std::size_t i = 0; i < data.size(); ++i) {
    acc.add(pred[i], data[i].label);
  }
  return acc.report();
}

SimOptions single_layer(const ModelGraph &model, std::size_t layer) {
  return SimOptions{only_layer_on_photocore(model, layer)};
}

} // namespace

MetricReport evaluate(const ModelGraph &model, const Dataset &data, const PhotocoreConfig &cfg,
                      const NoiseSource &noise, const SimOptions &opt) {
  return score(predict(model, data, cfg, noise, opt), data, model.class_count);
}

MetricReport evaluate_reference(const ModelGraph &model, const Dataset &data) {
  model.validate();
  const std::size_t logits = model.logits_layer();
  std::vector<LabelMask> pred(data.size());
  detail::parallel_for(data.size(), [&](std::size_t s) {
    pred[s] = predict_mask(reference_trace(model, data[s].image)[logits]);
  });
  return score(pred, data, model.class_count);
}

std::vector<SensitivityRow> layer_sensitivity_scan(const ModelGraph &model, const Dataset &data,
                                                   const PhotocoreConfig &cfg) {
  const MetricReport fp32 = evaluate_reference(model, data);
  const NoiseSource noise(cfg.rng_seed);
  std::vector<SensitivityRow> rows;
  for (std::size_t i : model.eligible_layers()) {
    SensitivityRow r;
    r.layer_index = i;
    r.layer_kind = model.layers[i].kind;
    r.miou_fp32 = fp32.miou;
    r.miou_quantized = evaluate(model, data, cfg, noise, single_layer(model, i)).miou;
    r.miou_drop = r.miou_fp32 - r.miou_quantized;
    rows.push_back(r);
  }
  return rows;
}

std::vector<AblationRow> quantization_ablation(const ModelGraph &model, const Dataset &data,
                                               const PhotocoreConfig &cfg,
                                               std::size_t layer_index) {
  const MetricReport fp32 = evaluate_reference(model, data);
  const SimOptions opt = single_layer(model, layer_index);
  const NoiseSource noise(cfg.rng_seed);
  std::vector<AblationRow> rows;
  const std::pair<const char *, Bypass> settings[] = {{"all", Bypass::none},
                                                      {"no_input_q", Bypass::input_q},
                                                      {"no_weight_q", Bypass::weight_q},
                                                      {"no_output_q", Bypass::output_q}};
  for (const auto &[name, bypass] : settings) {
    PhotocoreConfig c = cfg;
    c.bypass = bypass;
    rows.push_back({name, relative_to(evaluate(model, data, c, noise, opt), fp32)});
  }
  return rows;
}

AbfpComparison abfp_ablation(const ModelGraph &model, const Dataset &data,
                             const PhotocoreConfig &cfg) {
  AbfpComparison r;
  r.fp32 = evaluate_reference(model, data);
  const NoiseSource noise(cfg.rng_seed);
  PhotocoreConfig c = cfg;
  c.scale_mode = ScaleMode::abfp;
  r.with_abfp = relative_to(evaluate(model, data, c, noise), r.fp32);
  c.scale_mode = ScaleMode::per_tensor;
  r.without_abfp = relative_to(evaluate(model, data, c, noise), r.fp32);
  return r;
}

RangeUtilization range_utilization_of(const std::vector<float> &values, unsigned bits_y) {
  const QuantParams q(bits_y);
  const auto delta = static_cast<double>(q.delta);
  const auto levels = static_cast<std::size_t>(2 * q.delta + 1);
  RangeUtilization r;
  r.histogram.assign(levels, 0.0);
  if (values.empty()) {
    throw DomainError("range utilization needs at least one output value");
  }
  for (float v : values) {
    r.max_abs = std::max(r.max_abs, static_cast<double>(std::fabs(v)));
  }
  const double inv = r.max_abs > 0 ? 1.0 / r.max_abs : 0.0;
  double sum = 0, sum2 = 0;
  for (float v : values) {
    const double u = v * inv;
    sum += u;
    sum2 += u * u;
    const auto bin = static_cast<std::size_t>(std::lround(u * delta) + q.delta);
    r.histogram[bin] += 1.0;
  }
  const auto count = static_cast<double>(values.size());
  for (double &h : r.histogram) {
    h /= count;
  }
  r.mean = sum / count;
  r.stddev = std::sqrt(std::max(0.0, sum2 / count - r.mean * r.mean));
  // levels k / delta inside [mean - 3 sd, mean + 3 sd], clipped to the ADC range
  const double lo = std::max(-delta, std::ceil((r.mean - 3 * r.stddev) * delta - 1e-9));
  const double hi = std::min(delta, std::floor((r.mean + 3 * r.stddev) * delta + 1e-9));
  const double covered = hi >= lo ? hi - lo + 1 : 0.0;
  r.three_sigma_level_fraction = covered / static_cast<double>(levels);
  return r;
}

RangeUtilization range_utilization(const ModelGraph &model, const Dataset &data,
                                   std::size_t layer_index, unsigned bits_y) {
  model.validate();
  if (layer_index >= model.layers.size()) {
    throw ShapeError("layer index " + std::to_string(layer_index) + " out of range");
  }
  std::vector<std::vector<float>> per_sample(data.size());
  detail::parallel_for(data.size(), [&](std::size_t s) {
    per_sample[s] = reference_trace(model, data[s].image)[layer_index].values();
  });
  std::vector<float> all;
  for (const auto &v : per_sample) {
    all.insert(all.end(), v.begin(), v.end());
  }
  RangeUtilization r = range_utilization_of(all, bits_y);
  r.layer_index = layer_index;
  return r;
}

std::vector<SweepRow> sweep(const ModelGraph &model, const Dataset &data,
                            const PhotocoreConfig &base, const CostParams &cost,
                            const SweepGrid &grid) {
  if (grid.n.empty() || grid.gain.empty() || grid.seeds == 0) {
    throw ConfigError("sweep grid must contain at least one n, one gain and one seed");
  }
  cost.validate();
  std::vector<SweepRow> rows;
  for (std::size_t n : grid.n) {
    const WorkloadStats ws = workload_stats(model, n, grid.batch);
    for (double g : grid.gain) {
      PhotocoreConfig c = base;
      c.n = n;
      c.gain = g;
      c.validate();
      SweepRow r;
      r.n = n;
      r.gain = g;
      r.time = execution_time(ws, cost);
      r.power = power(g, n, cost);
      r.energy = r.time * r.power;
      r.throughput_ips = throughput(ws, cost);
      r.utilization = ws.utilization();
      if (!data.empty()) {
        for (std::size_t s = 0; s < grid.seeds; ++s) {
          const MetricReport m = evaluate(model, data, c, NoiseSource(base.rng_seed + s));
          r.miou += m.miou;
          r.pixel_acc += m.pixel_accuracy;
        }
        r.miou /= static_cast<double>(grid.seeds);
        r.pixel_acc /= static_cast<double>(grid.seeds);
      }
      rows.push_back(r);
    }
  }
  return rows;
}

} // namespace pcsim
