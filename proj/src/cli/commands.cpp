// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "pcsim/analysis.hpp"
#include "pcsim/cli.hpp"
#include "pcsim/error.hpp"
#include "pcsim/fixtures.hpp"

namespace pcsim::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// Cost columns are reported relative to the same workload at n = 64, G = 1,
// so they carry no invented absolute unit.
constexpr std::size_t kRefN = 64;
constexpr double kRefGain = 1.0;

struct CostPoint {
  double time_rel, power_rel, energy_rel, throughput_ips, utilization;
  std::size_t weight_tiles, mvps;
};

CostPoint cost_point(const ModelGraph &m, std::size_t n, double gain, std::size_t batch,
                     const CostParams &p) {
  const WorkloadStats ref = workload_stats(m, kRefN, batch);
  const WorkloadStats ws = workload_stats(m, n, batch);
  const double t0 = execution_time(ref, p);
  const double p0 = power(kRefGain, kRefN, p);
  const double t = execution_time(ws, p);
  const double pw = power(gain, n, p);
  return {t / t0,          pw / p0,         (t * pw) / (t0 * p0), throughput(ws, p),
          ws.utilization(), ws.weight_tiles(), ws.mvps()};
}

class Csv {
public:
  Csv(const fs::path &path, const std::string &header) : os_(path, std::ios::binary) {
    if (!os_) {
      throw FormatError("cannot write " + path.string());
    }
    os_ << header << '\n';
  }

  Csv &operator<<(double v) { return cell(format_number(v)); }
  Csv &operator<<(std::size_t v) { return cell(std::to_string(v)); }
  Csv &operator<<(const std::string &v) { return cell(v); }
  void end_row() {
    os_ << '\n';
    first_ = true;
  }

private:
  Csv &cell(const std::string &s) {
    if (!first_) {
      os_ << ',';
    }
    os_ << s;
    first_ = false;
    return *this;
  }

  std::ofstream os_;
  bool first_ = true;
};

void write_json(const fs::path &path, const ojson &j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw FormatError("cannot write " + path.string());
  }
  os << j.dump(2) << '\n';
}

ojson metrics_json(const MetricReport &r) {
  ojson j;
  j["pixel_accuracy"] = r.pixel_accuracy;
  j["miou"] = r.miou;
  ojson per = ojson::array();
  for (const auto &v : r.per_class_iou) {
    per.push_back(v ? ojson(*v) : ojson(nullptr));
  }
  j["per_class_iou"] = per;
  if (r.pixel_accuracy_pct_fp32) {
    j["pixel_accuracy_pct_fp32"] = *r.pixel_accuracy_pct_fp32;
  }
  if (r.miou_pct_fp32) {
    j["miou_pct_fp32"] = *r.miou_pct_fp32;
  }
  return j;
}

ojson photocore_json(const PhotocoreConfig &p) {
  ojson j;
  j["n"] = p.n;
  j["bits_x"] = p.bits_x;
  j["bits_w"] = p.bits_w;
  j["bits_y"] = p.bits_y;
  j["gain"] = p.gain;
  j["noise_sigma"] = p.sigma();
  j["bypass"] = to_string(p.bypass);
  j["scale_mode"] = to_string(p.scale_mode);
  j["noise_seed"] = p.rng_seed;
  return j;
}

ojson cost_json(const CostPoint &c, std::size_t batch) {
  ojson j;
  j["batch"] = batch;
  j["time_rel"] = c.time_rel;
  j["power_rel"] = c.power_rel;
  j["energy_rel"] = c.energy_rel;
  j["throughput_ips"] = c.throughput_ips;
  j["utilization"] = c.utilization;
  j["weight_tiles"] = c.weight_tiles;
  j["mvps"] = c.mvps;
  return j;
}

PhotocoreConfig photocore_for(const RunConfig &cfg, const std::string &command) {
  PhotocoreConfig p = cfg.photocore;
  p.rng_seed = command_seed(cfg.seed, command, "noise");
  return p;
}

Dataset load_checked(const fs::path &dir, const ModelGraph &m) {
  Dataset d = load_dataset(dir);
  for (const auto &s : d) {
    validate_labels(s.label, m.class_count);
  }
  return d;
}

template <class T> std::vector<T> sorted_unique(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void cmd_simulate(const RunConfig &cfg, const fs::path &out) {
  const ModelGraph m = load_model(cfg.model);
  const Dataset data = load_checked(cfg.dataset, m);
  const PhotocoreConfig p = photocore_for(cfg, "simulate");
  const auto masks = predict(m, data, p, NoiseSource(p.rng_seed));
  MetricAccumulator acc(m.class_count);
  for (std::size_t i = 0; i < data.size(); ++i) {
    acc.add(masks[i], data[i].label);
  }
  const MetricReport fp32 = evaluate_reference(m, data);

  ojson j;
  j["command"] = "simulate";
  j["seed"] = cfg.seed;
  j["samples"] = data.size();
  j["photocore"] = photocore_json(p);
  j["metrics"] = metrics_json(relative_to(acc.report(), fp32));
  j["fp32"] = metrics_json(fp32);
  j["cost"] = cost_json(cost_point(m, p.n, p.gain, cfg.batch, cfg.cost), cfg.batch);
  write_json(out / "report.json", j);

  fs::create_directories(out / "masks");
  for (std::size_t i = 0; i < masks.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "pred_%04zu.pcten", i);
    save_tensor(mask_to_tensor(masks[i]), out / "masks" / name);
  }
}

void cmd_sweep(const RunConfig &cfg, const fs::path &out) {
  const ModelGraph m = load_model(cfg.model);
  const Dataset data = load_checked(cfg.dataset, m);
  const PhotocoreConfig p = photocore_for(cfg, "sweep");
  const SweepGrid grid{sorted_unique(cfg.sweep.n), sorted_unique(cfg.sweep.gain),
                       cfg.sweep.seeds, cfg.batch};
  const auto rows = sweep(m, data, p, cfg.cost, grid);
  Csv csv(out / "sweep.csv", "n,gain,miou,pixel_acc,energy_rel,throughput_ips,utilization");
  for (const SweepRow &r : rows) {
    const CostPoint c = cost_point(m, r.n, r.gain, cfg.batch, cfg.cost);
    csv << r.n << r.gain << r.miou << r.pixel_acc << c.energy_rel << r.throughput_ips
        << r.utilization;
    csv.end_row();
  }
}

void cmd_sensitivity(const RunConfig &cfg, const fs::path &out) {
  const ModelGraph m = load_model(cfg.model);
  const Dataset data = load_checked(cfg.dataset, m);
  const auto rows = layer_sensitivity_scan(m, data, photocore_for(cfg, "sensitivity"));
  Csv csv(out / "sensitivity.csv", "layer_index,layer_kind,miou_fp32,miou_quantized,miou_drop");
  for (const SensitivityRow &r : rows) {
    csv << r.layer_index << std::string(to_string(r.layer_kind)) << r.miou_fp32
        << r.miou_quantized << r.miou_drop;
    csv.end_row();
  }
}

void cmd_ablation(const RunConfig &cfg, const fs::path &out) {
  const ModelGraph m = load_model(cfg.model);
  const Dataset data = load_checked(cfg.dataset, m);
  const PhotocoreConfig p = photocore_for(cfg, "ablation");
  std::size_t layer = 0;
  if (cfg.ablation_layer) {
    layer = *cfg.ablation_layer;
  } else {
    // default to the most sensitive layer (first one on ties)
    const auto scan = layer_sensitivity_scan(m, data, p);
    if (scan.empty()) {
      throw ConfigError("model has no photocore layer to ablate");
    }
    layer = std::max_element(scan.begin(), scan.end(),
                             [](const auto &a, const auto &b) {
                               return a.miou_drop < b.miou_drop;
                             })
                ->layer_index;
  }
  const auto rows = quantization_ablation(m, data, p, layer);
  const AbfpComparison abfp = abfp_ablation(m, data, p);

  Csv csv(out / "ablation.csv", "setting,pixel_acc_pct_fp32,miou_pct_fp32");
  ojson settings = ojson::object();
  for (const AblationRow &r : rows) {
    csv << r.setting << r.report.pixel_accuracy_pct_fp32.value()
        << r.report.miou_pct_fp32.value();
    csv.end_row();
    settings[r.setting] = metrics_json(r.report);
  }
  ojson j;
  j["command"] = "ablation";
  j["seed"] = cfg.seed;
  j["layer_index"] = layer;
  j["photocore"] = photocore_json(p);
  j["settings"] = settings;
  j["abfp"] = {{"fp32", metrics_json(abfp.fp32)},
               {"with_abfp", metrics_json(abfp.with_abfp)},
               {"without_abfp", metrics_json(abfp.without_abfp)}};
  write_json(out / "ablation.json", j);
}

void cmd_rangeutil(const RunConfig &cfg, const fs::path &out) {
  const ModelGraph m = load_model(cfg.model);
  const Dataset data = load_checked(cfg.dataset, m);
  const auto layers =
      cfg.range_layers.empty() ? m.eligible_layers() : sorted_unique(cfg.range_layers);
  const auto bits = static_cast<unsigned>(cfg.photocore.bits_y);
  Csv summary(out / "rangeutil.csv",
              "layer_index,max_abs,mean,std,three_sigma_level_fraction");
  Csv hist(out / "rangeutil_histogram.csv", "layer_index,level,fraction");
  for (std::size_t l : layers) {
    const RangeUtilization r = range_utilization(m, data, l, bits);
    summary << l << r.max_abs << r.mean << r.stddev << r.three_sigma_level_fraction;
    summary.end_row();
    const auto half = static_cast<std::int64_t>(r.histogram.size() / 2);
    for (std::size_t b = 0; b < r.histogram.size(); ++b) {
      hist << l << std::to_string(static_cast<std::int64_t>(b) - half) << r.histogram[b];
      hist.end_row();
    }
  }
}

void cmd_energy(const RunConfig &cfg, const fs::path &out) {
  const ModelGraph m = load_model(cfg.model);
  Csv csv(out / "energy.csv", "n,gain,time_rel,power_rel,energy_rel,utilization");
  for (std::size_t n : sorted_unique(cfg.sweep.n)) {
    for (double g : sorted_unique(cfg.sweep.gain)) {
      const CostPoint c = cost_point(m, n, g, cfg.batch, cfg.cost);
      csv << n << g << c.time_rel << c.power_rel << c.energy_rel << c.utilization;
      csv.end_row();
    }
  }
}

std::string toml_list(const std::vector<std::size_t> &v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += (i ? ", " : "") + std::to_string(v[i]);
  }
  return s + "]";
}

void cmd_genfixture(const RunConfig &cfg, const fs::path &out) {
  const fixtures::Fixture f = fixtures::generate(fixtures::parse_kind(cfg.fixture_kind), cfg.seed);
  fixtures::save_fixture(f, out);
  // a ready-to-run config next to the fixture
  std::ofstream os(out / "config.toml", std::ios::binary);
  if (!os) {
    throw FormatError("cannot write " + (out / "config.toml").string());
  }
  const std::vector<std::size_t> focus{f.focus_layer};
  os << "model = \"model.json\"\n";
  if (!f.test.empty()) {
    os << "dataset = \"test\"\n";
  }
  if (!f.train.empty()) {
    os << "train = \"train\"\n";
  }
  os << "seed = 0\n\n[photocore]\nn = " << f.config.n
     << "\ngain = " << format_number(f.config.gain)
     << "\nnoise_sigma = " << format_number(f.config.sigma()) << "\n\n[ablation]\nlayer = "
     << f.focus_layer << "\n\n[rangeutil]\nlayers = " << toml_list(focus)
     << "\n\n[dnf]\nfrozen_layers = " << toml_list(focus) << "\n";
}

void cmd_dnf(const RunConfig &cfg, const fs::path &out) {
  const ModelGraph m = load_model(cfg.model);
  const Dataset train = load_checked(cfg.train, m);
  const Dataset test = load_checked(cfg.dataset, m);
  PhotocoreConfig p = cfg.photocore;
  p.rng_seed = command_seed(cfg.seed, "dnf", "profile");
  const NoiseProfile profile = estimate_noise_profile(m, train, p, cfg.min_samples);
  TrainConfig tc = cfg.train_config;
  tc.seed = command_seed(cfg.seed, "dnf", "train");
  const TrainResult r = dnf_train(m, train, profile, tc);

  const NoiseSource eval(command_seed(cfg.seed, "dnf", "eval"));
  const MetricReport fp_before = evaluate_reference(m, test);
  const MetricReport fp_after = evaluate_reference(r.model, test);
  const MetricReport before = relative_to(evaluate(m, test, p, eval), fp_before);
  const MetricReport after = relative_to(evaluate(r.model, test, p, eval), fp_before);

  save_profile(profile, out / "profile.json");
  save_model(r.model, out / "model_dnf.json");
  ojson j;
  j["command"] = "dnf";
  j["seed"] = cfg.seed;
  j["photocore"] = photocore_json(p);
  j["eval_noise_seed"] = eval.seed();
  j["train"] = {{"learning_rate", tc.learning_rate}, {"epochs", tc.epochs},
                {"batch_size", tc.batch_size},       {"clip_norm", tc.clip_norm},
                {"frozen_layers", tc.frozen_layers}, {"seed", tc.seed},
                {"epoch_loss", r.epoch_loss}};
  j["before"] = {{"simulated", metrics_json(before)}, {"fp32", metrics_json(fp_before)}};
  j["after"] = {{"simulated", metrics_json(after)}, {"fp32", metrics_json(fp_after)}};
  j["profile_warnings"] = profile.warnings();
  write_json(out / "report.json", j);
}

bool is_usage_error(const std::exception &e) {
  return dynamic_cast<const ConfigError *>(&e) != nullptr ||
         dynamic_cast<const FormatError *>(&e) != nullptr ||
         dynamic_cast<const fs::filesystem_error *>(&e) != nullptr;
}

} // namespace

void run_command(const std::string &command, const RunConfig &cfg,
                 const std::filesystem::path &out) {
  cfg.validate(command);
  fs::create_directories(out);
  if (command == "simulate") {
    cmd_simulate(cfg, out);
  } else if (command == "sweep") {
    cmd_sweep(cfg, out);
  } else if (command == "sensitivity") {
    cmd_sensitivity(cfg, out);
  } else if (command == "ablation") {
    cmd_ablation(cfg, out);
  } else if (command == "rangeutil") {
    cmd_rangeutil(cfg, out);
  } else if (command == "energy") {
    cmd_energy(cfg, out);
  } else if (command == "genfixture") {
    cmd_genfixture(cfg, out);
  } else if (command == "dnf") {
    cmd_dnf(cfg, out);
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
}

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Photo-core inference simulator", "photocore-sim"};
  std::string command;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  app.add_option("command", command, "Command to run")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(std::begin(kCommands), std::end(kCommands))));
  app.add_option("--config", config, "TOML configuration file")->required();
  app.add_option("--seed", seed, "Top-level seed (overrides the config)");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (const char *env = std::getenv("PHOTOCORE_SIM_THREADS"); env != nullptr && *env) {
      int threads = 0;
      const std::string s(env);
      const auto r = std::from_chars(s.data(), s.data() + s.size(), threads);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size() || threads < 1) {
        throw ConfigError("PHOTOCORE_SIM_THREADS must be a positive integer, got '" + s + "'");
      }
      omp_set_num_threads(threads);
    }
    RunConfig cfg = load_config(config);
    if (seed) {
      cfg.seed = *seed;
    }
    run_command(command, cfg, out_dir);
    out << command << ": wrote " << fs::path(out_dir).string() << '\n';
    return 0;
  } catch (const std::exception &e) {
    err << "photocore-sim " << command << ": " << e.what() << '\n';
    return is_usage_error(e) ? 2 : 1;
  }
}

} // namespace pcsim::cli
