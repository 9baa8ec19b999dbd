// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "toml.hpp"

#include "pcsim/cli.hpp"
#include "pcsim/error.hpp"
#include "pcsim/fixtures.hpp"
#include "pcsim/noise.hpp"

namespace pcsim::cli {

namespace {

namespace fs = std::filesystem;

std::string where(const toml::node &n) {
  std::ostringstream os;
  os << n.source().begin;
  return os.str();
}

// Rejects keys outside `allowed` so that typos do not silently fall back to
// defaults.
void check_keys(const toml::table &t, const std::string &section,
                const std::set<std::string> &allowed) {
  for (const auto &[k, v] : t) {
    if (!allowed.contains(std::string(k.str()))) {
      throw ConfigError("unknown key '" + (section.empty() ? "" : section + ".") +
                        std::string(k.str()) + "' at " + where(v));
    }
  }
}

const toml::table *section(const toml::table &root, const char *name) {
  const toml::node *n = root.get(name);
  if (n == nullptr) {
    return nullptr;
  }
  if (!n->is_table()) {
    throw ConfigError(std::string("'") + name + "' must be a table");
  }
  return n->as_table();
}

std::string key_name(const std::string &sec, const char *key) {
  return sec.empty() ? key : sec + "." + key;
}

double get_double(const toml::table &t, const std::string &sec, const char *key, double def) {
  const toml::node *n = t.get(key);
  if (n == nullptr) {
    return def;
  }
  if (auto v = n->value_exact<double>()) {
    return *v;
  }
  if (auto v = n->value_exact<std::int64_t>()) {
    return static_cast<double>(*v);
  }
  throw ConfigError("'" + key_name(sec, key) + "' must be a number (" + where(*n) + ")");
}

std::int64_t get_int(const toml::table &t, const std::string &sec, const char *key,
                     std::int64_t def) {
  const toml::node *n = t.get(key);
  if (n == nullptr) {
    return def;
  }
  if (auto v = n->value_exact<std::int64_t>()) {
    return *v;
  }
  throw ConfigError("'" + key_name(sec, key) + "' must be an integer (" + where(*n) + ")");
}

std::size_t get_count(const toml::table &t, const std::string &sec, const char *key,
                      std::size_t def) {
  const std::int64_t v = get_int(t, sec, key, static_cast<std::int64_t>(def));
  if (v < 0) {
    throw ConfigError("'" + key_name(sec, key) + "' must not be negative");
  }
  return static_cast<std::size_t>(v);
}

std::optional<std::string> get_string(const toml::table &t, const std::string &sec,
                                      const char *key) {
  const toml::node *n = t.get(key);
  if (n == nullptr) {
    return std::nullopt;
  }
  if (auto v = n->value_exact<std::string>()) {
    return *v;
  }
  throw ConfigError("'" + key_name(sec, key) + "' must be a string (" + where(*n) + ")");
}

const toml::array *get_array(const toml::table &t, const std::string &sec, const char *key) {
  const toml::node *n = t.get(key);
  if (n == nullptr) {
    return nullptr;
  }
  if (!n->is_array()) {
    throw ConfigError("'" + key_name(sec, key) + "' must be an array (" + where(*n) + ")");
  }
  return n->as_array();
}

std::vector<std::size_t> get_counts(const toml::table &t, const std::string &sec,
                                    const char *key, std::vector<std::size_t> def) {
  const toml::array *a = get_array(t, sec, key);
  if (a == nullptr) {
    return def;
  }
  std::vector<std::size_t> out;
  for (const toml::node &n : *a) {
    auto v = n.value_exact<std::int64_t>();
    if (!v || *v < 0) {
      throw ConfigError("'" + key_name(sec, key) + "' must hold non-negative integers (" +
                        where(n) + ")");
    }
    out.push_back(static_cast<std::size_t>(*v));
  }
  return out;
}

std::vector<double> get_numbers(const toml::table &t, const std::string &sec, const char *key,
                                std::vector<double> def) {
  const toml::array *a = get_array(t, sec, key);
  if (a == nullptr) {
    return def;
  }
  std::vector<double> out;
  for (const toml::node &n : *a) {
    if (auto d = n.value_exact<double>()) {
      out.push_back(*d);
    } else if (auto i = n.value_exact<std::int64_t>()) {
      out.push_back(static_cast<double>(*i));
    } else {
      throw ConfigError("'" + key_name(sec, key) + "' must hold numbers (" + where(n) + ")");
    }
  }
  return out;
}

fs::path resolve(const fs::path &base, const std::string &p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

void require_file(const fs::path &p, const char *what) {
  if (p.empty()) {
    throw ConfigError(std::string("config does not name a ") + what);
  }
  if (!fs::exists(p)) {
    throw ConfigError(std::string(what) + " not found: " + p.string());
  }
}

} // namespace

RunConfig parse_config(const std::string &text, const std::filesystem::path &base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error &e) {
    std::ostringstream os;
    os << "config is not valid TOML: " << e.description() << " at " << e.source().begin;
    throw ConfigError(os.str());
  }
  check_keys(root, "",
             {"model", "dataset", "train", "seed", "batch", "photocore", "cost", "sweep",
              "ablation", "rangeutil", "genfixture", "dnf"});

  RunConfig c;
  const fs::path base = fs::absolute(base_dir);
  if (auto v = get_string(root, "", "model")) {
    c.model = resolve(base, *v);
  }
  if (auto v = get_string(root, "", "dataset")) {
    c.dataset = resolve(base, *v);
  }
  if (auto v = get_string(root, "", "train")) {
    c.train = resolve(base, *v);
  }
  const std::int64_t seed = get_int(root, "", "seed", 0);
  if (seed < 0) {
    throw ConfigError("'seed' must not be negative");
  }
  c.seed = static_cast<std::uint64_t>(seed);
  c.batch = get_count(root, "", "batch", c.batch);

  if (const toml::table *t = section(root, "photocore")) {
    check_keys(*t, "photocore",
               {"n", "bits_x", "bits_w", "bits_y", "gain", "noise_sigma", "bypass",
                "scale_mode"});
    PhotocoreConfig &p = c.photocore;
    p.n = get_count(*t, "photocore", "n", p.n);
    p.bits_x = static_cast<int>(get_int(*t, "photocore", "bits_x", p.bits_x));
    p.bits_w = static_cast<int>(get_int(*t, "photocore", "bits_w", p.bits_w));
    p.bits_y = static_cast<int>(get_int(*t, "photocore", "bits_y", p.bits_y));
    p.gain = get_double(*t, "photocore", "gain", p.gain);
    if (t->contains("noise_sigma")) {
      p.noise_sigma = get_double(*t, "photocore", "noise_sigma", 0.0);
    }
    if (auto v = get_string(*t, "photocore", "bypass")) {
      p.bypass = parse_bypass(*v);
    }
    if (auto v = get_string(*t, "photocore", "scale_mode")) {
      p.scale_mode = parse_scale_mode(*v);
    }
  }

  if (const toml::table *t = section(root, "cost")) {
    check_keys(*t, "cost",
               {"alpha", "beta", "ratio_a", "n_a", "ratio_b", "n_b", "calibration_gain",
                "t_mvp", "t_weight_send", "t_weight_load"});
    const bool explicit_ab = t->contains("alpha") || t->contains("beta");
    if (explicit_ab && (!t->contains("alpha") || !t->contains("beta"))) {
      throw ConfigError("'cost.alpha' and 'cost.beta' must be given together");
    }
    if (explicit_ab && (t->contains("ratio_a") || t->contains("ratio_b"))) {
      throw ConfigError("give either cost.alpha/beta or the calibration ratios, not both");
    }
    if (explicit_ab) {
      c.cost.alpha = get_double(*t, "cost", "alpha", 0);
      c.cost.beta = get_double(*t, "cost", "beta", 0);
    } else {
      c.cost = CostParams::calibrated(
          get_double(*t, "cost", "ratio_a", 1.4), get_count(*t, "cost", "n_a", 64),
          get_double(*t, "cost", "ratio_b", 1.9), get_count(*t, "cost", "n_b", 128),
          get_double(*t, "cost", "calibration_gain", 2.0));
    }
    c.cost.t_mvp = get_double(*t, "cost", "t_mvp", c.cost.t_mvp);
    c.cost.t_weight_send = get_double(*t, "cost", "t_weight_send", c.cost.t_weight_send);
    c.cost.t_weight_load = get_double(*t, "cost", "t_weight_load", c.cost.t_weight_load);
  }

  if (const toml::table *t = section(root, "sweep")) {
    check_keys(*t, "sweep", {"n", "gain", "seeds"});
    c.sweep.n = get_counts(*t, "sweep", "n", c.sweep.n);
    c.sweep.gain = get_numbers(*t, "sweep", "gain", c.sweep.gain);
    c.sweep.seeds = get_count(*t, "sweep", "seeds", c.sweep.seeds);
  }

  if (const toml::table *t = section(root, "ablation")) {
    check_keys(*t, "ablation", {"layer"});
    if (t->contains("layer")) {
      c.ablation_layer = get_count(*t, "ablation", "layer", 0);
    }
  }

  if (const toml::table *t = section(root, "rangeutil")) {
    check_keys(*t, "rangeutil", {"layers"});
    c.range_layers = get_counts(*t, "rangeutil", "layers", {});
  }

  if (const toml::table *t = section(root, "genfixture")) {
    check_keys(*t, "genfixture", {"kind"});
    c.fixture_kind = get_string(*t, "genfixture", "kind").value_or(c.fixture_kind);
  }

  if (const toml::table *t = section(root, "dnf")) {
    check_keys(*t, "dnf",
               {"learning_rate", "epochs", "batch_size", "clip_norm", "frozen_layers",
                "min_samples"});
    TrainConfig &tc = c.train_config;
    tc.learning_rate = get_double(*t, "dnf", "learning_rate", tc.learning_rate);
    tc.epochs = get_count(*t, "dnf", "epochs", tc.epochs);
    tc.batch_size = get_count(*t, "dnf", "batch_size", tc.batch_size);
    tc.clip_norm = get_double(*t, "dnf", "clip_norm", tc.clip_norm);
    tc.frozen_layers = get_counts(*t, "dnf", "frozen_layers", {});
    c.min_samples = get_count(*t, "dnf", "min_samples", c.min_samples);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw ConfigError("config file not found: " + path.string());
  }
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), fs::absolute(path).parent_path());
}

void RunConfig::validate(const std::string &command) const {
  photocore.validate();
  cost.validate();
  if (batch == 0) {
    throw ConfigError("'batch' must be at least 1");
  }
  if (command == "genfixture") {
    fixtures::parse_kind(fixture_kind);
    return;
  }
  require_file(model, "model file");
  if (command == "simulate" || command == "sensitivity" || command == "ablation" ||
      command == "rangeutil" || command == "dnf") {
    require_file(dataset, "dataset directory");
  }
  if (command == "sweep" || command == "energy") {
    if (sweep.n.empty() || sweep.gain.empty()) {
      throw ConfigError("sweep grids 'sweep.n' and 'sweep.gain' must not be empty");
    }
    if (sweep.seeds == 0) {
      throw ConfigError("'sweep.seeds' must be at least 1");
    }
    for (double g : sweep.gain) {
      if (!(g > 0) || !std::isfinite(g)) {
        throw ConfigError("sweep gains must be positive");
      }
    }
    for (std::size_t n : sweep.n) {
      if (n == 0) {
        throw ConfigError("sweep tile sizes must be positive");
      }
    }
  }
  if (command == "sweep") {
    require_file(dataset, "dataset directory");
  }
  if (command == "dnf") {
    require_file(train, "training dataset directory");
    train_config.validate();
  }
}

std::uint64_t command_seed(std::uint64_t seed, const std::string &command,
                           const std::string &purpose) {
  return derive_seed(seed, (command + "/" + purpose).c_str());
}

std::string format_number(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

} // namespace pcsim::cli
