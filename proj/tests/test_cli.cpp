// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"

#include "pcsim/cli.hpp"
#include "pcsim/dnf.hpp"
#include "pcsim/error.hpp"
#include "pcsim/model.hpp"
#include "pcsim/noise.hpp"

using namespace pcsim;
using namespace pcsim::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kScratchRoot =
    fs::temp_directory_path() / ("pcsim_cli_" + std::to_string(::getpid()));

// Removes the scratch tree when the test binary exits.
const struct ScratchCleanup {
  ~ScratchCleanup() {
    std::error_code ec;
    fs::remove_all(kScratchRoot, ec);
  }
} scratch_cleanup;

fs::path scratch(const std::string &name) {
  const fs::path p = kScratchRoot / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write(const fs::path &p, const std::string &text) {
  std::ofstream(p, std::ios::binary) << text;
}

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "photocore-sim");
  std::vector<const char *> argv;
  for (const auto &a : args) {
    argv.push_back(a.c_str());
  }
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string first_line(const fs::path &p) {
  const std::string s = slurp(p);
  return s.substr(0, s.find('\n'));
}

std::vector<std::vector<std::string>> csv_rows(const fs::path &p) {
  std::istringstream is(slurp(p));
  std::string line;
  std::getline(is, line); // header
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      cells.push_back(cell);
    }
    rows.push_back(cells);
  }
  return rows;
}

// Every regular file below `dir`, relative path -> bytes.
std::map<std::string, std::string> tree(const fs::path &dir) {
  std::map<std::string, std::string> out;
  for (const auto &e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
  }
  return out;
}

// Generates a fixture with the CLI itself and returns its directory.
fs::path make_fixture(const std::string &kind, std::uint64_t seed) {
  const fs::path dir = scratch("fixture_" + kind + "_" + std::to_string(seed));
  write(dir / "gen.toml", "[genfixture]\nkind = \"" + kind + "\"\n");
  const Run r = invoke({"genfixture", "--config", (dir / "gen.toml").string(), "--seed",
                     std::to_string(seed), "--out", (dir / "fx").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  return dir / "fx";
}

} // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults") {
    const RunConfig c = parse_config("", "/base");
    CHECK(c.seed == 0);
    CHECK(c.batch == 4);
    CHECK(c.photocore.n == 64);
    CHECK(c.photocore.bits_y == 11);
    CHECK(!c.photocore.noise_sigma);
    CHECK(c.cost.beta == doctest::Approx(20.25));
    CHECK(c.sweep.n == std::vector<std::size_t>{16, 32, 64, 128, 256, 512});
    CHECK(!c.ablation_layer);
  }
  SUBCASE("full document") {
    const RunConfig c = parse_config(R"(
model = "m/model.json"
dataset = "/abs/test"
train = "../train"
seed = 12
batch = 2

[photocore]
n = 16
bits_x = 8
gain = 2
noise_sigma = 0.5
bypass = "output_q"
scale_mode = "per_tensor"

[cost]
alpha = 1.05
beta = 3
t_mvp = 2e-9

[sweep]
n = [8, 4]
gain = [1, 2.5]
seeds = 3

[ablation]
layer = 3

[rangeutil]
layers = [0, 3]

[genfixture]
kind = "saturating"

[dnf]
learning_rate = 0.002
epochs = 7
batch_size = 4
clip_norm = 0
frozen_layers = [3]
min_samples = 500
)",
                                     "/base/dir");
    CHECK(c.model == fs::path("/base/dir/m/model.json"));
    CHECK(c.dataset == fs::path("/abs/test"));
    CHECK(c.train == fs::path("/base/train"));
    CHECK(c.seed == 12);
    CHECK(c.batch == 2);
    CHECK(c.photocore.n == 16);
    CHECK(c.photocore.bits_x == 8);
    CHECK(c.photocore.gain == 2.0);
    CHECK(*c.photocore.noise_sigma == 0.5);
    CHECK(c.photocore.bypass == Bypass::output_q);
    CHECK(c.photocore.scale_mode == ScaleMode::per_tensor);
    CHECK(c.cost.alpha == 1.05);
    CHECK(c.cost.beta == 3.0);
    CHECK(c.cost.t_mvp == 2e-9);
    CHECK(c.sweep.n == std::vector<std::size_t>{8, 4});
    CHECK(c.sweep.gain == std::vector<double>{1.0, 2.5});
    CHECK(c.sweep.seeds == 3);
    CHECK(*c.ablation_layer == 3);
    CHECK(c.range_layers == std::vector<std::size_t>{0, 3});
    CHECK(c.fixture_kind == "saturating");
    CHECK(c.train_config.learning_rate == 0.002);
    CHECK(c.train_config.epochs == 7);
    CHECK(c.train_config.batch_size == 4);
    CHECK(c.train_config.clip_norm == 0.0);
    CHECK(c.train_config.frozen_layers == std::vector<std::size_t>{3});
    CHECK(c.min_samples == 500);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parse_config("modle = \"x\"", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("[photocore]\ngian = 2", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("[photocore]\nn = \"64\"", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("[photocore]\nn = 6.5", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("[photocore]\nbypass = \"sometimes\"", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("seed = -1", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("[cost]\nalpha = 1.1", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("[sweep]\nn = [1, \"2\"]", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("photocore = 3", "."), ConfigError);
    CHECK_THROWS_AS(parse_config("a = = 1", "."), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), ConfigError);
  }
}

TEST_CASE("numbers print as the shortest round-trip decimal") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(-2.5) == "-2.5");
  CHECK(format_number(1e-300) == "1e-300");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(double(rng() >> 11), int(rng() % 200) - 120);
    const std::string s = format_number(v);
    double back = 0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    CHECK(back == v);
  }
}

TEST_CASE("command seeds are derived from the command and purpose") {
  CHECK(command_seed(7, "simulate", "noise") == derive_seed(7, "simulate/noise"));
  CHECK(command_seed(7, "simulate", "noise") != command_seed(7, "sweep", "noise"));
  CHECK(command_seed(7, "dnf", "train") != command_seed(7, "dnf", "eval"));
  CHECK(command_seed(7, "dnf", "train") != command_seed(8, "dnf", "train"));
}

TEST_CASE("exit codes and diagnostics") {
  const fs::path dir = scratch("exit");
  write(dir / "missing.toml", "model = \"nowhere/model.json\"\ndataset = \"test\"\n");
  const Run missing = invoke({"simulate", "--config", (dir / "missing.toml").string(), "--out",
                           (dir / "o").string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find((dir / "nowhere" / "model.json").string()) != std::string::npos);

  CHECK(invoke({"simulate"}).code == 2);
  CHECK(invoke({"frobnicate", "--config", (dir / "missing.toml").string()}).code == 2);
  CHECK(invoke({"simulate", "--config", (dir / "absent.toml").string()}).code == 2);
  CHECK(invoke({"--help"}).code == 0);

  write(dir / "bad.toml", "[photocore]\nn = 0\n");
  CHECK(invoke({"energy", "--config", (dir / "bad.toml").string()}).code == 2);

  const fs::path fx = make_fixture("uniform", 0);
  ::setenv("PHOTOCORE_SIM_THREADS", "zero", 1);
  CHECK(invoke({"energy", "--config", (fx / "config.toml").string(), "--out",
             (dir / "o").string()})
            .code == 2);
  ::unsetenv("PHOTOCORE_SIM_THREADS");
}

TEST_CASE("genfixture output") {
  const fs::path a = make_fixture("outlier-layer", 3);
  const fs::path b = make_fixture("outlier-layer", 3);
  CHECK(tree(a) == tree(b));
  CHECK(fs::exists(a / "model.json"));
  CHECK(fs::exists(a / "train" / "img_0000.pcten"));
  CHECK(fs::exists(a / "test" / "lbl_0000.pcten"));
  const auto meta = nlohmann::json::parse(slurp(a / "fixture.json"));
  CHECK(meta["kind"] == "outlier-layer");
  CHECK(meta["seed"] == 3);
  CHECK(tree(make_fixture("outlier-layer", 4)) != tree(a));

  const fs::path dir = scratch("genbad");
  write(dir / "g.toml", "[genfixture]\nkind = \"spiral\"\n");
  CHECK(invoke({"genfixture", "--config", (dir / "g.toml").string(), "--out",
             (dir / "o").string()})
            .code == 2);
}

TEST_CASE("command outputs have pinned schemas") {
  const fs::path fx = make_fixture("outlier-layer", 0);
  const fs::path out = scratch("outputs");
  const std::string cfg = (fx / "config.toml").string();
  for (const char *c : {"simulate", "sweep", "sensitivity", "ablation", "rangeutil", "energy"}) {
    const Run r = invoke({c, "--config", cfg, "--out", (out / c).string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  CHECK(first_line(out / "sweep" / "sweep.csv") ==
        "n,gain,miou,pixel_acc,energy_rel,throughput_ips,utilization");
  CHECK(first_line(out / "sensitivity" / "sensitivity.csv") ==
        "layer_index,layer_kind,miou_fp32,miou_quantized,miou_drop");
  CHECK(first_line(out / "ablation" / "ablation.csv") ==
        "setting,pixel_acc_pct_fp32,miou_pct_fp32");
  CHECK(first_line(out / "energy" / "energy.csv") ==
        "n,gain,time_rel,power_rel,energy_rel,utilization");
  CHECK(first_line(out / "rangeutil" / "rangeutil.csv") ==
        "layer_index,max_abs,mean,std,three_sigma_level_fraction");

  const ModelGraph m = load_model(fx / "model.json");
  const auto sens = csv_rows(out / "sensitivity" / "sensitivity.csv");
  REQUIRE(sens.size() == m.eligible_layers().size());
  for (std::size_t i = 0; i < sens.size(); ++i) {
    CHECK(sens[i][0] == std::to_string(m.eligible_layers()[i]));
  }

  const auto abl = csv_rows(out / "ablation" / "ablation.csv");
  REQUIRE(abl.size() == 4);
  CHECK(abl[0][0] == "all");
  CHECK(abl[1][0] == "no_input_q");
  CHECK(abl[2][0] == "no_weight_q");
  CHECK(abl[3][0] == "no_output_q");

  const auto sweep = csv_rows(out / "sweep" / "sweep.csv");
  CHECK(sweep.size() == 6);
  const auto hist = csv_rows(out / "rangeutil" / "rangeutil_histogram.csv");
  CHECK(hist.size() == 2047);
  CHECK(hist.front()[1] == "-1023");
  CHECK(hist.back()[1] == "1023");

  const auto rep = nlohmann::json::parse(slurp(out / "simulate" / "report.json"));
  CHECK(rep["fp32"]["miou"] == 1.0);
  CHECK(rep["metrics"]["miou"].get<double>() < 1.0);
  CHECK(fs::exists(out / "simulate" / "masks" / "pred_0031.pcten"));
  CHECK(mask_from_tensor(load_tensor(out / "simulate" / "masks" / "pred_0000.pcten")).size() ==
        256);
}

TEST_CASE("simulate with every quantizer bypassed reproduces float32") {
  const fs::path fx = make_fixture("uniform", 2);
  const fs::path dir = scratch("bypass");
  write(dir / "c.toml", "model = \"" + (fx / "model.json").string() + "\"\ndataset = \"" +
                            (fx / "test").string() +
                            "\"\n[photocore]\nbypass = \"all\"\nnoise_sigma = 0\n");
  REQUIRE(invoke({"simulate", "--config", (dir / "c.toml").string(), "--out",
               (dir / "o").string()})
              .code == 0);
  const auto rep = nlohmann::json::parse(slurp(dir / "o" / "report.json"));
  CHECK(rep["metrics"]["miou"].get<double>() ==
        doctest::Approx(rep["fp32"]["miou"].get<double>()).epsilon(1e-3));
}

TEST_CASE("energy command on the conv workload") {
  const fs::path fx = make_fixture("cnn-workload", 0);
  const fs::path dir = scratch("energy");
  write(dir / "c.toml", "model = \"" + (fx / "model.json").string() +
                            "\"\n[sweep]\nn = [512, 16, 32, 64, 128, 256]\ngain = [2, 1]\n");
  REQUIRE(invoke({"energy", "--config", (dir / "c.toml").string(), "--out", (dir / "o").string()})
              .code == 0);
  const auto rows = csv_rows(dir / "o" / "energy.csv");
  REQUIRE(rows.size() == 12);
  // sorted by (n, gain)
  CHECK(rows[0][0] == "16");
  CHECK(rows[0][1] == "1");
  CHECK(rows[1][1] == "2");
  CHECK(rows[11][0] == "512");
  auto num = [](const std::string &s) {
    double v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
  };
  std::vector<double> e;
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    e.push_back(num(rows[i][4]));
  }
  const auto best = std::min_element(e.begin(), e.end()) - e.begin();
  CHECK(best > 0);
  CHECK(best < static_cast<long>(e.size()) - 1);
  // n = 64 rows are 4 and 5
  CHECK(num(rows[5][4]) / num(rows[4][4]) == doctest::Approx(1.4).epsilon(0.01));
  CHECK(num(rows[4][4]) == 1.0);
}

TEST_CASE("commands are deterministic and independent of the thread count") {
  const fs::path fx = make_fixture("outlier-layer", 1);
  const fs::path dir = scratch("determinism");
  const std::string cfg = (fx / "config.toml").string();
  for (const char *c : {"simulate", "sweep", "sensitivity", "ablation", "rangeutil", "energy",
                        "genfixture", "dnf"}) {
    CAPTURE(c);
    std::vector<std::map<std::string, std::string>> runs;
    for (const char *threads : {"", "1", "3"}) {
      if (*threads) {
        ::setenv("PHOTOCORE_SIM_THREADS", threads, 1);
      }
      const fs::path o = dir / (std::string(c) + "_" + threads);
      const Run r = invoke({c, "--config", cfg, "--seed", "5", "--out", o.string()});
      ::unsetenv("PHOTOCORE_SIM_THREADS");
      REQUIRE_MESSAGE(r.code == 0, r.err);
      runs.push_back(tree(o));
      if (std::string(c) == "dnf") {
        break; // one extra run suffices for the slowest command
      }
    }
    if (runs.size() == 1) {
      const fs::path o = dir / (std::string(c) + "_again");
      REQUIRE(invoke({c, "--config", cfg, "--seed", "5", "--out", o.string()}).code == 0);
      runs.push_back(tree(o));
    }
    REQUIRE(!runs[0].empty());
    for (std::size_t i = 1; i < runs.size(); ++i) {
      CHECK(runs[i] == runs[0]);
    }
  }
}

TEST_CASE("dnf command") {
  const fs::path fx = make_fixture("outlier-layer", 0);
  const fs::path out = scratch("dnf");
  const Run r = invoke({"dnf", "--config", (fx / "config.toml").string(), "--out", out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const NoiseProfile p = load_profile(out / "profile.json");
  CHECK(p.layers.size() == load_model(fx / "model.json").eligible_layers().size());
  const auto rep = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(rep["after"]["simulated"]["miou"].get<double>() >
        rep["before"]["simulated"]["miou"].get<double>());
  CHECK(rep["train"]["frozen_layers"] == nlohmann::json::array({3}));
  const ModelGraph tuned = load_model(out / "model_dnf.json");
  CHECK(tuned.layers[3].weight.values() == load_model(fx / "model.json").layers[3].weight.values());
}
