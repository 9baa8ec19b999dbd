// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcsim/costmodel.hpp"
#include "pcsim/dnf.hpp"
#include "pcsim/photocore.hpp"

namespace pcsim::cli {

inline constexpr const char *kCommands[] = {"simulate", "sweep",  "sensitivity", "ablation",
                                            "rangeutil", "energy", "genfixture",  "dnf"};

struct SweepSettings {
  std::vector<std::size_t> n{16, 32, 64, 128, 256, 512};
  std::vector<double> gain{1.0};
  std::size_t seeds = 1;
};

/// Everything a command may read. Paths are absolute after parsing (relative
/// ones resolve against the config file's directory).
struct RunConfig {
  std::filesystem::path model;
  std::filesystem::path dataset;
  std::filesystem::path train; // dnf only
  std::uint64_t seed = 0;
  std::size_t batch = 4;

  PhotocoreConfig photocore;
  CostParams cost = CostParams::calibrated();
  SweepSettings sweep;

  std::optional<std::size_t> ablation_layer;
  std::vector<std::size_t> range_layers; // empty: every eligible layer

  std::string fixture_kind = "uniform";

  TrainConfig train_config;
  std::size_t min_samples = 10000;

  /// Checks grids, training options and that the paths `command` reads exist.
  /// Throws ConfigError (missing files name the path).
  void validate(const std::string &command) const;
};

/// Parses a TOML document. Unknown keys and wrong value types are errors.
RunConfig parse_config(const std::string &text, const std::filesystem::path &base_dir);
RunConfig load_config(const std::filesystem::path &path);

/// Noise, shuffling and other streams of one command, derived from the
/// top-level seed and a "<command>/<purpose>" label.
std::uint64_t command_seed(std::uint64_t seed, const std::string &command,
                           const std::string &purpose);

/// Shortest decimal that parses back to the same double.
std::string format_number(double v);

/// Runs one command, writing its files under `out`. Throws on failure.
void run_command(const std::string &command, const RunConfig &cfg,
                 const std::filesystem::path &out);

/// Full command-line entry point. Returns the process exit code: 0 on
/// success, 2 for usage, configuration or file errors, 1 for anything else.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace pcsim::cli
