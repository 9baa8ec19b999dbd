// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include <cmath>

#include "pcsim/error.hpp"
#include "pcsim/photocore.hpp"

namespace pcsim {

const char *to_string(Bypass b) {
  switch (b) {
  case Bypass::none:
    return "none";
  case Bypass::input_q:
    return "input_q";
  case Bypass::weight_q:
    return "weight_q";
  case Bypass::output_q:
    return "output_q";
  case Bypass::all:
    return "all";
  }
  return "?";
}

Bypass parse_bypass(const std::string &s) {
  for (auto b : {Bypass::none, Bypass::input_q, Bypass::weight_q, Bypass::output_q,
                 Bypass::all}) {
    if (s == to_string(b)) {
      return b;
    }
  }
  throw ConfigError("unknown bypass setting '" + s + "'");
}

const char *to_string(ScaleMode m) {
  return m == ScaleMode::abfp ? "abfp" : "per_tensor";
}

ScaleMode parse_scale_mode(const std::string &s) {
  if (s == "abfp") {
    return ScaleMode::abfp;
  }
  if (s == "per_tensor") {
    return ScaleMode::per_tensor;
  }
  throw ConfigError("unknown scale mode '" + s + "'");
}

void PhotocoreConfig::validate() const {
  if (n < 1) {
    throw ConfigError("tile size n must be >= 1");
  }
  for (int b : {bits_x, bits_w, bits_y}) {
    if (b < 2 || b > 31) {
      throw ConfigError("bit-widths must lie in [2, 31]");
    }
  }
  if (!(gain > 0.0) || !std::isfinite(gain)) {
    throw ConfigError("gain must be a positive finite number");
  }
  if (noise_sigma && !(*noise_sigma >= 0.0 && std::isfinite(*noise_sigma))) {
    throw ConfigError("noise sigma must be finite and >= 0");
  }
  // |Y^q| <= n * delta_x * delta_w must stay exact in the integer product.
  const double bound = static_cast<double>(n) *
                       static_cast<double>(input_params().delta) *
                       static_cast<double>(weight_params().delta);
  if (bound > 2147483648.0) {
    throw ConfigError("n * delta_x * delta_w exceeds 2^31; reduce n or bit-widths");
  }
}

double PhotocoreConfig::adc_step_counts() const {
  return static_cast<double>(n) * static_cast<double>(input_params().delta) *
         static_cast<double>(weight_params().delta) /
         static_cast<double>(output_params().delta);
}

double PhotocoreConfig::sigma() const {
  return noise_sigma ? *noise_sigma : 0.05 * adc_step_counts();
}

double PhotocoreConfig::output_sigma(double sw, double sx) const {
  return sigma() * sw * sx /
         (static_cast<double>(input_params().delta) * static_cast<double>(weight_params().delta) *
          gain);
}

} // namespace pcsim
