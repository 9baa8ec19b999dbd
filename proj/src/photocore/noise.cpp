// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/noise.hpp"

#include <cmath>
#include <initializer_list>
#include <numbers>

namespace pcsim {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, const char *purpose) {
  // FNV-1a over the label, folded into the parent seed
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const char *p = purpose; *p; ++p) {
    h = (h ^ static_cast<unsigned char>(*p)) * 0x100000001B3ull;
  }
  return mix64(parent ^ mix64(h));
}

double NoiseSource::normal(const NoiseKey &key) const {
  std::uint64_t h = mix64(seed_);
  for (std::uint64_t v : {stream_, key.layer, key.gemm, key.tile_row, key.tile_col,
                          key.vector, key.element}) {
    h = mix64(h ^ v);
  }
  const std::uint64_t a = h;
  const std::uint64_t b = mix64(h ^ 0xD1B54A32D192ED03ull);
  // u1 in (0, 1], u2 in [0, 1)
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace pcsim
