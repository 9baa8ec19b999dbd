// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/bf16.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace pcsim {

namespace {

// bf16 keeps 8 significant bits; the smallest normal is 2^-126 and subnormals
// share its quantum 2^-133.
constexpr int kSignificantBits = 8;
constexpr int kMinNormalExp = -125; // frexp exponent of 2^-126
const double kMaxFinite = std::ldexp(255.0, 120);

} // namespace

double bf16_round(double x) {
  if (std::isnan(x) || std::isinf(x) || x == 0.0) {
    return x;
  }
  int exp = 0;
  std::frexp(x, &exp);
  const int quantum_exp = std::max(exp, kMinNormalExp) - kSignificantBits;
  // nearbyint honours the default round-to-nearest-even mode
  const double scaled = std::nearbyint(std::ldexp(x, -quantum_exp));
  const double r = std::ldexp(scaled, quantum_exp);
  if (std::fabs(r) > kMaxFinite) {
    return std::copysign(std::numeric_limits<double>::infinity(), x);
  }
  if (r == 0.0) {
    return std::copysign(0.0, x);
  }
  return r;
}

float bf16_round(float x) {
  return static_cast<float>(bf16_round(static_cast<double>(x)));
}

bool is_bf16_exact(float x) {
  return std::isnan(x) || (std::bit_cast<std::uint32_t>(x) & 0xFFFFu) == 0;
}

std::uint16_t bf16_bits(float x) {
  return static_cast<std::uint16_t>(std::bit_cast<std::uint32_t>(x) >> 16);
}

float bf16_from_bits(std::uint16_t bits) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(bits) << 16);
}

} // namespace pcsim
