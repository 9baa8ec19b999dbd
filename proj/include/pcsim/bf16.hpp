// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstdint>

namespace pcsim {

// bfloat16: 1 sign bit, 8 exponent bits, 7 stored mantissa bits. Values are
// carried around as float/double; these helpers only round and convert.

/// Round to the nearest bfloat16 value, ties to even. NaN stays NaN and values
/// beyond the largest finite bfloat16 round to infinity.
double bf16_round(double x);
float bf16_round(float x);

/// True when x survives bf16_round unchanged (NaN counts as representable).
bool is_bf16_exact(float x);

/// Top 16 bits of an already bf16-exact float.
std::uint16_t bf16_bits(float x);
float bf16_from_bits(std::uint16_t bits);

} // namespace pcsim
