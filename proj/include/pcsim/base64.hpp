// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pcsim {

std::string base64_encode(std::span<const unsigned char> bytes);
/// Throws FormatError on characters outside the standard alphabet.
std::vector<unsigned char> base64_decode(std::string_view text);

} // namespace pcsim
