// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstdint>

namespace pcsim {

/// Coordinates of one analog output sample.
struct NoiseKey {
  std::uint64_t layer = 0;
  std::uint64_t gemm = 0; // kn2row kernel offset, 0 for dense
  std::uint64_t tile_row = 0;
  std::uint64_t tile_col = 0;
  std::uint64_t vector = 0;
  std::uint64_t element = 0;
};

/// Counter-based Gaussian source: every draw is a pure function of
/// (seed, stream, key), so results do not depend on evaluation order or
/// thread count.
class NoiseSource {
public:
  explicit NoiseSource(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  /// Standard normal draw for `key`.
  double normal(const NoiseKey &key) const;

  /// Independent source for another stream (e.g. dataset sample index).
  NoiseSource for_stream(std::uint64_t stream) const { return NoiseSource(seed_, stream); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed derived from a parent seed and a purpose label.
std::uint64_t derive_seed(std::uint64_t parent, const char *purpose);

} // namespace pcsim
