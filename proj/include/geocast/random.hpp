#pragma once

#include <cstdint>

namespace geocast {

/// Counter-based generator (splitmix64). Streams are cheap to construct and
/// child streams are derived by key mixing, so independent substreams can be
/// addressed hierarchically (per partition, per cell, per leaf) without
/// sharing state. Same seed + same child path => same draws, regardless of
/// what other streams consumed.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : key_(mix(seed)), counter_(0) {}

  /// Independent substream addressed by id. Deterministic, order-free.
  RandomStream child(uint64_t id) const;

  uint64_t next_u64();

  /// Uniform on the open interval (0,1); never returns an endpoint.
  double uniform();
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller (one value per call, spare cached).
  double normal();

  /// Uniform integer in [0, n). Rejection sampled, unbiased. n must be > 0.
  uint64_t uniform_index(uint64_t n);

 private:
  RandomStream(uint64_t key, uint64_t counter) : key_(key), counter_(counter) {}
  static uint64_t mix(uint64_t x);

  uint64_t key_;
  uint64_t counter_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace geocast
