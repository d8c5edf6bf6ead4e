#pragma once

#include "geocast/config.hpp"
#include "geocast/psd.hpp"
#include "geocast/random.hpp"

namespace geocast {

struct GaussianCluster {
  Point center;
  double sigma = 1.0;
  double weight = 1.0;
  double weight_drift = 0.0;  // additive per period, renormalized
};

struct SynthSpec {
  long long points_per_period = 5000;
  int n_periods = 20;  // historical; one extra real-time period is generated
  Rect bounds;
  std::vector<GaussianCluster> clusters;
};

SynthSpec parse_synth_spec(const KvConfig& cfg);

/// Drifting Gaussian mixture, truncated to bounds by resampling. Period p
/// weights are max(0, weight + drift*p), renormalized.
PeriodizedDataset synth_generate(const SynthSpec& spec, RandomStream& rng);

}  // namespace geocast
