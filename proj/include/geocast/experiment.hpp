#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "geocast/config.hpp"
#include "geocast/metrics.hpp"
#include "geocast/psd.hpp"

namespace geocast {

enum class Scheme { kRht, kGgr, kGgrHybrid, kGdy, kNonprivate };

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme scheme);

struct ExperimentConfig {
  Scheme scheme = Scheme::kRht;
  double epsilon = 0.5;
  double eu = 0.9;
  double mar = 0.1;
  double mtd = 300.0;
  double lgr_fraction = 1.0;
  bool use_lgr = true;
  bool use_break = true;
  bool mtd_disc = false;
  int n_tasks = 2000;
  // R-HT snapshot protocol: independent partitions x noise refreshes.
  int n_partitions = 10;
  int n_noise_draws = 20;
  // Baseline protocol: independent full rebuilds.
  int n_rebuilds = 50;
  int trials = 100;
  uint64_t seed = 0;
  double score_lo = 1.0;
  double score_hi = 10.0;
  bool noise = true;
  double beta = 0.04;
  GgrSplits ggr_splits{};
  double hybrid_alpha = 0.3;
  bool wtd_mean_notified = false;  // expected-distance-over-notified reading
  int threads = 1;
  double gdy_c = 10.0;
  std::string dataset_path;
};

ExperimentConfig parse_experiment_config(const KvConfig& cfg);

struct StageTiming {
  std::string stage;        // "A" build, "A2" refresh, "B" GR construction
  std::vector<double> ms;   // one sample per operation
  double mean() const;
  double p95() const;
};

struct TimingSummary {
  std::string scheme;
  std::vector<StageTiming> stages;
};

struct ExperimentResult {
  MetricsReport report;
  TimingSummary timing;
};

/// Uniform sample of task locations from the worker pool, without
/// replacement (with replacement when n exceeds the pool size).
/// Throws std::invalid_argument on an empty pool.
std::vector<Point> sample_tasks(std::span<const Point> pool, int n, RandomStream& rng);

/// Full snapshot protocol: builds PSD snapshots per the scheme, evaluates
/// every task against every snapshot, gathers metrics rows in deterministic
/// (snapshot, task) order and per-stage wall-clock samples.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const PeriodizedDataset& dataset);

/// Columns: scheme,stage,mean_ms,p95_ms.
void write_timing_csv(std::ostream& os, const TimingSummary& timing);

}  // namespace geocast
