#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "geocast/gr.hpp"

namespace geocast {

struct NotifiedWorker {
  size_t index;     // position in the worker array
  double distance;  // to the task
  double ar;
};

/// Real workers whose covering leaf belongs to the region, in index order.
/// Membership is half-open per covering_leaf, so each worker counts once.
std::vector<NotifiedWorker> workers_in_region(const Psd& psd, const GeocastRegion& gr,
                                              std::span<const Point> workers,
                                              const Task& task);

size_t anw(const Psd& psd, const GeocastRegion& gr, std::span<const Point> workers);

/// 1 - prod(1 - ar_i) over the notified workers. Deterministic ground truth.
double true_success_probability(std::span<const NotifiedWorker> notified);

struct AssignmentOutcome {
  bool success = false;
  std::optional<double> wtd;            // nearest accepter's distance
  std::optional<size_t> worker_index;
};

/// Monte-Carlo assignment: per trial each notified worker accepts
/// independently with probability ar; the nearest accepter is assigned.
std::vector<AssignmentOutcome> simulate_assignment(
    std::span<const NotifiedWorker> notified, int trials, RandomStream& rng);

/// Region diameter over comm_range (100 m WiFi by default).
/// Throws std::invalid_argument on an empty region.
double hop(const Psd& psd, const GeocastRegion& gr, double comm_range = 100.0);

/// Digital compactness: total cell area over the minimum enclosing circle's.
/// Throws std::invalid_argument on an empty region.
double dcm(const Psd& psd, const GeocastRegion& gr);

struct TaskRow {
  int task_id = 0;
  int snapshot_id = 0;
  double asr = 0.0;
  double wtd = 0.0;  // mean over this row's successful trials; NaN if none
  double hop = 0.0;
  double anw = 0.0;
  double dcm = 0.0;
  double cell = 0.0;
  std::string termination;
  // not written to CSV; feeds the success-weighted aggregate WTD
  long long wtd_successes = 0;
};

struct MetricsReport {
  std::string scheme;
  double epsilon = 0.0;
  double eu = 0.0;
  double mar = 0.0;
  uint64_t seed = 0;
  std::vector<TaskRow> rows;  // sorted by (snapshot_id, task_id)
  double asr = 0.0;
  double wtd_mean = 0.0;  // over all successful trials
  double hop_mean = 0.0;
  double anw_mean = 0.0;
  double dcm_mean = 0.0;
  double cell_mean = 0.0;
  bool eu_compliant = false;  // asr >= eu
};

MetricsReport aggregate(std::string scheme, double epsilon, double eu, double mar,
                        uint64_t seed, std::vector<TaskRow> rows);

/// Fixed column order: scheme,epsilon,eu,mar,task_id,snapshot_id,asr,wtd,
/// hop,anw,dcm,cell,termination. One row per (task, snapshot) plus a final
/// aggregate row with task_id = snapshot_id = -1.
void write_metrics_csv(std::ostream& os, const MetricsReport& report);

void write_metrics_header(std::ostream& os);
void write_aggregate_row(std::ostream& os, const MetricsReport& report);

}  // namespace geocast
