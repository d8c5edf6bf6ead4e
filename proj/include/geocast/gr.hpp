#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geocast/psd.hpp"

namespace geocast {

struct Task {
  Point location;
  double eu = 0.9;
  double mtd = 300.0;
  double mar = 0.1;
};

enum class Termination { kEuReached, kBreak, kExhausted };

std::string to_string(Termination t);

/// Contiguous cell set grown around the task's covering cell. noisy_utility
/// is the published-count estimate, not ground truth.
struct GeocastRegion {
  std::vector<LeafRef> cells;  // insertion order, covering cell first
  double noisy_utility = 0.0;
  std::optional<double> r_loc;
  Termination termination = Termination::kExhausted;
};

/// Affine [lo,hi] -> [a,b], clamped to [a,b] outside the domain.
struct AffineClampedMap {
  double lo = 0.0, hi = 1.0;
  double a = 1.0, b = 10.0;
  double operator()(double v) const;
};

struct ScoreMaps {
  AffineClampedMap f_area;      // leaf area -> [a,b]
  AffineClampedMap f_distance;  // corner-mean distance -> [a,b]
  static ScoreMaps for_psd(const Psd& psd, double mtd, double a = 1.0, double b = 10.0);
};

/// Linear acceptance probability: (1 - d/mtd) * mar, zero from d >= mtd on.
double acceptance_rate(double d, double mtd, double mar);

/// 1 - (1 - ar)^count with a real-valued exponent.
double cell_utility(double noisy_count, double ar);

/// 1 - (1-u)(1-u_c); commutative, associative, identity 0.
double combine_utility(double u, double u_c);

/// count / (f_area(area) * f_distance(corner-mean distance to the task)).
double cell_score(double noisy_count, const Rect& cell, const Task& task,
                  const ScoreMaps& maps);

/// Radius of the local maximum geocast region: grows a disc from the covering
/// cell until the count-weighted utility estimate reaches EU, stepping by
/// half the smallest leaf width; capped at MTD + half the covering cell's
/// diagonal. Throws std::domain_error if the task lies outside the PSD.
double find_lgr(const Psd& psd, const Task& task);

struct GrOptions {
  double lgr_fraction = 1.0;
  bool use_lgr = true;
  bool use_break = true;
  // Candidate constraint shape: the MTD square by default, disc optionally.
  bool mtd_disc = false;
};

/// Score-greedy growth with the LGR restriction and the Break cutoff.
GeocastRegion build_gr_rht(const Psd& psd, const Task& task, const ScoreMaps& maps,
                           const GrOptions& opts = {});

struct HybridParams {
  double alpha = 0.3;
  double epsilon = 0.5;
};

/// Utility-greedy growth (no LGR, no Break, MTD square kept). With hybrid
/// params, selection maximizes (1-eps)*u*(1-alpha) + eps*compactness*alpha
/// where compactness is the DCM of the region extended by the candidate.
GeocastRegion build_gr_greedy_utility(const Psd& psd, const Task& task,
                                      const std::optional<HybridParams>& hybrid = {});

struct WorkerSelection {
  std::vector<size_t> worker_indices;  // sorted by distance, nearest first
  double utility = 0.0;
  bool reached_eu = false;
};

/// Non-private reference: nearest workers within MTD, added until the exact
/// combined utility reaches EU or the pool runs out.
WorkerSelection build_gr_nonprivate(std::span<const Point> workers, const Task& task);

struct WorkerHistory {
  Point worker;
  std::vector<Point> contributions;
};

/// Mean distance from the worker to their historical contributions.
/// Throws std::invalid_argument on empty history.
double mcd(const WorkerHistory& history);
double mtd_from_mcd(double mcd_value);

std::string serialize_gr(const GeocastRegion& gr, int task_id);

}  // namespace geocast
