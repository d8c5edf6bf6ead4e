#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "geocast/dp.hpp"
#include "geocast/geometry.hpp"
#include "geocast/random.hpp"

namespace geocast {

/// Historical periods h_1..h_n plus the current (real-time) point set.
struct PeriodizedDataset {
  std::vector<std::vector<Point>> historical;
  std::vector<Point> realtime;
  Rect bounds;
};

struct Level1Grid {
  int m1 = 1;
  Rect bounds;

  Rect cell_rect(int row, int col) const;
  // Half-open membership: boundary points go to the higher cell, domain max
  // edge closed. Every in-bounds point maps to exactly one cell.
  int row_of(double y) const;
  int col_of(double x) const;
  int index_of(Point p) const { return row_of(p.y) * m1 + col_of(p.x); }
  int n_cells() const { return m1 * m1; }
};

/// Coordinate boundary i of m equal divisions of [lo, hi]; exact at both ends.
double grid_boundary(double lo, double hi, int m, int i);

/// m1 = max(10, ceil(0.25 * sqrt(N' * eps / k1))), N' clamped at 0.
int level1_granularity(double noisy_total, double epsilon, double k1 = 10.0);

/// m2 = max(1, ceil(sqrt(n_sim * eps_prime / k2))), n_sim clamped at 0.
int level2_granularity(double n_sim, double epsilon_prime, double k2 = 1.4142135623730951);

/// OLS of count on period index, evaluated one step past the series,
/// clamped at 0. Throws std::invalid_argument when fewer than 2 periods.
double fit_cell_trend(std::span<const double> period_counts);

struct DistributionPrediction {
  std::vector<double> probabilities;      // simplex over level-1 cells
  std::vector<double> predicted_counts;   // clamped per-cell trend values
  bool uniform_fallback = false;          // all predictions were zero
};

DistributionPrediction predict_distribution(const PeriodizedDataset& dataset,
                                            const Level1Grid& grid);

/// Multinomial draw of n_points over cells.
std::vector<long long> sample_simulated_counts(const std::vector<double>& probabilities,
                                               long long n_points, RandomStream& rng);

/// Average error rate: mean(|P_i - A_i|) / mean(A_i).
/// Throws std::invalid_argument on size mismatch or all-zero actuals.
double prediction_error_rate(std::span<const double> predicted,
                             std::span<const double> actual);

/// Leaf address: level-1 cell (r1, c1), level-2 cell (r2, c2) within it.
struct LeafRef {
  int r1 = 0;
  int c1 = 0;
  int r2 = 0;
  int c2 = 0;
  friend bool operator==(const LeafRef&, const LeafRef&) = default;
};

/// Published spatial decomposition: two-level grid with noisy leaf counts.
/// Structure and counts are immutable after build; refresh returns a copy.
class Psd {
 public:
  Psd(int m1, Rect bounds, std::vector<int> m2, std::vector<double> counts,
      std::string scheme, double epsilon, double beta);

  int m1() const { return grid_.m1; }
  const Rect& bounds() const { return grid_.bounds; }
  const Level1Grid& level1() const { return grid_; }
  const std::string& scheme() const { return scheme_; }
  double epsilon() const { return epsilon_; }
  double beta() const { return beta_; }
  uint64_t seed() const { return seed_; }
  int snapshot_id() const { return snapshot_id_; }
  void set_provenance(uint64_t seed, int snapshot_id) {
    seed_ = seed;
    snapshot_id_ = snapshot_id;
  }

  int m2(int r1, int c1) const { return m2_[r1 * grid_.m1 + c1]; }
  const std::vector<int>& m2_grid() const { return m2_; }
  size_t n_leaves() const { return counts_.size(); }
  const std::vector<double>& counts() const { return counts_; }

  size_t flat_index(const LeafRef& leaf) const;
  LeafRef leaf_at(size_t flat) const;
  Rect cell_rect(int r1, int c1) const { return grid_.cell_rect(r1, c1); }
  Rect leaf_rect(const LeafRef& leaf) const;
  double leaf_count(const LeafRef& leaf) const { return counts_[flat_index(leaf)]; }

  LeafRef covering_leaf(Point p) const;
  /// Edge-adjacent leaves (4-connectivity), integer-exact across level-1
  /// cell boundaries with differing m2.
  std::vector<LeafRef> neighbors(const LeafRef& leaf) const;
  /// Leaves whose rect overlaps q with positive area.
  std::vector<LeafRef> leaves_in_rect(const Rect& q) const;

  double min_leaf_area() const { return min_leaf_area_; }
  double max_leaf_area() const { return max_leaf_area_; }
  double min_leaf_width() const { return min_leaf_width_; }
  double min_leaf_half_diagonal() const { return min_leaf_half_diagonal_; }

 private:
  friend Psd refresh_realtime_counts(const Psd&, const std::vector<Point>&,
                                     const PrivacyBudget&, BudgetLedger&,
                                     RandomStream&, bool);
  Level1Grid grid_;
  std::vector<int> m2_;
  std::vector<size_t> offsets_;  // flat count offset per level-1 cell
  std::vector<double> counts_;
  std::string scheme_;
  double epsilon_ = 0.0;
  double beta_ = 0.0;
  uint64_t seed_ = 0;
  int snapshot_id_ = 0;
  double min_leaf_area_ = 0.0, max_leaf_area_ = 0.0;
  double min_leaf_width_ = 0.0, min_leaf_half_diagonal_ = 0.0;
};

struct PsdBuildOptions {
  bool noise = true;
  // Compatibility mode: leaf scale 1/eps instead of 1/((1-beta)eps). The
  // mechanism then consumes (1+beta)*eps; the caller's ledger must allow it.
  bool literal_leaf_scale = false;
  double k1 = 10.0;
  double k2 = 1.4142135623730951;
  double eps_prime_factor = 0.5;
  double gdy_c = 10.0;
};

/// Learned partition: granularities from predicted-and-simulated data, leaf
/// counts from the real-time set. Consumes exactly beta*eps + (1-beta)*eps.
Psd build_psd_rht(const PeriodizedDataset& dataset, const PrivacyBudget& budget,
                  BudgetLedger& ledger, RandomStream& rng,
                  const PsdBuildOptions& opts = {});

struct GgrSplits {
  double beta0 = 0.04;  // total count
  double beta1 = 0.48;  // level-1 cell counts
  double beta2 = 0.48;  // leaf counts
};

/// Adaptive grid built from the real-time data alone, three-way budget split.
Psd build_psd_ggr(const std::vector<Point>& realtime, const Rect& bounds,
                  double epsilon, const GgrSplits& splits, BudgetLedger& ledger,
                  RandomStream& rng, const PsdBuildOptions& opts = {});

/// Uniform m x m grid, m = max(10, ceil(sqrt(N' * eps / c))), modeled as a
/// PSD with all m2 = 1.
Psd build_psd_gdy(const std::vector<Point>& realtime, const Rect& bounds,
                  const PrivacyBudget& budget, BudgetLedger& ledger,
                  RandomStream& rng, const PsdBuildOptions& opts = {});

/// Keeps the grids, re-bins the real-time points, publishes fresh noisy leaf
/// counts at scale 1/((1-beta)eps) on the given (fresh) ledger.
Psd refresh_realtime_counts(const Psd& psd, const std::vector<Point>& realtime,
                            const PrivacyBudget& budget, BudgetLedger& ledger,
                            RandomStream& rng, bool noise = true);

std::string serialize_psd(const Psd& psd);
/// Inverse of serialize_psd; round-trips bit-exactly. Throws
/// std::runtime_error with a line number on malformed input.
Psd parse_psd(const std::string& text);

}  // namespace geocast
