#include "geocast/psd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "geocast/textio.hpp"

namespace geocast {

double grid_boundary(double lo, double hi, int m, int i) {
  if (i == m) return hi;
  return lo + (hi - lo) * i / m;
}

namespace {

int clamped_index(double v, double lo, double hi, int m) {
  int i = static_cast<int>(std::floor((v - lo) / (hi - lo) * m));
  return std::clamp(i, 0, m - 1);
}

}  // namespace

Rect Level1Grid::cell_rect(int row, int col) const {
  return {grid_boundary(bounds.min_x, bounds.max_x, m1, col),
          grid_boundary(bounds.min_y, bounds.max_y, m1, row),
          grid_boundary(bounds.min_x, bounds.max_x, m1, col + 1),
          grid_boundary(bounds.min_y, bounds.max_y, m1, row + 1)};
}

int Level1Grid::row_of(double y) const {
  return clamped_index(y, bounds.min_y, bounds.max_y, m1);
}

int Level1Grid::col_of(double x) const {
  return clamped_index(x, bounds.min_x, bounds.max_x, m1);
}

int level1_granularity(double noisy_total, double epsilon, double k1) {
  double n = std::max(0.0, noisy_total);
  int m = static_cast<int>(std::ceil(0.25 * std::sqrt(n * epsilon / k1)));
  return std::max(10, m);
}

int level2_granularity(double n_sim, double epsilon_prime, double k2) {
  double n = std::max(0.0, n_sim);
  int m = static_cast<int>(std::ceil(std::sqrt(n * epsilon_prime / k2)));
  return std::max(1, m);
}

double fit_cell_trend(std::span<const double> period_counts) {
  size_t n = period_counts.size();
  if (n < 2)
    throw std::invalid_argument("fit_cell_trend: need at least 2 periods");
  double mean_x = 0.5 * (n + 1);  // indices 1..n
  double mean_y = 0.0;
  for (double y : period_counts) mean_y += y;
  mean_y /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double dx = static_cast<double>(i + 1) - mean_x;
    sxy += dx * (period_counts[i] - mean_y);
    sxx += dx * dx;
  }
  double slope = sxy / sxx;
  double predicted = mean_y + slope * (static_cast<double>(n + 1) - mean_x);
  return std::max(0.0, predicted);
}

DistributionPrediction predict_distribution(const PeriodizedDataset& dataset,
                                            const Level1Grid& grid) {
  size_t n_periods = dataset.historical.size();
  if (n_periods < 2)
    throw std::invalid_argument("predict_distribution: need at least 2 historical periods");
  size_t n_cells = static_cast<size_t>(grid.n_cells());
  // period-major layout so one pass per period suffices
  std::vector<double> counts(n_periods * n_cells, 0.0);
  for (size_t p = 0; p < n_periods; ++p)
    for (Point pt : dataset.historical[p])
      counts[p * n_cells + static_cast<size_t>(grid.index_of(pt))] += 1.0;

  DistributionPrediction out;
  out.predicted_counts.resize(n_cells);
  std::vector<double> series(n_periods);
  double total = 0.0;
  for (size_t c = 0; c < n_cells; ++c) {
    for (size_t p = 0; p < n_periods; ++p) series[p] = counts[p * n_cells + c];
    out.predicted_counts[c] = fit_cell_trend(series);
    total += out.predicted_counts[c];
  }
  out.probabilities.resize(n_cells);
  if (total <= 0.0) {
    out.uniform_fallback = true;
    std::fill(out.probabilities.begin(), out.probabilities.end(),
              1.0 / static_cast<double>(n_cells));
  } else {
    for (size_t c = 0; c < n_cells; ++c)
      out.probabilities[c] = out.predicted_counts[c] / total;
  }
  return out;
}

std::vector<long long> sample_simulated_counts(const std::vector<double>& probabilities,
                                               long long n_points, RandomStream& rng) {
  std::vector<long long> counts(probabilities.size(), 0);
  if (n_points <= 0 || probabilities.empty()) return counts;
  std::vector<double> cum(probabilities.size());
  std::partial_sum(probabilities.begin(), probabilities.end(), cum.begin());
  double total = cum.back();
  if (total <= 0.0)
    throw std::invalid_argument("sample_simulated_counts: zero-mass distribution");
  for (long long i = 0; i < n_points; ++i) {
    double u = rng.uniform() * total;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    ++counts[static_cast<size_t>(it - cum.begin())];
  }
  return counts;
}

double prediction_error_rate(std::span<const double> predicted,
                             std::span<const double> actual) {
  if (predicted.size() != actual.size())
    throw std::invalid_argument("prediction_error_rate: size mismatch");
  double abs_err = 0.0, actual_sum = 0.0;
  for (size_t i = 0; i < actual.size(); ++i) {
    abs_err += std::abs(predicted[i] - actual[i]);
    actual_sum += actual[i];
  }
  if (actual_sum <= 0.0)
    throw std::invalid_argument("prediction_error_rate: all-zero actual counts");
  return abs_err / actual_sum;
}

Psd::Psd(int m1, Rect bounds, std::vector<int> m2, std::vector<double> counts,
         std::string scheme, double epsilon, double beta)
    : grid_{m1, bounds},
      m2_(std::move(m2)),
      counts_(std::move(counts)),
      scheme_(std::move(scheme)),
      epsilon_(epsilon),
      beta_(beta) {
  if (m1 < 1) throw std::invalid_argument("Psd: m1 must be positive");
  if (bounds.width() <= 0.0 || bounds.height() <= 0.0)
    throw std::invalid_argument("Psd: degenerate bounds");
  if (m2_.size() != static_cast<size_t>(m1) * m1)
    throw std::invalid_argument("Psd: m2 grid size mismatch");
  offsets_.resize(m2_.size() + 1, 0);
  for (size_t i = 0; i < m2_.size(); ++i) {
    if (m2_[i] < 1) throw std::invalid_argument("Psd: m2 must be positive");
    offsets_[i + 1] = offsets_[i] + static_cast<size_t>(m2_[i]) * m2_[i];
  }
  if (counts_.size() != offsets_.back())
    throw std::invalid_argument("Psd: leaf count vector size mismatch");
  for (double c : counts_)
    if (c < 0.0) throw std::invalid_argument("Psd: negative published count");

  double cw = bounds.width() / m1, ch = bounds.height() / m1;
  int min_m2 = *std::min_element(m2_.begin(), m2_.end());
  int max_m2 = *std::max_element(m2_.begin(), m2_.end());
  min_leaf_area_ = (cw / max_m2) * (ch / max_m2);
  max_leaf_area_ = (cw / min_m2) * (ch / min_m2);
  min_leaf_width_ = std::min(cw, ch) / max_m2;
  min_leaf_half_diagonal_ = 0.5 * std::hypot(cw / max_m2, ch / max_m2);
}

size_t Psd::flat_index(const LeafRef& leaf) const {
  int cell = leaf.r1 * grid_.m1 + leaf.c1;
  int m2 = m2_[cell];
  return offsets_[cell] + static_cast<size_t>(leaf.r2) * m2 + leaf.c2;
}

LeafRef Psd::leaf_at(size_t flat) const {
  auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
  int cell = static_cast<int>(it - offsets_.begin()) - 1;
  size_t rem = flat - offsets_[cell];
  int m2 = m2_[cell];
  return {cell / grid_.m1, cell % grid_.m1, static_cast<int>(rem) / m2,
          static_cast<int>(rem) % m2};
}

Rect Psd::leaf_rect(const LeafRef& leaf) const {
  Rect cell = grid_.cell_rect(leaf.r1, leaf.c1);
  int m2 = m2_[leaf.r1 * grid_.m1 + leaf.c1];
  return {grid_boundary(cell.min_x, cell.max_x, m2, leaf.c2),
          grid_boundary(cell.min_y, cell.max_y, m2, leaf.r2),
          grid_boundary(cell.min_x, cell.max_x, m2, leaf.c2 + 1),
          grid_boundary(cell.min_y, cell.max_y, m2, leaf.r2 + 1)};
}

LeafRef Psd::covering_leaf(Point p) const {
  int r1 = grid_.row_of(p.y);
  int c1 = grid_.col_of(p.x);
  Rect cell = grid_.cell_rect(r1, c1);
  int m2 = m2_[r1 * grid_.m1 + c1];
  int r2 = clamped_index(p.y, cell.min_y, cell.max_y, m2);
  int c2 = clamped_index(p.x, cell.min_x, cell.max_x, m2);
  return {r1, c1, r2, c2};
}

namespace {

// Level-2 rows/cols j of the neighbor cell (granularity mn) whose span
// overlaps level-2 index i of this cell (granularity m), integer-exact:
// j*m < (i+1)*mn  and  (j+1)*m > i*mn.
void cross_cell_range(int i, int m, int mn, int& j_lo, int& j_hi) {
  j_lo = (i * mn) / m;
  j_hi = ((i + 1) * mn - 1) / m;
}

}  // namespace

std::vector<LeafRef> Psd::neighbors(const LeafRef& leaf) const {
  std::vector<LeafRef> out;
  int m1 = grid_.m1;
  int m2 = m2_[leaf.r1 * m1 + leaf.c1];
  // within the same level-1 cell
  if (leaf.c2 > 0) out.push_back({leaf.r1, leaf.c1, leaf.r2, leaf.c2 - 1});
  if (leaf.c2 + 1 < m2) out.push_back({leaf.r1, leaf.c1, leaf.r2, leaf.c2 + 1});
  if (leaf.r2 > 0) out.push_back({leaf.r1, leaf.c1, leaf.r2 - 1, leaf.c2});
  if (leaf.r2 + 1 < m2) out.push_back({leaf.r1, leaf.c1, leaf.r2 + 1, leaf.c2});
  // across level-1 boundaries
  int j_lo, j_hi;
  if (leaf.c2 == 0 && leaf.c1 > 0) {
    int mn = m2_[leaf.r1 * m1 + leaf.c1 - 1];
    cross_cell_range(leaf.r2, m2, mn, j_lo, j_hi);
    for (int j = j_lo; j <= j_hi; ++j)
      out.push_back({leaf.r1, leaf.c1 - 1, j, mn - 1});
  }
  if (leaf.c2 + 1 == m2 && leaf.c1 + 1 < m1) {
    int mn = m2_[leaf.r1 * m1 + leaf.c1 + 1];
    cross_cell_range(leaf.r2, m2, mn, j_lo, j_hi);
    for (int j = j_lo; j <= j_hi; ++j)
      out.push_back({leaf.r1, leaf.c1 + 1, j, 0});
  }
  if (leaf.r2 == 0 && leaf.r1 > 0) {
    int mn = m2_[(leaf.r1 - 1) * m1 + leaf.c1];
    cross_cell_range(leaf.c2, m2, mn, j_lo, j_hi);
    for (int j = j_lo; j <= j_hi; ++j)
      out.push_back({leaf.r1 - 1, leaf.c1, mn - 1, j});
  }
  if (leaf.r2 + 1 == m2 && leaf.r1 + 1 < m1) {
    int mn = m2_[(leaf.r1 + 1) * m1 + leaf.c1];
    cross_cell_range(leaf.c2, m2, mn, j_lo, j_hi);
    for (int j = j_lo; j <= j_hi; ++j)
      out.push_back({leaf.r1 + 1, leaf.c1, 0, j});
  }
  return out;
}

std::vector<LeafRef> Psd::leaves_in_rect(const Rect& q) const {
  std::vector<LeafRef> out;
  if (!rects_overlap(q, grid_.bounds)) return out;
  int m1 = grid_.m1;
  int c_lo = grid_.col_of(q.min_x), c_hi = grid_.col_of(q.max_x);
  int r_lo = grid_.row_of(q.min_y), r_hi = grid_.row_of(q.max_y);
  for (int r1 = r_lo; r1 <= r_hi; ++r1) {
    for (int c1 = c_lo; c1 <= c_hi; ++c1) {
      Rect cell = grid_.cell_rect(r1, c1);
      if (!rects_overlap(q, cell)) continue;
      int m2 = m2_[r1 * m1 + c1];
      int lc_lo = clamped_index(std::max(q.min_x, cell.min_x), cell.min_x, cell.max_x, m2);
      int lc_hi = clamped_index(std::min(q.max_x, cell.max_x), cell.min_x, cell.max_x, m2);
      int lr_lo = clamped_index(std::max(q.min_y, cell.min_y), cell.min_y, cell.max_y, m2);
      int lr_hi = clamped_index(std::min(q.max_y, cell.max_y), cell.min_y, cell.max_y, m2);
      for (int r2 = lr_lo; r2 <= lr_hi; ++r2)
        for (int c2 = lc_lo; c2 <= lc_hi; ++c2) {
          LeafRef leaf{r1, c1, r2, c2};
          if (rects_overlap(leaf_rect(leaf), q)) out.push_back(leaf);
        }
    }
  }
  return out;
}

namespace {

// Per-leaf noise stream ids within a build stream.
constexpr uint64_t kStreamTotal = 0;
constexpr uint64_t kStreamSimulation = 1;
constexpr uint64_t kStreamLeaves = 2;

// Same result as clamped_index for every input: truncation agrees with floor
// at nonnegative values, and the clamp sends all negatives to 0 either way.
// Dropping the libm floor call roughly halves the per-point binning cost.
inline int clamped_index_trunc(double v, double lo, double hi, int m) {
  int i = static_cast<int>((v - lo) / (hi - lo) * m);
  return std::clamp(i, 0, m - 1);
}

std::vector<double> bin_to_leaves(const std::vector<Point>& points, const Level1Grid& grid,
                                  const std::vector<int>& m2,
                                  const std::vector<size_t>& offsets) {
  // Cell rects are loop-invariant; hoisting them out of the point loop keeps
  // the boundary arithmetic identical while dropping four divisions per point.
  struct CellGeom {
    Rect rect;
    int m;
    size_t offset;
  };
  std::vector<CellGeom> geom(m2.size());
  for (int r1 = 0; r1 < grid.m1; ++r1)
    for (int c1 = 0; c1 < grid.m1; ++c1) {
      int cell = r1 * grid.m1 + c1;
      geom[cell] = {grid.cell_rect(r1, c1), m2[cell], offsets[cell]};
    }
  // Pass 1 resolves level-1 cells against fixed bounds (vectorizes well).
  size_t n = points.size();
  std::vector<int> cell_of(n);
  const Rect& b = grid.bounds;
  for (size_t i = 0; i < n; ++i) {
    int r1 = clamped_index_trunc(points[i].y, b.min_y, b.max_y, grid.m1);
    int c1 = clamped_index_trunc(points[i].x, b.min_x, b.max_x, grid.m1);
    cell_of[i] = r1 * grid.m1 + c1;
  }
  // Counting sort by cell, so pass 2 runs each cell with loop-invariant
  // geometry and increments confined to that cell's leaf block. Leaf counts
  // are order-free sums of 1.0, so the reordering changes nothing.
  std::vector<size_t> start(m2.size() + 1, 0);
  for (size_t i = 0; i < n; ++i) ++start[cell_of[i] + 1];
  for (size_t c = 0; c < m2.size(); ++c) start[c + 1] += start[c];
  std::vector<Point> sorted(n);
  {
    std::vector<size_t> cursor(start.begin(), start.end() - 1);
    for (size_t i = 0; i < n; ++i) sorted[cursor[cell_of[i]]++] = points[i];
  }
  std::vector<double> counts(offsets.back(), 0.0);
  for (size_t cell = 0; cell < m2.size(); ++cell) {
    const CellGeom& g = geom[cell];
    double* block = counts.data() + g.offset;
    for (size_t k = start[cell]; k < start[cell + 1]; ++k) {
      int r2 = clamped_index_trunc(sorted[k].y, g.rect.min_y, g.rect.max_y, g.m);
      int c2 = clamped_index_trunc(sorted[k].x, g.rect.min_x, g.rect.max_x, g.m);
      block[static_cast<size_t>(r2) * g.m + c2] += 1.0;
    }
  }
  return counts;
}

std::vector<size_t> cell_offsets(const std::vector<int>& m2) {
  std::vector<size_t> offsets(m2.size() + 1, 0);
  for (size_t i = 0; i < m2.size(); ++i)
    offsets[i + 1] = offsets[i] + static_cast<size_t>(m2[i]) * m2[i];
  return offsets;
}

// Adds Laplace noise per leaf and clamps at zero. One ledger charge per
// level-1 cell, all in one parallel group (disjoint regions).
void publish_leaf_counts(std::vector<double>& counts, const std::vector<int>& m2,
                         const std::vector<size_t>& offsets, double leaf_epsilon,
                         const char* label, BudgetLedger& ledger, RandomStream& rng,
                         bool noise) {
  double scale = laplace_scale(1.0, leaf_epsilon);
  RandomStream leaves = rng.child(kStreamLeaves);
  for (size_t cell = 0; cell < m2.size(); ++cell) {
    ledger.charge({label, leaf_epsilon, 0});
    if (!noise) continue;
    RandomStream cell_stream = leaves.child(cell);
    size_t n = static_cast<size_t>(m2[cell]) * m2[cell];
    double* block = counts.data() + offsets[cell];
    for (size_t i = 0; i < n; ++i) {
      RandomStream s = cell_stream.child(i);
      block[i] = std::max(0.0, block[i] + laplace_from_uniform(scale, s.uniform()));
    }
  }
  if (!noise)
    for (double& c : counts) c = std::max(0.0, c);
}

}  // namespace

Psd build_psd_rht(const PeriodizedDataset& dataset, const PrivacyBudget& budget,
                  BudgetLedger& ledger, RandomStream& rng, const PsdBuildOptions& opts) {
  double eps = budget.epsilon_total;
  double beta = budget.beta;
  if (eps <= 0.0) throw std::invalid_argument("build_psd_rht: epsilon must be positive");
  if (beta <= 0.0 || beta >= 1.0)
    throw std::invalid_argument("build_psd_rht: beta must lie in (0,1)");

  RandomStream total_stream = rng.child(kStreamTotal);
  double noisy_total =
      noisy_value(static_cast<double>(dataset.realtime.size()), 1.0,
                  {"total_count", beta * eps, std::nullopt}, ledger, total_stream,
                  opts.noise);

  Level1Grid grid{level1_granularity(noisy_total, eps, opts.k1), dataset.bounds};
  DistributionPrediction pred = predict_distribution(dataset, grid);
  RandomStream sim_stream = rng.child(kStreamSimulation);
  std::vector<long long> sim = sample_simulated_counts(
      pred.probabilities, std::llround(std::max(0.0, noisy_total)), sim_stream);

  std::vector<int> m2(sim.size());
  for (size_t i = 0; i < sim.size(); ++i)
    m2[i] = level2_granularity(static_cast<double>(sim[i]),
                               opts.eps_prime_factor * eps, opts.k2);

  std::vector<size_t> offsets = cell_offsets(m2);
  std::vector<double> counts = bin_to_leaves(dataset.realtime, grid, m2, offsets);
  double leaf_eps = opts.literal_leaf_scale ? eps : (1.0 - beta) * eps;
  publish_leaf_counts(counts, m2, offsets, leaf_eps, "leaf_counts", ledger, rng,
                      opts.noise);
  return Psd(grid.m1, dataset.bounds, std::move(m2), std::move(counts), "rht", eps, beta);
}

Psd build_psd_ggr(const std::vector<Point>& realtime, const Rect& bounds, double epsilon,
                  const GgrSplits& splits, BudgetLedger& ledger, RandomStream& rng,
                  const PsdBuildOptions& opts) {
  if (epsilon <= 0.0) throw std::invalid_argument("build_psd_ggr: epsilon must be positive");
  if (std::abs(splits.beta0 + splits.beta1 + splits.beta2 - 1.0) > 1e-9)
    throw std::invalid_argument("build_psd_ggr: splits must sum to 1");

  RandomStream total_stream = rng.child(kStreamTotal);
  double noisy_total = noisy_value(static_cast<double>(realtime.size()), 1.0,
                                   {"total_count", splits.beta0 * epsilon, std::nullopt},
                                   ledger, total_stream, opts.noise);

  Level1Grid grid{level1_granularity(noisy_total, epsilon, opts.k1), bounds};
  std::vector<double> cell_counts(grid.n_cells(), 0.0);
  for (Point p : realtime) cell_counts[grid.index_of(p)] += 1.0;

  RandomStream cell_stream = rng.child(kStreamSimulation);
  std::vector<int> m2(cell_counts.size());
  for (size_t i = 0; i < cell_counts.size(); ++i) {
    RandomStream s = cell_stream.child(i);
    double noisy = noisy_value(cell_counts[i], 1.0,
                               {"cell_count", splits.beta1 * epsilon, 1}, ledger, s,
                               opts.noise);
    m2[i] = level2_granularity(std::max(0.0, noisy), opts.eps_prime_factor * epsilon,
                               opts.k2);
  }

  std::vector<size_t> offsets = cell_offsets(m2);
  std::vector<double> counts = bin_to_leaves(realtime, grid, m2, offsets);
  publish_leaf_counts(counts, m2, offsets, splits.beta2 * epsilon, "leaf_counts", ledger,
                      rng, opts.noise);
  return Psd(grid.m1, bounds, std::move(m2), std::move(counts), "ggr", epsilon,
             splits.beta0);
}

Psd build_psd_gdy(const std::vector<Point>& realtime, const Rect& bounds,
                  const PrivacyBudget& budget, BudgetLedger& ledger, RandomStream& rng,
                  const PsdBuildOptions& opts) {
  double eps = budget.epsilon_total;
  double beta = budget.beta;
  if (eps <= 0.0) throw std::invalid_argument("build_psd_gdy: epsilon must be positive");

  RandomStream total_stream = rng.child(kStreamTotal);
  double noisy_total =
      noisy_value(static_cast<double>(realtime.size()), 1.0,
                  {"total_count", beta * eps, std::nullopt}, ledger, total_stream,
                  opts.noise);

  double n = std::max(0.0, noisy_total);
  int m = std::max(10, static_cast<int>(std::ceil(std::sqrt(n * eps / opts.gdy_c))));
  Level1Grid grid{m, bounds};
  std::vector<int> m2(grid.n_cells(), 1);
  std::vector<size_t> offsets = cell_offsets(m2);
  std::vector<double> counts = bin_to_leaves(realtime, grid, m2, offsets);
  publish_leaf_counts(counts, m2, offsets, (1.0 - beta) * eps, "leaf_counts", ledger,
                      rng, opts.noise);
  return Psd(m, bounds, std::move(m2), std::move(counts), "gdy", eps, beta);
}

Psd refresh_realtime_counts(const Psd& psd, const std::vector<Point>& realtime,
                            const PrivacyBudget& budget, BudgetLedger& ledger,
                            RandomStream& rng, bool noise) {
  Psd out = psd;
  std::vector<size_t> offsets = cell_offsets(out.m2_);
  out.counts_ = bin_to_leaves(realtime, out.grid_, out.m2_, offsets);
  double leaf_eps = (1.0 - budget.beta) * budget.epsilon_total;
  publish_leaf_counts(out.counts_, out.m2_, offsets, leaf_eps, "leaf_counts_refresh",
                      ledger, rng, noise);
  return out;
}

std::string serialize_psd(const Psd& psd) {
  std::ostringstream os;
  os << "psd v1\n";
  os << "scheme " << psd.scheme() << "\n";
  os << "epsilon " << fmt_g17(psd.epsilon()) << "\n";
  os << "beta " << fmt_g17(psd.beta()) << "\n";
  os << "seed " << psd.seed() << "\n";
  os << "snapshot " << psd.snapshot_id() << "\n";
  os << "m1 " << psd.m1() << "\n";
  const Rect& b = psd.bounds();
  os << "bounds " << fmt_g17(b.min_x) << " " << fmt_g17(b.min_y) << " "
     << fmt_g17(b.max_x) << " " << fmt_g17(b.max_y) << "\n";
  os << "m2";
  for (int v : psd.m2_grid()) os << " " << v;
  os << "\n";
  for (size_t i = 0; i < psd.n_leaves(); ++i) {
    LeafRef leaf = psd.leaf_at(i);
    Rect r = psd.leaf_rect(leaf);
    os << "leaf " << leaf.r1 << " " << leaf.c1 << " " << leaf.r2 << " " << leaf.c2
       << " " << fmt_g17(r.min_x) << " " << fmt_g17(r.min_y) << " " << fmt_g17(r.max_x)
       << " " << fmt_g17(r.max_y) << " " << fmt_g17(psd.counts()[i]) << "\n";
  }
  os << "end\n";
  return os.str();
}

namespace {

[[noreturn]] void parse_fail(int line, const std::string& what) {
  throw std::runtime_error("psd parse: line " + std::to_string(line) + ": " + what);
}

}  // namespace

Psd parse_psd(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  auto next_line = [&](const char* expect_key) -> std::istringstream {
    if (!std::getline(is, line)) parse_fail(line_no + 1, "unexpected end of input");
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key != expect_key)
      parse_fail(line_no, "expected '" + std::string(expect_key) + "', got '" + key + "'");
    return ls;
  };

  if (!std::getline(is, line) || line != "psd v1") parse_fail(1, "bad header");
  ++line_no;
  std::string scheme;
  next_line("scheme") >> scheme;
  double epsilon, beta;
  next_line("epsilon") >> epsilon;
  next_line("beta") >> beta;
  uint64_t seed;
  next_line("seed") >> seed;
  int snapshot_id;
  next_line("snapshot") >> snapshot_id;
  int m1;
  next_line("m1") >> m1;
  if (m1 < 1) parse_fail(line_no, "m1 must be positive");
  Rect bounds;
  {
    auto ls = next_line("bounds");
    if (!(ls >> bounds.min_x >> bounds.min_y >> bounds.max_x >> bounds.max_y))
      parse_fail(line_no, "bad bounds");
  }
  std::vector<int> m2(static_cast<size_t>(m1) * m1);
  {
    auto ls = next_line("m2");
    for (int& v : m2)
      if (!(ls >> v)) parse_fail(line_no, "bad m2 grid");
  }
  std::vector<size_t> offsets(m2.size() + 1, 0);
  for (size_t i = 0; i < m2.size(); ++i) {
    if (m2[i] < 1) parse_fail(line_no, "m2 must be positive");
    offsets[i + 1] = offsets[i] + static_cast<size_t>(m2[i]) * m2[i];
  }
  std::vector<double> counts(offsets.back());
  std::vector<bool> seen(counts.size(), false);
  while (true) {
    if (!std::getline(is, line)) parse_fail(line_no + 1, "missing 'end'");
    ++line_no;
    if (line == "end") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key != "leaf") parse_fail(line_no, "expected 'leaf' or 'end'");
    LeafRef leaf;
    Rect r;
    double count;
    if (!(ls >> leaf.r1 >> leaf.c1 >> leaf.r2 >> leaf.c2 >> r.min_x >> r.min_y >>
          r.max_x >> r.max_y >> count))
      parse_fail(line_no, "bad leaf record");
    if (leaf.r1 < 0 || leaf.r1 >= m1 || leaf.c1 < 0 || leaf.c1 >= m1)
      parse_fail(line_no, "leaf level-1 index out of range");
    int cell_m2 = m2[static_cast<size_t>(leaf.r1) * m1 + leaf.c1];
    if (leaf.r2 < 0 || leaf.r2 >= cell_m2 || leaf.c2 < 0 || leaf.c2 >= cell_m2)
      parse_fail(line_no, "leaf level-2 index out of range");
    size_t flat = offsets[static_cast<size_t>(leaf.r1) * m1 + leaf.c1] +
                  static_cast<size_t>(leaf.r2) * cell_m2 + leaf.c2;
    if (seen[flat]) parse_fail(line_no, "duplicate leaf");
    seen[flat] = true;
    counts[flat] = count;
  }
  for (bool s : seen)
    if (!s) parse_fail(line_no, "missing leaf records");
  Psd psd(m1, bounds, std::move(m2), std::move(counts), scheme, epsilon, beta);
  psd.set_provenance(seed, snapshot_id);
  return psd;
}

}  // namespace geocast
