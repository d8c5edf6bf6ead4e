#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "geocast/psd.hpp"
#include "geocast/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

using namespace geocast;

namespace {

// Uniform points over bounds with a fixed stream, split into periods.
PeriodizedDataset uniform_dataset(int n_periods, int per_period, int n_realtime,
                                  Rect bounds, uint64_t seed) {
  RandomStream rng(seed);
  PeriodizedDataset ds;
  ds.bounds = bounds;
  for (int p = 0; p < n_periods; ++p) {
    std::vector<Point> pts;
    pts.reserve(per_period);
    for (int i = 0; i < per_period; ++i)
      pts.push_back(Point{rng.uniform(bounds.min_x, bounds.max_x),
                          rng.uniform(bounds.min_y, bounds.max_y)});
    ds.historical.push_back(std::move(pts));
  }
  for (int i = 0; i < n_realtime; ++i)
    ds.realtime.push_back(Point{rng.uniform(bounds.min_x, bounds.max_x),
                                rng.uniform(bounds.min_y, bounds.max_y)});
  return ds;
}

std::vector<double> bin_counts(const std::vector<Point>& pts, const Level1Grid& g) {
  std::vector<double> counts(g.n_cells(), 0.0);
  for (const auto& p : pts) counts[g.index_of(p)] += 1.0;
  return counts;
}

}  // namespace

TEST_CASE("grid boundaries are exact at the domain edges") {
  CHECK(grid_boundary(0.0, 10.0, 3, 0) == 0.0);
  CHECK(grid_boundary(0.0, 10.0, 3, 3) == 10.0);
  CHECK(grid_boundary(-5.0, 7.0, 4, 4) == 7.0);
  double prev = grid_boundary(0.0, 1.0, 7, 0);
  for (int i = 1; i <= 7; ++i) {
    double b = grid_boundary(0.0, 1.0, 7, i);
    CHECK(b > prev);
    prev = b;
  }
}

TEST_CASE("level-1 grid cell membership is half-open, max edge closed") {
  Level1Grid g{4, Rect{0, 0, 8, 8}};
  CHECK(g.col_of(0.0) == 0);
  CHECK(g.col_of(2.0) == 1);   // boundary goes to the higher cell
  CHECK(g.col_of(1.999999) == 0);
  CHECK(g.col_of(8.0) == 3);   // domain max stays in range
  CHECK(g.row_of(8.0) == 3);
  CHECK(g.index_of(Point{8, 8}) == 15);
  CHECK(g.index_of(Point{0, 0}) == 0);
  // Each point lands in the cell whose rect contains it.
  RandomStream rng(3);
  for (int i = 0; i < 200; ++i) {
    Point p{rng.uniform(0, 8), rng.uniform(0, 8)};
    int idx = g.index_of(p);
    Rect r = g.cell_rect(idx / 4, idx % 4);
    CHECK(r.contains(p));
  }
}

TEST_CASE("level1_granularity frozen values") {
  CHECK(level1_granularity(64000.0, 1.0) == 20);
  CHECK(level1_granularity(27165.0, 0.5) == 10);
  CHECK(level1_granularity(0.0, 1.0) == 10);
  CHECK(level1_granularity(-500.0, 1.0) == 10);  // noisy total can go negative
  CHECK(level1_granularity(1e7, 0.5) == 177);
  // Monotone in both arguments.
  RandomStream rng(17);
  for (int i = 0; i < 100; ++i) {
    double n = rng.uniform(0, 1e6);
    double e = rng.uniform(0.05, 2.0);
    CHECK(level1_granularity(n, e) <= level1_granularity(n * 2, e));
    CHECK(level1_granularity(n, e) <= level1_granularity(n, e * 2));
  }
}

TEST_CASE("level2_granularity frozen values") {
  CHECK(level2_granularity(400.0, 0.5) == 12);
  CHECK(level2_granularity(0.0, 0.5) == 1);
  CHECK(level2_granularity(-3.0, 0.5) == 1);
  CHECK(level2_granularity(2.0 * 1.4142135623730951, 1.0) == 2);
  CHECK(level2_granularity(1.0, 0.25) == 1);
}

TEST_CASE("fit_cell_trend frozen values") {
  std::vector<double> rising{1, 2, 3};
  CHECK(fit_cell_trend(rising) == doctest::Approx(4.0).epsilon(1e-12));
  std::vector<double> flat{5, 5, 5, 5};
  CHECK(fit_cell_trend(flat) == doctest::Approx(5.0).epsilon(1e-12));
  std::vector<double> falling{10, 8, 6, 4, 2};
  CHECK(fit_cell_trend(falling) == 0.0);  // raw prediction is 0, clamp keeps it
  std::vector<double> steep{9, 6, 3};
  CHECK(fit_cell_trend(steep) == 0.0);    // raw prediction negative, clamped
  std::vector<double> one{7};
  CHECK_THROWS_AS(fit_cell_trend(one), std::invalid_argument);
}

TEST_CASE("fit_cell_trend matches a direct normal-equation solve") {
  RandomStream rng(31);
  for (int t = 0; t < 50; ++t) {
    size_t n = 2 + rng.uniform_index(18);
    std::vector<double> y(n);
    for (auto& v : y) v = rng.uniform(0, 100);
    // OLS on x = 1..n: slope = (n*Sxy - Sx*Sy) / (n*Sxx - Sx^2).
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
      double x = double(i + 1);
      sx += x;
      sy += y[i];
      sxx += x * x;
      sxy += x * y[i];
    }
    double denom = n * sxx - sx * sx;
    double slope = (n * sxy - sx * sy) / denom;
    double intercept = (sy - slope * sx) / n;
    double want = std::max(0.0, intercept + slope * double(n + 1));
    CHECK(fit_cell_trend(y) == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("predict_distribution normalizes per-cell trends") {
  // 2x2 grid; stationary counts 30/10/0/0 per cell across two periods.
  Level1Grid g{2, Rect{0, 0, 2, 2}};
  PeriodizedDataset ds;
  ds.bounds = g.bounds;
  for (int p = 0; p < 2; ++p) {
    std::vector<Point> pts;
    for (int i = 0; i < 30; ++i) pts.push_back(Point{0.5, 0.5});  // cell (0,0)
    for (int i = 0; i < 10; ++i) pts.push_back(Point{1.5, 0.5});  // cell (0,1)
    ds.historical.push_back(std::move(pts));
  }
  auto pred = predict_distribution(ds, g);
  REQUIRE(pred.probabilities.size() == 4);
  CHECK(pred.probabilities[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(pred.probabilities[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(pred.probabilities[2] == 0.0);
  CHECK(pred.probabilities[3] == 0.0);
  CHECK_FALSE(pred.uniform_fallback);
  CHECK(pred.predicted_counts[0] == doctest::Approx(30.0).epsilon(1e-12));
}

TEST_CASE("predict_distribution falls back to uniform when trends vanish") {
  // Every occupied cell decays 2 -> 1, predicting 0 everywhere.
  Level1Grid g{2, Rect{0, 0, 2, 2}};
  PeriodizedDataset ds;
  ds.bounds = g.bounds;
  std::vector<Point> p1, p2;
  for (int i = 0; i < 2; ++i) p1.push_back(Point{0.5, 0.5});
  p2.push_back(Point{0.5, 0.5});
  ds.historical.push_back(p1);
  ds.historical.push_back(p2);
  auto pred = predict_distribution(ds, g);
  CHECK(pred.uniform_fallback);
  for (double p : pred.probabilities)
    CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("predict_distribution requires two periods") {
  Level1Grid g{2, Rect{0, 0, 2, 2}};
  PeriodizedDataset ds;
  ds.bounds = g.bounds;
  ds.historical.push_back({Point{0.5, 0.5}});
  CHECK_THROWS_AS(predict_distribution(ds, g), std::invalid_argument);
}

TEST_CASE("sample_simulated_counts conserves totals and respects zeros") {
  RandomStream rng(44);
  std::vector<double> probs{0.5, 0.0, 0.3, 0.2};
  auto counts = sample_simulated_counts(probs, 10000, rng);
  REQUIRE(counts.size() == 4);
  CHECK(std::accumulate(counts.begin(), counts.end(), 0LL) == 10000);
  CHECK(counts[1] == 0);
  CHECK(double(counts[0]) == doctest::Approx(5000.0).epsilon(0.05));
  CHECK(double(counts[2]) == doctest::Approx(3000.0).epsilon(0.08));

  std::vector<double> point_mass{1.0, 0.0, 0.0};
  auto degen = sample_simulated_counts(point_mass, 57, rng);
  CHECK(degen[0] == 57);
  CHECK(degen[1] == 0);
  CHECK(degen[2] == 0);

  auto none = sample_simulated_counts(probs, 0, rng);
  CHECK(std::accumulate(none.begin(), none.end(), 0LL) == 0);

  std::vector<double> zero_mass{0.0, 0.0};
  CHECK_THROWS_AS(sample_simulated_counts(zero_mass, 5, rng), std::invalid_argument);
}

TEST_CASE("sample_simulated_counts is deterministic per stream") {
  std::vector<double> probs{0.25, 0.25, 0.5};
  RandomStream a(5), b(5);
  CHECK(sample_simulated_counts(probs, 1000, a) ==
        sample_simulated_counts(probs, 1000, b));
}

TEST_CASE("prediction_error_rate frozen values") {
  std::vector<double> p{8, 12}, a{10, 10};
  CHECK(prediction_error_rate(p, a) == doctest::Approx(0.2).epsilon(1e-12));
  std::vector<double> same{3, 4, 5};
  CHECK(prediction_error_rate(same, same) == 0.0);
  std::vector<double> zero{0, 0};
  CHECK_THROWS_AS(prediction_error_rate(p, zero), std::invalid_argument);
  std::vector<double> shorter{1};
  CHECK_THROWS_AS(prediction_error_rate(shorter, a), std::invalid_argument);
}

TEST_CASE("psd leaf indexing, tiling, and covering") {
  // Mixed granularities: 2x2 cells with m2 = 1, 2, 1, 3.
  Psd psd(2, Rect{0, 0, 4, 4}, {1, 2, 1, 3}, std::vector<double>(1 + 4 + 1 + 9, 1.0),
          "rht", 0.5, 0.04);
  CHECK(psd.n_leaves() == 15);
  CHECK(psd.m2(0, 0) == 1);
  CHECK(psd.m2(1, 1) == 3);

  // flat_index and leaf_at are inverse bijections over all leaves.
  std::set<size_t> seen;
  for (int r1 = 0; r1 < 2; ++r1)
    for (int c1 = 0; c1 < 2; ++c1)
      for (int r2 = 0; r2 < psd.m2(r1, c1); ++r2)
        for (int c2 = 0; c2 < psd.m2(r1, c1); ++c2) {
          LeafRef leaf{r1, c1, r2, c2};
          size_t flat = psd.flat_index(leaf);
          CHECK(psd.leaf_at(flat) == leaf);
          seen.insert(flat);
        }
  CHECK(seen.size() == psd.n_leaves());

  // Leaf rects tile the bounds: areas sum, no positive-area overlaps.
  double total = 0;
  std::vector<Rect> rects;
  for (size_t f = 0; f < psd.n_leaves(); ++f) {
    Rect r = psd.leaf_rect(psd.leaf_at(f));
    total += r.area();
    rects.push_back(r);
  }
  CHECK(total == doctest::Approx(16.0).epsilon(1e-12));
  for (size_t i = 0; i < rects.size(); ++i)
    for (size_t j = i + 1; j < rects.size(); ++j)
      CHECK_FALSE(rects_overlap(rects[i], rects[j]));

  // covering_leaf maps each leaf center back to that leaf.
  for (size_t f = 0; f < psd.n_leaves(); ++f) {
    LeafRef leaf = psd.leaf_at(f);
    CHECK(psd.covering_leaf(psd.leaf_rect(leaf).center()) == leaf);
  }
  // Domain max corner is covered.
  LeafRef corner = psd.covering_leaf(Point{4, 4});
  CHECK(corner.r1 == 1);
  CHECK(corner.c1 == 1);

  CHECK(psd.min_leaf_area() == doctest::Approx(4.0 / 9.0).epsilon(1e-12));
  CHECK(psd.max_leaf_area() == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("psd constructor validation") {
  CHECK_THROWS_AS(Psd(0, Rect{0, 0, 1, 1}, {}, {}, "rht", 0.5, 0.04),
                  std::invalid_argument);
  CHECK_THROWS_AS(Psd(1, Rect{0, 0, 1, 1}, {0}, {}, "rht", 0.5, 0.04),
                  std::invalid_argument);
  CHECK_THROWS_AS(Psd(1, Rect{0, 0, 1, 1}, {1}, {1.0, 2.0}, "rht", 0.5, 0.04),
                  std::invalid_argument);
  CHECK_THROWS_AS(Psd(1, Rect{0, 0, 1, 1}, {1}, {-1.0}, "rht", 0.5, 0.04),
                  std::invalid_argument);
  CHECK_THROWS_AS(Psd(1, Rect{1, 1, 1, 1}, {1}, {1.0}, "rht", 0.5, 0.04),
                  std::invalid_argument);
}

TEST_CASE("neighbors: reciprocity and geometric adjacency") {
  Psd psd(2, Rect{0, 0, 4, 4}, {1, 2, 1, 3}, std::vector<double>(15, 0.0), "rht",
          0.5, 0.04);
  // The single leaf of cell (0,0) borders cell (0,1) with m2=2: two neighbors
  // across that edge, plus cell (1,0)'s single leaf above. Total 3.
  auto nb = psd.neighbors(LeafRef{0, 0, 0, 0});
  CHECK(nb.size() == 3);

  for (size_t f = 0; f < psd.n_leaves(); ++f) {
    LeafRef leaf = psd.leaf_at(f);
    Rect lr = psd.leaf_rect(leaf);
    for (const auto& n : psd.neighbors(leaf)) {
      CHECK(cells_adjacent(lr, psd.leaf_rect(n)));
      auto back = psd.neighbors(n);
      CHECK(std::find(back.begin(), back.end(), leaf) != back.end());
    }
  }

  // Interior leaf of a 3x3 subgrid has 4 neighbors inside its own cell.
  auto inner = psd.neighbors(LeafRef{1, 1, 1, 1});
  CHECK(inner.size() == 4);
}

TEST_CASE("leaves_in_rect uses positive-area overlap") {
  Psd psd(2, Rect{0, 0, 4, 4}, {2, 2, 2, 2}, std::vector<double>(16, 0.0), "rht",
          0.5, 0.04);
  auto all = psd.leaves_in_rect(Rect{0, 0, 4, 4});
  CHECK(all.size() == 16);
  auto one = psd.leaves_in_rect(Rect{0.2, 0.2, 0.8, 0.8});
  REQUIRE(one.size() == 1);
  CHECK(one[0] == LeafRef{0, 0, 0, 0});
  // A query matching a leaf exactly touches its neighbors only on edges.
  auto exact = psd.leaves_in_rect(psd.leaf_rect(LeafRef{0, 0, 1, 1}));
  REQUIRE(exact.size() == 1);
  CHECK(exact[0] == LeafRef{0, 0, 1, 1});
}

TEST_CASE("rht build without noise conserves mass and budget") {
  auto ds = uniform_dataset(3, 400, 500, Rect{0, 0, 1000, 1000}, 2001);
  PrivacyBudget budget{0.5, 0.04};
  BudgetLedger ledger(0.5);
  RandomStream rng(10);
  PsdBuildOptions opts;
  opts.noise = false;
  Psd psd = build_psd_rht(ds, budget, ledger, rng, opts);

  CHECK(psd.scheme() == "rht");
  double total = std::accumulate(psd.counts().begin(), psd.counts().end(), 0.0);
  CHECK(total == 500.0);  // integer mass, exact with noise off
  CHECK(ledger.consumed() == doctest::Approx(0.5).epsilon(1e-12));
  // Noise-free N' equals |realtime| = 500: m1 = max(10, ceil(0.25*sqrt(500*0.5/10))).
  CHECK(psd.m1() == 10);
}

TEST_CASE("rht build consumes exactly epsilon with noise on") {
  auto ds = uniform_dataset(3, 400, 500, Rect{0, 0, 1000, 1000}, 2002);
  for (double eps : {0.2, 0.5, 1.0}) {
    PrivacyBudget budget{eps, 0.04};
    BudgetLedger ledger(eps);
    RandomStream rng(20);
    Psd psd = build_psd_rht(ds, budget, ledger, rng);
    CHECK(std::abs(ledger.consumed() - eps) <= 1e-12);
    for (double c : psd.counts()) CHECK(c >= 0.0);
  }
}

TEST_CASE("rht build is deterministic and repeatable") {
  auto ds = uniform_dataset(3, 300, 400, Rect{0, 0, 500, 500}, 2003);
  PrivacyBudget budget{0.5, 0.04};
  BudgetLedger l1(0.5), l2(0.5);
  RandomStream r1(33), r2(33);
  Psd a = build_psd_rht(ds, budget, l1, r1);
  Psd b = build_psd_rht(ds, budget, l2, r2);
  CHECK(serialize_psd(a) == serialize_psd(b));
}

TEST_CASE("rht structure depends on realtime only through its cardinality") {
  auto ds1 = uniform_dataset(3, 300, 400, Rect{0, 0, 500, 500}, 2004);
  auto ds2 = ds1;
  // Move every realtime point somewhere else; cardinality unchanged.
  RandomStream mover(77);
  for (auto& p : ds2.realtime) {
    p.x = mover.uniform(0, 500);
    p.y = mover.uniform(0, 500);
  }
  PrivacyBudget budget{0.5, 0.04};
  BudgetLedger l1(0.5), l2(0.5);
  RandomStream r1(55), r2(55);
  Psd a = build_psd_rht(ds1, budget, l1, r1);
  Psd b = build_psd_rht(ds2, budget, l2, r2);
  CHECK(a.m1() == b.m1());
  CHECK(a.m2_grid() == b.m2_grid());
}

TEST_CASE("literal leaf scale consumes (1+beta)*epsilon") {
  auto ds = uniform_dataset(3, 200, 300, Rect{0, 0, 500, 500}, 2005);
  PrivacyBudget budget{0.5, 0.04};
  BudgetLedger ledger(0.5 * 1.04 + 1e-9);
  RandomStream rng(66);
  PsdBuildOptions opts;
  opts.literal_leaf_scale = true;
  Psd psd = build_psd_rht(ds, budget, ledger, rng, opts);
  CHECK(ledger.consumed() == doctest::Approx(0.5 * 1.04).epsilon(1e-12));
  // And the default ledger would reject that overdraft.
  BudgetLedger tight(0.5);
  RandomStream rng2(66);
  CHECK_THROWS_AS(build_psd_rht(ds, budget, tight, rng2, opts), BudgetExceededError);
}

TEST_CASE("ggr build splits the budget three ways") {
  auto ds = uniform_dataset(3, 200, 2000, Rect{0, 0, 1000, 1000}, 2006);
  GgrSplits splits;
  BudgetLedger ledger(0.5);
  RandomStream rng(14);
  Psd psd = build_psd_ggr(ds.realtime, ds.bounds, 0.5, splits, ledger, rng);
  CHECK(psd.scheme() == "ggr");
  CHECK(ledger.consumed() == doctest::Approx(0.5).epsilon(1e-12));
  for (double c : psd.counts()) CHECK(c >= 0.0);

  GgrSplits bad{0.1, 0.5, 0.5};
  BudgetLedger l2(0.5);
  RandomStream r2(14);
  CHECK_THROWS_AS(build_psd_ggr(ds.realtime, ds.bounds, 0.5, bad, l2, r2),
                  std::invalid_argument);
}

TEST_CASE("ggr without noise conserves mass") {
  auto ds = uniform_dataset(3, 100, 1500, Rect{0, 0, 1000, 1000}, 2007);
  GgrSplits splits;
  BudgetLedger ledger(0.5);
  RandomStream rng(15);
  PsdBuildOptions opts;
  opts.noise = false;
  Psd psd = build_psd_ggr(ds.realtime, ds.bounds, 0.5, splits, ledger, rng, opts);
  double total = std::accumulate(psd.counts().begin(), psd.counts().end(), 0.0);
  CHECK(total == 1500.0);
  CHECK(ledger.consumed() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("gdy build gives a uniform grid with unit leaves") {
  Rect bounds{0, 0, 1000, 1000};
  std::vector<Point> realtime;
  RandomStream gen(4000);
  for (int i = 0; i < 4000; ++i)
    realtime.push_back(Point{gen.uniform(0, 1000), gen.uniform(0, 1000)});
  PrivacyBudget budget{1.0, 0.04};
  BudgetLedger ledger(1.0);
  RandomStream rng(16);
  PsdBuildOptions opts;
  opts.noise = false;
  Psd psd = build_psd_gdy(realtime, bounds, budget, ledger, rng, opts);
  CHECK(psd.scheme() == "gdy");
  // N' = 4000, eps = 1, c = 10: m = ceil(sqrt(400)) = 20.
  CHECK(psd.m1() == 20);
  for (int v : psd.m2_grid()) CHECK(v == 1);
  CHECK(ledger.consumed() == doctest::Approx(1.0).epsilon(1e-12));
  double total = std::accumulate(psd.counts().begin(), psd.counts().end(), 0.0);
  CHECK(total == 4000.0);
}

TEST_CASE("refresh keeps structure, replaces counts, charges (1-beta)eps") {
  auto ds = uniform_dataset(3, 300, 400, Rect{0, 0, 500, 500}, 2008);
  PrivacyBudget budget{0.5, 0.04};
  BudgetLedger build_ledger(0.5);
  RandomStream rng(12);
  Psd psd = build_psd_rht(ds, budget, build_ledger, rng);

  // New realtime sample of a different size.
  std::vector<Point> fresh;
  RandomStream gen(90);
  for (int i = 0; i < 350; ++i)
    fresh.push_back(Point{gen.uniform(0, 500), gen.uniform(0, 500)});

  BudgetLedger refresh_ledger(0.5);
  RandomStream rng2 = rng.child(3);
  Psd refreshed = refresh_realtime_counts(psd, fresh, budget, refresh_ledger, rng2);
  CHECK(refreshed.m1() == psd.m1());
  CHECK(refreshed.m2_grid() == psd.m2_grid());
  CHECK(refresh_ledger.consumed() ==
        doctest::Approx((1 - 0.04) * 0.5).epsilon(1e-12));

  // Noise off: refreshed counts are the exact bin counts of the new points.
  BudgetLedger l3(0.5);
  RandomStream r3(1);
  Psd plain = refresh_realtime_counts(psd, fresh, budget, l3, r3, false);
  double total = std::accumulate(plain.counts().begin(), plain.counts().end(), 0.0);
  CHECK(total == 350.0);
}

TEST_CASE("psd serialization round-trips bit-exactly") {
  auto ds = uniform_dataset(3, 200, 250, Rect{0, 0, 750, 750}, 2009);
  PrivacyBudget budget{0.5, 0.04};
  BudgetLedger ledger(0.5);
  RandomStream rng(19);
  Psd psd = build_psd_rht(ds, budget, ledger, rng);
  psd.set_provenance(19, 3);

  std::string text = serialize_psd(psd);
  Psd back = parse_psd(text);
  CHECK(serialize_psd(back) == text);
  CHECK(back.m1() == psd.m1());
  CHECK(back.seed() == 19);
  CHECK(back.snapshot_id() == 3);
  CHECK(back.counts() == psd.counts());
}

TEST_CASE("psd parser reports malformed input with a line number") {
  CHECK_THROWS_AS(parse_psd("not a psd\n"), std::runtime_error);
  try {
    parse_psd("psd v2\n");
    FAIL("expected throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("level-1 binning agrees between dataset and grid helpers") {
  auto ds = uniform_dataset(2, 100, 600, Rect{0, 0, 100, 100}, 2010);
  Level1Grid g{10, ds.bounds};
  auto counts = bin_counts(ds.realtime, g);
  CHECK(std::accumulate(counts.begin(), counts.end(), 0.0) == 600.0);
}
