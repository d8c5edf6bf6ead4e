#include "geocast/gr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "geocast/textio.hpp"

namespace geocast {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kEuReached: return "eu_reached";
    case Termination::kBreak: return "break";
    case Termination::kExhausted: return "exhausted";
  }
  return "unknown";
}

double AffineClampedMap::operator()(double v) const {
  if (hi <= lo) return a;  // degenerate domain collapses to the low end
  if (v <= lo) return a;
  if (v >= hi) return b;
  return a + (b - a) * (v - lo) / (hi - lo);
}

ScoreMaps ScoreMaps::for_psd(const Psd& psd, double mtd, double a, double b) {
  return {{psd.min_leaf_area(), psd.max_leaf_area(), a, b},
          {psd.min_leaf_half_diagonal(), mtd, a, b}};
}

double acceptance_rate(double d, double mtd, double mar) {
  if (d >= mtd) return 0.0;
  return (1.0 - d / mtd) * mar;
}

double cell_utility(double noisy_count, double ar) {
  if (noisy_count <= 0.0 || ar <= 0.0) return 0.0;
  return 1.0 - std::pow(1.0 - std::min(ar, 1.0), noisy_count);
}

double combine_utility(double u, double u_c) { return 1.0 - (1.0 - u) * (1.0 - u_c); }

double cell_score(double noisy_count, const Rect& cell, const Task& task,
                  const ScoreMaps& maps) {
  double fs = maps.f_area(cell.area());
  double fd = maps.f_distance(corner_mean_distance(cell, task.location));
  return std::max(0.0, noisy_count) / (fs * fd);
}

double find_lgr(const Psd& psd, const Task& task) {
  if (!psd.bounds().contains(task.location))
    throw std::domain_error("find_lgr: task outside PSD bounds");
  LeafRef covering = psd.covering_leaf(task.location);
  Rect covering_rect = psd.leaf_rect(covering);
  double r0 = corner_mean_distance(covering_rect, task.location);
  double u0 = cell_utility(psd.leaf_count(covering),
                           acceptance_rate(r0, task.mtd, task.mar));
  if (u0 >= task.eu) return r0;

  double step = 0.5 * psd.min_leaf_width();
  double r_max = task.mtd + 0.5 * std::hypot(covering_rect.width(), covering_rect.height());
  double r = r0;
  while (r < r_max) {
    r = std::min(r + step, r_max);
    Rect square{task.location.x - r, task.location.y - r, task.location.x + r,
                task.location.y + r};
    double weighted_dist = 0.0, count_sum = 0.0;
    for (const LeafRef& leaf : psd.leaves_in_rect(square)) {
      Rect rect = psd.leaf_rect(leaf);
      if (rect.distance_to(task.location) > r) continue;
      double n = psd.leaf_count(leaf);
      weighted_dist += corner_mean_distance(rect, task.location) * std::abs(n);
      count_sum += n;
    }
    if (count_sum > 0.0) {
      double d_bar = weighted_dist / count_sum;
      double u = cell_utility(count_sum, acceptance_rate(d_bar, task.mtd, task.mar));
      if (u >= task.eu) return r;
    }
  }
  return r_max;
}

namespace {

struct Candidate {
  double score;
  size_t flat;
};

// Max-score first; ties go to the lowest flat index.
struct CandidateLess {
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.score != b.score) return a.score < b.score;
    return a.flat > b.flat;
  }
};

bool leaf_qualifies(const Psd& psd, const Rect& rect, const Task& task,
                    const GrOptions& opts, const std::optional<double>& r_loc) {
  (void)psd;
  if (opts.mtd_disc) {
    if (rect.distance_to(task.location) > task.mtd) return false;
  } else {
    Rect square{task.location.x - task.mtd, task.location.y - task.mtd,
                task.location.x + task.mtd, task.location.y + task.mtd};
    if (!rects_overlap(rect, square)) return false;
  }
  if (r_loc && rect.distance_to(task.location) > *r_loc) return false;
  return true;
}

double leaf_utility(const Psd& psd, const LeafRef& leaf, const Task& task) {
  Rect rect = psd.leaf_rect(leaf);
  double d = corner_mean_distance(rect, task.location);
  return cell_utility(psd.leaf_count(leaf), acceptance_rate(d, task.mtd, task.mar));
}

}  // namespace

GeocastRegion build_gr_rht(const Psd& psd, const Task& task, const ScoreMaps& maps,
                           const GrOptions& opts) {
  if (!psd.bounds().contains(task.location))
    throw std::domain_error("build_gr_rht: task outside PSD bounds");

  GeocastRegion gr;
  if (opts.use_lgr) gr.r_loc = opts.lgr_fraction * find_lgr(psd, task);

  LeafRef seed = psd.covering_leaf(task.location);
  gr.cells.push_back(seed);
  gr.noisy_utility = leaf_utility(psd, seed, task);

  std::unordered_set<size_t> seen{psd.flat_index(seed)};
  std::priority_queue<Candidate, std::vector<Candidate>, CandidateLess> frontier;
  auto push_neighbors = [&](const LeafRef& leaf) {
    for (const LeafRef& nb : psd.neighbors(leaf)) {
      size_t flat = psd.flat_index(nb);
      if (seen.contains(flat)) continue;
      Rect rect = psd.leaf_rect(nb);
      if (!leaf_qualifies(psd, rect, task, opts, gr.r_loc)) continue;
      seen.insert(flat);
      frontier.push({cell_score(psd.leaf_count(nb), rect, task, maps), flat});
    }
  };
  push_neighbors(seed);

  while (gr.noisy_utility < task.eu) {
    if (frontier.empty()) {
      gr.termination = Termination::kExhausted;
      return gr;
    }
    Candidate best = frontier.top();
    frontier.pop();
    if (opts.use_break && best.score <= 0.0) {
      gr.termination = Termination::kBreak;
      return gr;
    }
    LeafRef leaf = psd.leaf_at(best.flat);
    gr.cells.push_back(leaf);
    gr.noisy_utility = combine_utility(gr.noisy_utility, leaf_utility(psd, leaf, task));
    push_neighbors(leaf);
  }
  gr.termination = Termination::kEuReached;
  return gr;
}

namespace {

double dcm_of_rects(const std::vector<Rect>& rects) {
  std::vector<Point> corners;
  corners.reserve(rects.size() * 4);
  double area = 0.0;
  for (const Rect& r : rects) {
    area += r.area();
    for (Point c : r.corners()) corners.push_back(c);
  }
  Circle mec = min_enclosing_circle(corners);
  return area / (std::numbers::pi * mec.radius * mec.radius);
}

}  // namespace

GeocastRegion build_gr_greedy_utility(const Psd& psd, const Task& task,
                                      const std::optional<HybridParams>& hybrid) {
  if (!psd.bounds().contains(task.location))
    throw std::domain_error("build_gr_greedy_utility: task outside PSD bounds");

  GeocastRegion gr;
  LeafRef seed = psd.covering_leaf(task.location);
  gr.cells.push_back(seed);
  gr.noisy_utility = leaf_utility(psd, seed, task);

  GrOptions square_only{.use_lgr = false, .use_break = false};
  std::unordered_set<size_t> seen{psd.flat_index(seed)};
  std::vector<size_t> frontier;
  std::vector<Rect> gr_rects{psd.leaf_rect(seed)};
  auto push_neighbors = [&](const LeafRef& leaf) {
    for (const LeafRef& nb : psd.neighbors(leaf)) {
      size_t flat = psd.flat_index(nb);
      if (seen.contains(flat)) continue;
      if (!leaf_qualifies(psd, psd.leaf_rect(nb), task, square_only, std::nullopt))
        continue;
      seen.insert(flat);
      frontier.push_back(flat);
    }
  };
  push_neighbors(seed);

  while (gr.noisy_utility < task.eu && !frontier.empty()) {
    size_t best_pos = 0;
    double best_value = -1.0;
    size_t best_flat = 0;
    for (size_t i = 0; i < frontier.size(); ++i) {
      LeafRef leaf = psd.leaf_at(frontier[i]);
      double u = leaf_utility(psd, leaf, task);
      double value = u;
      if (hybrid) {
        gr_rects.push_back(psd.leaf_rect(leaf));
        double comp = dcm_of_rects(gr_rects);
        gr_rects.pop_back();
        value = (1.0 - hybrid->epsilon) * u * (1.0 - hybrid->alpha) +
                hybrid->epsilon * comp * hybrid->alpha;
      }
      if (value > best_value ||
          (value == best_value && frontier[i] < best_flat)) {
        best_value = value;
        best_pos = i;
        best_flat = frontier[i];
      }
    }
    frontier.erase(frontier.begin() + static_cast<ptrdiff_t>(best_pos));
    LeafRef leaf = psd.leaf_at(best_flat);
    gr.cells.push_back(leaf);
    gr_rects.push_back(psd.leaf_rect(leaf));
    gr.noisy_utility = combine_utility(gr.noisy_utility, leaf_utility(psd, leaf, task));
    push_neighbors(leaf);
  }
  gr.termination = gr.noisy_utility >= task.eu ? Termination::kEuReached
                                               : Termination::kExhausted;
  return gr;
}

WorkerSelection build_gr_nonprivate(std::span<const Point> workers, const Task& task) {
  std::vector<std::pair<double, size_t>> in_range;
  for (size_t i = 0; i < workers.size(); ++i) {
    double d = distance(workers[i], task.location);
    if (d <= task.mtd) in_range.emplace_back(d, i);
  }
  std::sort(in_range.begin(), in_range.end());
  WorkerSelection sel;
  for (const auto& [d, i] : in_range) {
    sel.worker_indices.push_back(i);
    sel.utility = combine_utility(sel.utility, acceptance_rate(d, task.mtd, task.mar));
    if (sel.utility >= task.eu) {
      sel.reached_eu = true;
      break;
    }
  }
  return sel;
}

double mcd(const WorkerHistory& history) {
  if (history.contributions.empty())
    throw std::invalid_argument("mcd: empty contribution history");
  double sum = 0.0;
  for (Point c : history.contributions) sum += distance(history.worker, c);
  return sum / static_cast<double>(history.contributions.size());
}

double mtd_from_mcd(double mcd_value) { return 0.9 * mcd_value; }

std::string serialize_gr(const GeocastRegion& gr, int task_id) {
  std::ostringstream os;
  os << "gr " << task_id << " " << to_string(gr.termination) << " "
     << (gr.r_loc ? fmt_g17(*gr.r_loc) : "-") << " " << fmt_g17(gr.noisy_utility) << " "
     << gr.cells.size();
  for (const LeafRef& leaf : gr.cells)
    os << " " << leaf.r1 << ":" << leaf.c1 << ":" << leaf.r2 << ":" << leaf.c2;
  os << "\n";
  return os.str();
}

}  // namespace geocast
