#include "geocast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include "geocast/textio.hpp"

namespace geocast {

std::vector<NotifiedWorker> workers_in_region(const Psd& psd, const GeocastRegion& gr,
                                              std::span<const Point> workers,
                                              const Task& task) {
  std::unordered_set<size_t> region;
  region.reserve(gr.cells.size() * 2);
  for (const LeafRef& leaf : gr.cells) region.insert(psd.flat_index(leaf));
  std::vector<NotifiedWorker> out;
  for (size_t i = 0; i < workers.size(); ++i) {
    if (!region.contains(psd.flat_index(psd.covering_leaf(workers[i])))) continue;
    double d = distance(workers[i], task.location);
    out.push_back({i, d, acceptance_rate(d, task.mtd, task.mar)});
  }
  return out;
}

size_t anw(const Psd& psd, const GeocastRegion& gr, std::span<const Point> workers) {
  std::unordered_set<size_t> region;
  for (const LeafRef& leaf : gr.cells) region.insert(psd.flat_index(leaf));
  size_t n = 0;
  for (const Point& w : workers)
    if (region.contains(psd.flat_index(psd.covering_leaf(w)))) ++n;
  return n;
}

double true_success_probability(std::span<const NotifiedWorker> notified) {
  double fail = 1.0;
  for (const NotifiedWorker& w : notified) fail *= 1.0 - w.ar;
  return 1.0 - fail;
}

std::vector<AssignmentOutcome> simulate_assignment(
    std::span<const NotifiedWorker> notified, int trials, RandomStream& rng) {
  if (trials < 1) throw std::invalid_argument("simulate_assignment: trials must be >= 1");
  std::vector<AssignmentOutcome> out(static_cast<size_t>(trials));
  for (AssignmentOutcome& trial : out) {
    double best_d = std::numeric_limits<double>::infinity();
    const NotifiedWorker* best = nullptr;
    for (const NotifiedWorker& w : notified) {
      if (rng.uniform() >= w.ar) continue;
      if (w.distance < best_d) {
        best_d = w.distance;
        best = &w;
      }
    }
    if (best) {
      trial.success = true;
      trial.wtd = best->distance;
      trial.worker_index = best->index;
    }
  }
  return out;
}

namespace {

std::vector<Rect> region_rects(const Psd& psd, const GeocastRegion& gr) {
  if (gr.cells.empty()) throw std::invalid_argument("empty geocast region");
  std::vector<Rect> rects;
  rects.reserve(gr.cells.size());
  for (const LeafRef& leaf : gr.cells) rects.push_back(psd.leaf_rect(leaf));
  return rects;
}

}  // namespace

double hop(const Psd& psd, const GeocastRegion& gr, double comm_range) {
  std::vector<Rect> rects = region_rects(psd, gr);
  return region_diameter(rects) / comm_range;
}

double dcm(const Psd& psd, const GeocastRegion& gr) {
  std::vector<Rect> rects = region_rects(psd, gr);
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

namespace {

// Mean over finite entries; NaN when none (e.g. WTD with zero successes).
double finite_mean(const std::vector<TaskRow>& rows, double TaskRow::* field) {
  double sum = 0.0;
  size_t n = 0;
  for (const TaskRow& r : rows) {
    double v = r.*field;
    if (!std::isfinite(v)) continue;
    sum += v;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

}  // namespace

MetricsReport aggregate(std::string scheme, double epsilon, double eu, double mar,
                        uint64_t seed, std::vector<TaskRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const TaskRow& a, const TaskRow& b) {
    if (a.snapshot_id != b.snapshot_id) return a.snapshot_id < b.snapshot_id;
    return a.task_id < b.task_id;
  });
  MetricsReport rep;
  rep.scheme = std::move(scheme);
  rep.epsilon = epsilon;
  rep.eu = eu;
  rep.mar = mar;
  rep.seed = seed;
  rep.asr = finite_mean(rows, &TaskRow::asr);
  rep.hop_mean = finite_mean(rows, &TaskRow::hop);
  rep.anw_mean = finite_mean(rows, &TaskRow::anw);
  rep.dcm_mean = finite_mean(rows, &TaskRow::dcm);
  rep.cell_mean = finite_mean(rows, &TaskRow::cell);
  double wtd_sum = 0.0;
  long long successes = 0;
  for (const TaskRow& r : rows) {
    if (r.wtd_successes <= 0) continue;
    wtd_sum += r.wtd * static_cast<double>(r.wtd_successes);
    successes += r.wtd_successes;
  }
  rep.wtd_mean = successes == 0 ? std::numeric_limits<double>::quiet_NaN()
                                : wtd_sum / static_cast<double>(successes);
  rep.eu_compliant = rep.asr >= eu;
  rep.rows = std::move(rows);
  return rep;
}

namespace {

void write_row(std::ostream& os, const MetricsReport& rep, int task_id, int snapshot_id,
               double asr, double wtd, double hop_v, double anw_v, double dcm_v,
               double cell_v, const std::string& termination) {
  os << rep.scheme << "," << fmt_g17(rep.epsilon) << "," << fmt_g17(rep.eu) << ","
     << fmt_g17(rep.mar) << "," << task_id << "," << snapshot_id << "," << fmt_g17(asr)
     << "," << fmt_g17(wtd) << "," << fmt_g17(hop_v) << "," << fmt_g17(anw_v) << ","
     << fmt_g17(dcm_v) << "," << fmt_g17(cell_v) << "," << termination << "\n";
}

}  // namespace

void write_metrics_header(std::ostream& os) {
  os << "scheme,epsilon,eu,mar,task_id,snapshot_id,asr,wtd,hop,anw,dcm,cell,termination\n";
}

void write_aggregate_row(std::ostream& os, const MetricsReport& report) {
  write_row(os, report, -1, -1, report.asr, report.wtd_mean, report.hop_mean,
            report.anw_mean, report.dcm_mean, report.cell_mean, "aggregate");
}

void write_metrics_csv(std::ostream& os, const MetricsReport& report) {
  write_metrics_header(os);
  for (const TaskRow& r : report.rows)
    write_row(os, report, r.task_id, r.snapshot_id, r.asr, r.wtd, r.hop, r.anw, r.dcm,
              r.cell, r.termination);
  write_aggregate_row(os, report);
}

}  // namespace geocast
