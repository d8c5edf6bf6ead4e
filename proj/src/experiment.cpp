#include "geocast/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "geocast/gr.hpp"
#include "geocast/textio.hpp"

namespace geocast {

Scheme parse_scheme(const std::string& name) {
  if (name == "rht") return Scheme::kRht;
  if (name == "ggr") return Scheme::kGgr;
  if (name == "ggr_hybrid") return Scheme::kGgrHybrid;
  if (name == "gdy") return Scheme::kGdy;
  if (name == "nonprivate") return Scheme::kNonprivate;
  throw std::runtime_error("unknown scheme '" + name + "'");
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kRht: return "rht";
    case Scheme::kGgr: return "ggr";
    case Scheme::kGgrHybrid: return "ggr_hybrid";
    case Scheme::kGdy: return "gdy";
    case Scheme::kNonprivate: return "nonprivate";
  }
  return "unknown";
}

ExperimentConfig parse_experiment_config(const KvConfig& cfg) {
  ExperimentConfig out;
  out.scheme = parse_scheme(cfg.get_or("scheme", "rht"));
  out.epsilon = cfg.get_double("epsilon", out.epsilon);
  out.eu = cfg.get_double("eu", out.eu);
  out.mar = cfg.get_double("mar", out.mar);
  out.mtd = cfg.get_double("mtd_m", out.mtd);
  out.lgr_fraction = cfg.get_double("lgr_fraction", out.lgr_fraction);
  out.use_lgr = cfg.get_bool("use_lgr", out.use_lgr);
  out.use_break = cfg.get_bool("use_break", out.use_break);
  out.mtd_disc = cfg.get_bool("mtd_disc", out.mtd_disc);
  out.n_tasks = static_cast<int>(cfg.get_int("n_tasks", out.n_tasks));
  out.n_partitions = static_cast<int>(cfg.get_int("n_partitions", out.n_partitions));
  out.n_noise_draws = static_cast<int>(cfg.get_int("n_noise_draws", out.n_noise_draws));
  out.n_rebuilds = static_cast<int>(cfg.get_int("n_rebuilds", out.n_rebuilds));
  out.trials = static_cast<int>(cfg.get_int("trials", out.trials));
  out.seed = static_cast<uint64_t>(cfg.get_int("seed", 0));
  out.score_lo = cfg.get_double("score_lo", out.score_lo);
  out.score_hi = cfg.get_double("score_hi", out.score_hi);
  out.noise = cfg.get_bool("noise", out.noise);
  out.beta = cfg.get_double("beta", out.beta);
  out.ggr_splits.beta0 = cfg.get_double("ggr_beta0", out.ggr_splits.beta0);
  out.ggr_splits.beta1 = cfg.get_double("ggr_beta1", out.ggr_splits.beta1);
  out.ggr_splits.beta2 = cfg.get_double("ggr_beta2", out.ggr_splits.beta2);
  out.hybrid_alpha = cfg.get_double("hybrid_alpha", out.hybrid_alpha);
  std::string wtd_mode = cfg.get_or("wtd_mode", "nearest_accepter");
  if (wtd_mode == "nearest_accepter")
    out.wtd_mean_notified = false;
  else if (wtd_mode == "mean_notified")
    out.wtd_mean_notified = true;
  else
    throw std::runtime_error("unknown wtd_mode '" + wtd_mode + "'");
  out.threads = static_cast<int>(cfg.get_int("threads", out.threads));
  out.gdy_c = cfg.get_double("gdy_c", out.gdy_c);
  out.dataset_path = cfg.get_or("dataset", "");

  if (out.scheme != Scheme::kNonprivate && out.epsilon <= 0.0)
    throw std::runtime_error("experiment: epsilon must be positive");
  if (out.eu <= 0.0 || out.eu >= 1.0) throw std::runtime_error("experiment: eu must lie in (0,1)");
  if (out.mar <= 0.0 || out.mar > 1.0)
    throw std::runtime_error("experiment: mar must lie in (0,1]");
  if (out.mtd <= 0.0) throw std::runtime_error("experiment: mtd_m must be positive");
  if (out.n_tasks < 1 || out.n_partitions < 1 || out.n_noise_draws < 1 ||
      out.n_rebuilds < 1 || out.trials < 1 || out.threads < 1)
    throw std::runtime_error("experiment: counts must be positive");
  return out;
}

double StageTiming::mean() const {
  if (ms.empty()) return 0.0;
  double sum = 0.0;
  for (double v : ms) sum += v;
  return sum / static_cast<double>(ms.size());
}

double StageTiming::p95() const {
  if (ms.empty()) return 0.0;
  std::vector<double> sorted(ms);
  std::sort(sorted.begin(), sorted.end());
  size_t idx = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
  return sorted[std::min(idx, sorted.size()) - 1];
}

std::vector<Point> sample_tasks(std::span<const Point> pool, int n, RandomStream& rng) {
  if (pool.empty()) throw std::invalid_argument("sample_tasks: empty worker pool");
  std::vector<Point> out;
  out.reserve(static_cast<size_t>(n));
  if (static_cast<size_t>(n) > pool.size()) {
    for (int i = 0; i < n; ++i) out.push_back(pool[rng.uniform_index(pool.size())]);
    return out;
  }
  // partial Fisher-Yates: first n slots of a virtual shuffle
  std::vector<size_t> idx(pool.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (int i = 0; i < n; ++i) {
    size_t j = static_cast<size_t>(i) + rng.uniform_index(idx.size() - static_cast<size_t>(i));
    std::swap(idx[static_cast<size_t>(i)], idx[j]);
    out.push_back(pool[idx[static_cast<size_t>(i)]]);
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Bounded pool; fn(i) for i in [0,n). Exceptions rethrow on the caller.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Workers grouped by covering leaf so each task touches only its GR's cells.
std::unordered_map<size_t, std::vector<size_t>> bucket_workers(
    const Psd& psd, std::span<const Point> workers) {
  std::unordered_map<size_t, std::vector<size_t>> buckets;
  for (size_t i = 0; i < workers.size(); ++i)
    buckets[psd.flat_index(psd.covering_leaf(workers[i]))].push_back(i);
  return buckets;
}

std::vector<NotifiedWorker> gather_notified(
    const Psd& psd, const GeocastRegion& gr,
    const std::unordered_map<size_t, std::vector<size_t>>& buckets,
    std::span<const Point> workers, const Task& task) {
  std::vector<size_t> indices;
  for (const LeafRef& leaf : gr.cells) {
    auto it = buckets.find(psd.flat_index(leaf));
    if (it == buckets.end()) continue;
    indices.insert(indices.end(), it->second.begin(), it->second.end());
  }
  std::sort(indices.begin(), indices.end());
  std::vector<NotifiedWorker> out;
  out.reserve(indices.size());
  for (size_t i : indices) {
    double d = distance(workers[i], task.location);
    out.push_back({i, d, acceptance_rate(d, task.mtd, task.mar)});
  }
  return out;
}

struct WtdStats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  long long weight = 0;
};

WtdStats wtd_from_trials(const std::vector<AssignmentOutcome>& outcomes) {
  double sum = 0.0;
  long long n = 0;
  for (const AssignmentOutcome& o : outcomes) {
    if (!o.success) continue;
    sum += *o.wtd;
    ++n;
  }
  return n == 0 ? WtdStats{} : WtdStats{sum / static_cast<double>(n), n};
}

WtdStats wtd_from_notified(std::span<const NotifiedWorker> notified) {
  if (notified.empty()) return {};
  double sum = 0.0;
  for (const NotifiedWorker& w : notified) sum += w.distance;
  return {sum / static_cast<double>(notified.size()),
          static_cast<long long>(notified.size())};
}

struct SnapshotSink {
  std::vector<TaskRow>& rows;       // n_snapshots * n_tasks, slot-addressed
  std::vector<double>& stage_b_ms;  // same addressing
};

// Evaluates every task against one snapshot PSD; rows land in fixed slots so
// thread scheduling cannot reorder output.
void evaluate_snapshot(const ExperimentConfig& cfg, const Psd& psd, int snapshot_id,
                       const std::vector<Task>& tasks, std::span<const Point> workers,
                       RandomStream trial_base, SnapshotSink sink) {
  auto buckets = bucket_workers(psd, workers);
  ScoreMaps maps = ScoreMaps::for_psd(psd, cfg.mtd, cfg.score_lo, cfg.score_hi);
  GrOptions opts{cfg.lgr_fraction, cfg.use_lgr, cfg.use_break, cfg.mtd_disc};
  for (size_t t = 0; t < tasks.size(); ++t) {
    const Task& task = tasks[t];
    size_t slot = static_cast<size_t>(snapshot_id) * tasks.size() + t;
    try {
      Clock::time_point start = Clock::now();
      GeocastRegion gr;
      switch (cfg.scheme) {
        case Scheme::kRht:
          gr = build_gr_rht(psd, task, maps, opts);
          break;
        case Scheme::kGgrHybrid:
          gr = build_gr_greedy_utility(psd, task,
                                       HybridParams{cfg.hybrid_alpha, cfg.epsilon});
          break;
        default:
          gr = build_gr_greedy_utility(psd, task);
          break;
      }
      sink.stage_b_ms[slot] = ms_since(start);

      std::vector<NotifiedWorker> notified =
          gather_notified(psd, gr, buckets, workers, task);
      RandomStream trial_stream = trial_base.child(t);
      WtdStats wtd;
      if (cfg.wtd_mean_notified) {
        wtd = wtd_from_notified(notified);
      } else {
        wtd = wtd_from_trials(simulate_assignment(notified, cfg.trials, trial_stream));
      }
      TaskRow& row = sink.rows[slot];
      row.task_id = static_cast<int>(t);
      row.snapshot_id = snapshot_id;
      row.asr = true_success_probability(notified);
      row.wtd = wtd.mean;
      row.wtd_successes = wtd.weight;
      row.hop = hop(psd, gr);
      row.anw = static_cast<double>(notified.size());
      row.dcm = dcm(psd, gr);
      row.cell = static_cast<double>(gr.cells.size());
      row.termination = to_string(gr.termination);
    } catch (const std::exception& e) {
      throw std::runtime_error("snapshot " + std::to_string(snapshot_id) + ", task " +
                               std::to_string(t) + ": " + e.what());
    }
  }
}

ExperimentResult run_nonprivate(const ExperimentConfig& cfg,
                                const PeriodizedDataset& dataset,
                                const std::vector<Task>& tasks, RandomStream& root) {
  std::span<const Point> workers(dataset.realtime);
  std::vector<TaskRow> rows(tasks.size());
  std::vector<double> stage_b(tasks.size());
  RandomStream trial_base = root.child(3).child(0);
  for (size_t t = 0; t < tasks.size(); ++t) {
    const Task& task = tasks[t];
    Clock::time_point start = Clock::now();
    WorkerSelection sel = build_gr_nonprivate(workers, task);
    stage_b[t] = ms_since(start);

    std::vector<NotifiedWorker> notified;
    notified.reserve(sel.worker_indices.size());
    for (size_t i : sel.worker_indices) {
      double d = distance(workers[i], task.location);
      notified.push_back({i, d, acceptance_rate(d, task.mtd, task.mar)});
    }
    RandomStream trial_stream = trial_base.child(t);
    WtdStats wtd;
    if (cfg.wtd_mean_notified) {
      wtd = wtd_from_notified(notified);
    } else {
      wtd = wtd_from_trials(simulate_assignment(notified, cfg.trials, trial_stream));
    }
    double max_pair = 0.0;
    for (size_t i = 0; i < notified.size(); ++i)
      for (size_t j = i + 1; j < notified.size(); ++j)
        max_pair = std::max(max_pair, distance(workers[notified[i].index],
                                               workers[notified[j].index]));
    TaskRow& row = rows[t];
    row.task_id = static_cast<int>(t);
    row.snapshot_id = 0;
    row.asr = true_success_probability(notified);
    row.wtd = wtd.mean;
    row.wtd_successes = wtd.weight;
    row.hop = max_pair / 100.0;
    row.anw = static_cast<double>(notified.size());
    row.dcm = std::numeric_limits<double>::quiet_NaN();
    row.cell = 0.0;
    row.termination = to_string(sel.reached_eu ? Termination::kEuReached
                                               : Termination::kExhausted);
  }
  ExperimentResult result;
  result.report = aggregate(to_string(cfg.scheme), cfg.epsilon, cfg.eu, cfg.mar,
                            cfg.seed, std::move(rows));
  result.timing.scheme = to_string(cfg.scheme);
  result.timing.stages.push_back({"B", std::move(stage_b)});
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const PeriodizedDataset& dataset) {
  RandomStream root(cfg.seed);
  RandomStream task_stream = root.child(1);
  std::vector<Point> locations = sample_tasks(dataset.realtime, cfg.n_tasks, task_stream);
  std::vector<Task> tasks;
  tasks.reserve(locations.size());
  for (Point loc : locations) tasks.push_back({loc, cfg.eu, cfg.mtd, cfg.mar});

  if (cfg.scheme == Scheme::kNonprivate) return run_nonprivate(cfg, dataset, tasks, root);

  std::span<const Point> workers(dataset.realtime);
  bool rht = cfg.scheme == Scheme::kRht;
  int n_snapshots = rht ? cfg.n_partitions * cfg.n_noise_draws : cfg.n_rebuilds;
  int n_units = rht ? cfg.n_partitions : cfg.n_rebuilds;

  std::vector<TaskRow> rows(static_cast<size_t>(n_snapshots) * tasks.size());
  std::vector<double> stage_b(rows.size());
  std::vector<double> stage_a(static_cast<size_t>(n_units));
  std::vector<double> stage_a2(rht ? static_cast<size_t>(n_snapshots) : 0);

  RandomStream snap_base = root.child(2);
  RandomStream trial_root = root.child(3);
  PsdBuildOptions build_opts;
  build_opts.noise = cfg.noise;
  build_opts.gdy_c = cfg.gdy_c;
  PrivacyBudget budget{cfg.epsilon, cfg.beta};

  parallel_for(n_units, cfg.threads, [&](int unit) {
    RandomStream build_stream = snap_base.child(static_cast<uint64_t>(unit));
    BudgetLedger ledger(cfg.epsilon);
    Clock::time_point start = Clock::now();
    Psd psd = [&] {
      switch (cfg.scheme) {
        case Scheme::kRht:
          return build_psd_rht(dataset, budget, ledger, build_stream, build_opts);
        case Scheme::kGgr:
        case Scheme::kGgrHybrid:
          return build_psd_ggr(dataset.realtime, dataset.bounds, cfg.epsilon,
                               cfg.ggr_splits, ledger, build_stream, build_opts);
        default:
          return build_psd_gdy(dataset.realtime, dataset.bounds, budget, ledger,
                               build_stream, build_opts);
      }
    }();
    stage_a[static_cast<size_t>(unit)] = ms_since(start);

    if (!rht) {
      psd.set_provenance(cfg.seed, unit);
      evaluate_snapshot(cfg, psd, unit, tasks, workers, trial_root.child(unit),
                        {rows, stage_b});
      return;
    }
    for (int draw = 0; draw < cfg.n_noise_draws; ++draw) {
      int snapshot_id = unit * cfg.n_noise_draws + draw;
      // builder consumed child streams 0..2; refreshes use 3+
      RandomStream refresh_stream = build_stream.child(static_cast<uint64_t>(3 + draw));
      BudgetLedger refresh_ledger(cfg.epsilon);
      Clock::time_point refresh_start = Clock::now();
      Psd snapshot = refresh_realtime_counts(psd, dataset.realtime, budget,
                                             refresh_ledger, refresh_stream, cfg.noise);
      stage_a2[static_cast<size_t>(snapshot_id)] = ms_since(refresh_start);
      snapshot.set_provenance(cfg.seed, snapshot_id);
      evaluate_snapshot(cfg, snapshot, snapshot_id, tasks, workers,
                        trial_root.child(snapshot_id), {rows, stage_b});
    }
  });

  ExperimentResult result;
  result.report = aggregate(to_string(cfg.scheme), cfg.epsilon, cfg.eu, cfg.mar,
                            cfg.seed, std::move(rows));
  result.timing.scheme = to_string(cfg.scheme);
  result.timing.stages.push_back({"A", std::move(stage_a)});
  if (rht) result.timing.stages.push_back({"A2", std::move(stage_a2)});
  result.timing.stages.push_back({"B", std::move(stage_b)});
  return result;
}

void write_timing_csv(std::ostream& os, const TimingSummary& timing) {
  os << "scheme,stage,mean_ms,p95_ms\n";
  for (const StageTiming& st : timing.stages)
    os << timing.scheme << "," << st.stage << "," << fmt_g17(st.mean()) << ","
       << fmt_g17(st.p95()) << "\n";
}

}  // namespace geocast
