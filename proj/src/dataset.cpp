#include "geocast/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "geocast/textio.hpp"

namespace geocast {

IngestConfig parse_ingest_config(const KvConfig& cfg) {
  IngestConfig out;
  out.path = cfg.get("path");
  std::string format = cfg.get_or("format", "xy-csv");
  if (format == "xy-csv")
    out.format = IngestConfig::Format::kXyCsv;
  else if (format == "lonlat-csv")
    out.format = IngestConfig::Format::kLonLatCsv;
  else
    throw std::runtime_error("ingest: unknown format '" + format + "'");
  out.blur_radius = cfg.get_double("blur_radius_m", 0.0);
  if (out.blur_radius < 0.0) throw std::runtime_error("ingest: negative blur_radius_m");
  out.scale_ratio = cfg.get_double("scale_ratio", 1.0);
  if (out.scale_ratio <= 0.0) throw std::runtime_error("ingest: scale_ratio must be positive");

  std::string period = cfg.get_or("period", "column");
  std::istringstream ps(period);
  std::string mode;
  ps >> mode;
  if (mode == "column") {
    out.period_mode = IngestConfig::PeriodMode::kColumn;
  } else if (mode == "by-day") {
    out.period_mode = IngestConfig::PeriodMode::kByDay;
    if (!(ps >> out.days_per_period) || out.days_per_period <= 0.0)
      throw std::runtime_error("ingest: period by-day needs a positive day count");
  } else if (mode == "by-count") {
    out.period_mode = IngestConfig::PeriodMode::kByCount;
    if (!(ps >> out.points_per_period) || out.points_per_period <= 0)
      throw std::runtime_error("ingest: period by-count needs a positive point count");
  } else if (mode == "explicit") {
    out.period_mode = IngestConfig::PeriodMode::kExplicit;
    double b;
    while (ps >> b) out.boundaries.push_back(b);
    if (out.boundaries.empty())
      throw std::runtime_error("ingest: period explicit needs boundaries");
    if (!std::is_sorted(out.boundaries.begin(), out.boundaries.end()))
      throw std::runtime_error("ingest: explicit boundaries must be sorted");
  } else {
    throw std::runtime_error("ingest: unknown period mode '" + mode + "'");
  }
  out.realtime_period = static_cast<int>(cfg.get_int("realtime_period", -1));
  return out;
}

namespace {

struct RawRecord {
  double a = 0.0, b = 0.0, c = 0.0;
  bool has_c = false;
};

std::vector<RawRecord> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest: cannot open " + path);
  std::vector<RawRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    RawRecord r;
    if (!(ls >> r.a >> r.b))
      throw std::runtime_error("ingest: " + path + ": line " + std::to_string(line_no) +
                               ": expected at least two numeric fields");
    r.has_c = static_cast<bool>(ls >> r.c);
    out.push_back(r);
  }
  return out;
}

constexpr double kEarthRadius = 6371000.0;

}  // namespace

PeriodizedDataset load_locations(const IngestConfig& cfg, RandomStream& rng) {
  std::vector<RawRecord> raw = read_csv(cfg.path);
  if (raw.empty()) throw std::runtime_error("ingest: " + cfg.path + " has no records");

  // (point, key) where key is the period column or timestamp
  std::vector<std::pair<Point, double>> pts;
  pts.reserve(raw.size());
  if (cfg.format == IngestConfig::Format::kLonLatCsv) {
    double lon0 = 0.0, lat0 = 0.0;
    for (const RawRecord& r : raw) {
      if (!r.has_c) throw std::runtime_error("ingest: lonlat-csv rows need a timestamp");
      lon0 += r.a;
      lat0 += r.b;
    }
    lon0 /= static_cast<double>(raw.size());
    lat0 /= static_cast<double>(raw.size());
    double deg = std::numbers::pi / 180.0;
    double cos_lat = std::cos(lat0 * deg);
    for (const RawRecord& r : raw)
      pts.push_back({{kEarthRadius * (r.a - lon0) * deg * cos_lat,
                      kEarthRadius * (r.b - lat0) * deg},
                     r.c});
  } else {
    bool need_period = cfg.period_mode == IngestConfig::PeriodMode::kColumn;
    for (const RawRecord& r : raw) {
      if (need_period && !r.has_c)
        throw std::runtime_error("ingest: xy-csv rows need a period column");
      pts.push_back({{r.a, r.b}, r.has_c ? r.c : 0.0});
    }
  }

  if (cfg.scale_ratio != 1.0) {
    double cx = 0.0, cy = 0.0;
    for (const auto& [p, k] : pts) {
      cx += p.x;
      cy += p.y;
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    for (auto& [p, k] : pts) {
      p.x = cx + (p.x - cx) * cfg.scale_ratio;
      p.y = cy + (p.y - cy) * cfg.scale_ratio;
    }
  }

  if (cfg.blur_radius > 0.0) {
    for (auto& [p, k] : pts) {
      double r = cfg.blur_radius * std::sqrt(rng.uniform());
      double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      p.x += r * std::cos(theta);
      p.y += r * std::sin(theta);
    }
  }

  // period assignment (keys are period values or timestamps)
  std::vector<std::vector<Point>> periods;
  switch (cfg.period_mode) {
    case IngestConfig::PeriodMode::kColumn: {
      std::map<long long, std::vector<Point>> by_value;
      for (const auto& [p, k] : pts) by_value[std::llround(k)].push_back(p);
      for (auto& [value, group] : by_value) periods.push_back(std::move(group));
      break;
    }
    case IngestConfig::PeriodMode::kByDay: {
      double t_min = pts[0].second;
      for (const auto& [p, k] : pts) t_min = std::min(t_min, k);
      double window = 86400.0 * cfg.days_per_period;
      for (const auto& [p, k] : pts) {
        size_t idx = static_cast<size_t>(std::floor((k - t_min) / window));
        if (periods.size() <= idx) periods.resize(idx + 1);
        periods[idx].push_back(p);
      }
      break;
    }
    case IngestConfig::PeriodMode::kByCount: {
      std::stable_sort(pts.begin(), pts.end(),
                       [](const auto& a, const auto& b) { return a.second < b.second; });
      for (size_t i = 0; i < pts.size(); ++i) {
        size_t idx = i / static_cast<size_t>(cfg.points_per_period);
        if (periods.size() <= idx) periods.resize(idx + 1);
        periods[idx].push_back(pts[i].first);
      }
      break;
    }
    case IngestConfig::PeriodMode::kExplicit: {
      periods.resize(cfg.boundaries.size() + 1);
      for (const auto& [p, k] : pts) {
        size_t idx = static_cast<size_t>(
            std::upper_bound(cfg.boundaries.begin(), cfg.boundaries.end(), k) -
            cfg.boundaries.begin());
        periods[idx].push_back(p);
      }
      break;
    }
  }

  for (size_t i = 0; i < periods.size(); ++i)
    if (periods[i].empty())
      throw std::runtime_error("ingest: period " + std::to_string(i) + " is empty");
  if (periods.size() < 3)
    throw std::runtime_error("ingest: need at least 3 periods (2 historical + real-time)");

  int rt = cfg.realtime_period < 0 ? static_cast<int>(periods.size()) - 1
                                   : cfg.realtime_period;
  if (rt < 0 || rt >= static_cast<int>(periods.size()))
    throw std::runtime_error("ingest: realtime_period out of range");

  PeriodizedDataset ds;
  ds.realtime = std::move(periods[rt]);
  for (size_t i = 0; i < periods.size(); ++i)
    if (static_cast<int>(i) != rt) ds.historical.push_back(std::move(periods[i]));

  bool first = true;
  auto extend = [&](const std::vector<Point>& group) {
    for (Point p : group) {
      if (first) {
        ds.bounds = {p.x, p.y, p.x, p.y};
        first = false;
        continue;
      }
      ds.bounds.min_x = std::min(ds.bounds.min_x, p.x);
      ds.bounds.min_y = std::min(ds.bounds.min_y, p.y);
      ds.bounds.max_x = std::max(ds.bounds.max_x, p.x);
      ds.bounds.max_y = std::max(ds.bounds.max_y, p.y);
    }
  };
  for (const auto& h : ds.historical) extend(h);
  extend(ds.realtime);
  if (ds.bounds.width() <= 0.0 || ds.bounds.height() <= 0.0)
    throw std::runtime_error("ingest: degenerate bounds (all points collinear on an axis)");
  return ds;
}

std::string serialize_dataset(const PeriodizedDataset& dataset) {
  std::ostringstream os;
  os << "dataset v1\n";
  const Rect& b = dataset.bounds;
  os << "bounds " << fmt_g17(b.min_x) << " " << fmt_g17(b.min_y) << " "
     << fmt_g17(b.max_x) << " " << fmt_g17(b.max_y) << "\n";
  os << "periods " << dataset.historical.size() + 1 << "\n";
  os << "units m\n";
  for (size_t p = 0; p < dataset.historical.size(); ++p)
    for (Point pt : dataset.historical[p])
      os << p << "," << fmt_g17(pt.x) << "," << fmt_g17(pt.y) << "\n";
  size_t rt = dataset.historical.size();
  for (Point pt : dataset.realtime)
    os << rt << "," << fmt_g17(pt.x) << "," << fmt_g17(pt.y) << "\n";
  return os.str();
}

PeriodizedDataset parse_dataset(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  auto fail = [](int line_no, const std::string& what) -> void {
    throw std::runtime_error("dataset parse: line " + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(is, line) || line != "dataset v1") fail(1, "bad header");
  PeriodizedDataset ds;
  if (!std::getline(is, line)) fail(2, "missing bounds");
  {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key != "bounds" ||
        !(ls >> ds.bounds.min_x >> ds.bounds.min_y >> ds.bounds.max_x >> ds.bounds.max_y))
      fail(2, "bad bounds");
  }
  size_t n_periods = 0;
  if (!std::getline(is, line)) fail(3, "missing periods");
  {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key != "periods" || !(ls >> n_periods) || n_periods < 1)
      fail(3, "bad period count");
  }
  if (!std::getline(is, line) || line != "units m") fail(4, "bad units");

  std::vector<std::vector<Point>> periods(n_periods);
  int line_no = 4;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    size_t p;
    Point pt;
    if (!(ls >> p >> pt.x >> pt.y)) fail(line_no, "bad record");
    if (p >= n_periods) fail(line_no, "period index out of range");
    periods[p].push_back(pt);
  }
  ds.realtime = std::move(periods.back());
  periods.pop_back();
  ds.historical = std::move(periods);
  return ds;
}

PeriodizedDataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str());
}

void write_dataset_file(const std::string& path, const PeriodizedDataset& dataset) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset: cannot write " + path);
  out << serialize_dataset(dataset);
}

}  // namespace geocast
