#pragma once

#include <string>
#include <vector>

#include "geocast/config.hpp"
#include "geocast/psd.hpp"
#include "geocast/random.hpp"

namespace geocast {

struct IngestConfig {
  std::string path;
  enum class Format { kXyCsv, kLonLatCsv } format = Format::kXyCsv;
  double blur_radius = 0.0;  // meters; uniform disc displacement
  double scale_ratio = 1.0;  // distance scale about the centroid
  enum class PeriodMode {
    kColumn,    // xy-csv third column
    kByDay,     // fixed-length windows over timestamps
    kByCount,   // fixed-size chunks in timestamp (or file) order
    kExplicit,  // timestamp boundaries
  } period_mode = PeriodMode::kColumn;
  double days_per_period = 1.0;
  long long points_per_period = 0;
  std::vector<double> boundaries;
  int realtime_period = -1;  // -1 = last period
};

IngestConfig parse_ingest_config(const KvConfig& cfg);

/// Reads, projects (lonlat), scales, blurs, and periodizes raw locations.
/// Throws std::runtime_error with a line number on parse errors and an
/// empty-period error when any period ends up without points.
PeriodizedDataset load_locations(const IngestConfig& cfg, RandomStream& rng);

/// Canonical dataset text: header (bounds, period count, units), then
/// `period,x,y` records. The last period is the real-time set.
std::string serialize_dataset(const PeriodizedDataset& dataset);
PeriodizedDataset parse_dataset(const std::string& text);

PeriodizedDataset read_dataset_file(const std::string& path);
void write_dataset_file(const std::string& path, const PeriodizedDataset& dataset);

}  // namespace geocast
