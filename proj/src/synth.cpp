#include "geocast/synth.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace geocast {

SynthSpec parse_synth_spec(const KvConfig& cfg) {
  SynthSpec spec;
  spec.points_per_period = cfg.get_int("points_per_period", 5000);
  spec.n_periods = static_cast<int>(cfg.get_int("n_periods", 20));
  if (spec.points_per_period < 0) throw std::runtime_error("synth: negative points_per_period");
  if (spec.n_periods < 2) throw std::runtime_error("synth: need n_periods >= 2");
  {
    std::istringstream bs(cfg.get("bounds"));
    if (!(bs >> spec.bounds.min_x >> spec.bounds.min_y >> spec.bounds.max_x >>
          spec.bounds.max_y))
      throw std::runtime_error("synth: bounds needs four numbers");
    if (spec.bounds.width() <= 0.0 || spec.bounds.height() <= 0.0)
      throw std::runtime_error("synth: degenerate bounds");
  }
  for (const std::string& c : cfg.get_all("cluster")) {
    std::istringstream cs(c);
    GaussianCluster cl;
    if (!(cs >> cl.center.x >> cl.center.y >> cl.sigma >> cl.weight))
      throw std::runtime_error("synth: cluster needs 'cx cy sigma weight [drift]'");
    cs >> cl.weight_drift;
    if (cl.sigma <= 0.0) throw std::runtime_error("synth: cluster sigma must be positive");
    if (cl.weight < 0.0) throw std::runtime_error("synth: cluster weight must be >= 0");
    spec.clusters.push_back(cl);
  }
  if (spec.clusters.empty()) throw std::runtime_error("synth: at least one cluster required");
  return spec;
}

namespace {

std::vector<Point> generate_period(const SynthSpec& spec, int period, RandomStream rng) {
  std::vector<double> cum(spec.clusters.size());
  double total = 0.0;
  for (size_t i = 0; i < spec.clusters.size(); ++i) {
    double w = std::max(0.0, spec.clusters[i].weight +
                                 spec.clusters[i].weight_drift * period);
    total += w;
    cum[i] = total;
  }
  std::vector<Point> out;
  out.reserve(static_cast<size_t>(spec.points_per_period));
  for (long long i = 0; i < spec.points_per_period; ++i) {
    size_t c;
    if (total <= 0.0) {
      c = rng.uniform_index(spec.clusters.size());
    } else {
      double u = rng.uniform() * total;
      c = static_cast<size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
      if (c == cum.size()) --c;
    }
    const GaussianCluster& cl = spec.clusters[c];
    Point p;
    for (int attempt = 0;; ++attempt) {
      p = {cl.center.x + cl.sigma * rng.normal(), cl.center.y + cl.sigma * rng.normal()};
      if (spec.bounds.contains(p)) break;
      if (attempt >= 1000) {
        p.x = std::clamp(p.x, spec.bounds.min_x, spec.bounds.max_x);
        p.y = std::clamp(p.y, spec.bounds.min_y, spec.bounds.max_y);
        break;
      }
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace

PeriodizedDataset synth_generate(const SynthSpec& spec, RandomStream& rng) {
  PeriodizedDataset ds;
  ds.bounds = spec.bounds;
  ds.historical.reserve(static_cast<size_t>(spec.n_periods));
  for (int p = 0; p < spec.n_periods; ++p)
    ds.historical.push_back(generate_period(spec, p, rng.child(static_cast<uint64_t>(p))));
  ds.realtime =
      generate_period(spec, spec.n_periods, rng.child(static_cast<uint64_t>(spec.n_periods)));
  return ds;
}

}  // namespace geocast
