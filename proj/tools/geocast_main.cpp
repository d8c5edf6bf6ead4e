#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "geocast/dataset.hpp"
#include "geocast/experiment.hpp"
#include "geocast/gr.hpp"
#include "geocast/metrics.hpp"
#include "geocast/psd.hpp"
#include "geocast/synth.hpp"

namespace {

using namespace geocast;

// --seed beats GEOCAST_SEED beats the config's seed key.
uint64_t resolve_seed(const std::optional<uint64_t>& cli_seed, const KvConfig* cfg) {
  if (cli_seed) return *cli_seed;
  if (const char* env = std::getenv("GEOCAST_SEED")) return std::strtoull(env, nullptr, 10);
  if (cfg && cfg->has("seed")) return static_cast<uint64_t>(cfg->get_int("seed", 0));
  return 0;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct SeedOpt {
  std::optional<uint64_t> value;
  void attach(CLI::App* cmd) {
    cmd->add_option_function<uint64_t>(
        "--seed", [this](uint64_t v) { value = v; },
        "random seed (falls back to GEOCAST_SEED, then the config file)");
  }
};

int cmd_ingest(const std::string& config_path, const std::string& out_path,
               const SeedOpt& seed) {
  KvConfig kv = parse_kv_file(config_path);
  IngestConfig cfg = parse_ingest_config(kv);
  RandomStream rng(resolve_seed(seed.value, &kv));
  PeriodizedDataset ds = load_locations(cfg, rng);
  write_dataset_file(out_path, ds);
  std::cout << "wrote " << out_path << ": " << ds.historical.size()
            << " historical periods + real-time (" << ds.realtime.size() << " points)\n";
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_path,
              const SeedOpt& seed) {
  KvConfig kv = parse_kv_file(spec_path);
  SynthSpec spec = parse_synth_spec(kv);
  RandomStream rng(resolve_seed(seed.value, &kv));
  PeriodizedDataset ds = synth_generate(spec, rng);
  write_dataset_file(out_path, ds);
  std::cout << "wrote " << out_path << ": " << spec.n_periods << " periods x "
            << spec.points_per_period << " points + real-time\n";
  return 0;
}

int cmd_build_psd(const std::string& dataset_path, const std::string& scheme_name,
                  double epsilon, double beta, const std::string& noise,
                  const std::string& out_path, const SeedOpt& seed) {
  PeriodizedDataset ds = read_dataset_file(dataset_path);
  uint64_t seed_value = resolve_seed(seed.value, nullptr);
  RandomStream rng(seed_value);
  BudgetLedger ledger(epsilon);
  PsdBuildOptions opts;
  opts.noise = noise != "off";
  Scheme scheme = parse_scheme(scheme_name);
  Psd psd = [&] {
    switch (scheme) {
      case Scheme::kRht:
        return build_psd_rht(ds, {epsilon, beta}, ledger, rng, opts);
      case Scheme::kGgr:
      case Scheme::kGgrHybrid:
        return build_psd_ggr(ds.realtime, ds.bounds, epsilon, {}, ledger, rng, opts);
      case Scheme::kGdy:
        return build_psd_gdy(ds.realtime, ds.bounds, {epsilon, beta}, ledger, rng, opts);
      default:
        throw std::runtime_error("build-psd: scheme must be rht, ggr, or gdy");
    }
  }();
  psd.set_provenance(seed_value, 0);
  write_text_file(out_path, serialize_psd(psd));
  std::cout << "wrote " << out_path << ": scheme " << psd.scheme() << ", m1 " << psd.m1()
            << ", " << psd.n_leaves() << " leaves, budget consumed "
            << ledger.consumed() << "\n";
  return 0;
}

int cmd_geocast(const std::string& psd_path, double x, double y, double eu, double mar,
                double mtd, double lgr_fraction, int task_id,
                const std::string& out_path) {
  Psd psd = parse_psd(read_text_file(psd_path));
  Task task{{x, y}, eu, mtd, mar};
  GeocastRegion gr;
  if (psd.scheme() == "rht") {
    ScoreMaps maps = ScoreMaps::for_psd(psd, task.mtd);
    GrOptions opts;
    opts.lgr_fraction = lgr_fraction;
    gr = build_gr_rht(psd, task, maps, opts);
  } else {
    gr = build_gr_greedy_utility(psd, task);
  }
  std::string record = serialize_gr(gr, task_id);
  if (out_path.empty())
    std::cout << record;
  else
    write_text_file(out_path, record);
  return 0;
}

ExperimentConfig load_experiment_config(const std::string& config_path,
                                        const std::string& dataset_override,
                                        const SeedOpt& seed, const std::string& noise,
                                        int threads_override, KvConfig* kv_out) {
  KvConfig kv = parse_kv_file(config_path);
  ExperimentConfig cfg = parse_experiment_config(kv);
  if (!dataset_override.empty()) cfg.dataset_path = dataset_override;
  if (cfg.dataset_path.empty())
    throw std::runtime_error("experiment: no dataset (config key 'dataset' or --dataset)");
  cfg.seed = resolve_seed(seed.value, &kv);
  if (noise == "off") cfg.noise = false;
  if (threads_override > 0) cfg.threads = threads_override;
  if (kv_out) *kv_out = kv;
  return cfg;
}

int cmd_experiment(const std::string& config_path, const std::string& dataset_override,
                   const std::string& out_dir, const SeedOpt& seed,
                   const std::string& noise, int threads_override) {
  ExperimentConfig cfg = load_experiment_config(config_path, dataset_override, seed,
                                                noise, threads_override, nullptr);
  PeriodizedDataset ds = read_dataset_file(cfg.dataset_path);
  ExperimentResult result = run_experiment(cfg, ds);
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream metrics(out_dir + "/metrics.csv", std::ios::binary);
    if (!metrics) throw std::runtime_error("cannot write " + out_dir + "/metrics.csv");
    write_metrics_csv(metrics, result.report);
  }
  {
    std::ofstream timing(out_dir + "/timing.csv", std::ios::binary);
    if (!timing) throw std::runtime_error("cannot write " + out_dir + "/timing.csv");
    write_timing_csv(timing, result.timing);
  }
  std::cout << "scheme " << result.report.scheme << ": asr " << result.report.asr
            << " over " << result.report.rows.size() << " rows -> " << out_dir << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& dataset_override,
              const std::string& param, const std::string& out_dir, const SeedOpt& seed,
              const std::string& noise, int threads_override) {
  KvConfig kv;
  ExperimentConfig base = load_experiment_config(config_path, dataset_override, seed,
                                                 noise, threads_override, &kv);
  PeriodizedDataset ds = read_dataset_file(base.dataset_path);

  std::vector<double> grid;
  if (param == "epsilon")
    grid = {0.2, 0.4, 0.6, 0.8, 1.0};
  else if (param == "eu")
    grid = {0.6, 0.7, 0.8, 0.9};
  else if (param == "mar")
    grid = {0.05, 0.10, 0.15, 0.20, 0.25};
  else
    throw std::runtime_error("sweep: --param must be epsilon, eu, or mar");

  std::istringstream schemes(kv.get_or("sweep_schemes", "rht ggr gdy"));
  std::filesystem::create_directories(out_dir);
  std::string scheme_name;
  while (schemes >> scheme_name) {
    std::string path = out_dir + "/sweep_" + param + "_" + scheme_name + ".csv";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_metrics_header(out);
    for (double value : grid) {
      ExperimentConfig cfg = base;
      cfg.scheme = parse_scheme(scheme_name);
      if (param == "epsilon")
        cfg.epsilon = value;
      else if (param == "eu")
        cfg.eu = value;
      else
        cfg.mar = value;
      ExperimentResult result = run_experiment(cfg, ds);
      write_aggregate_row(out, result.report);
    }
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private spatial-crowdsourcing geocast simulator"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "raw location CSV -> canonical dataset");
  std::string ingest_config, ingest_out;
  SeedOpt ingest_seed;
  ingest->add_option("--config", ingest_config, "ingest config file")->required();
  ingest->add_option("--out", ingest_out, "output dataset file")->required();
  ingest_seed.attach(ingest);

  // synth
  auto* synth = app.add_subcommand("synth", "synthetic spec -> canonical dataset");
  std::string synth_spec, synth_out;
  SeedOpt synth_seed;
  synth->add_option("--spec", synth_spec, "synthetic spec file")->required();
  synth->add_option("--out", synth_out, "output dataset file")->required();
  synth_seed.attach(synth);

  // build-psd
  auto* build = app.add_subcommand("build-psd", "dataset -> serialized PSD");
  std::string build_dataset, build_scheme = "rht", build_noise = "on", build_out;
  double build_epsilon = 0.5, build_beta = 0.04;
  SeedOpt build_seed;
  build->add_option("--dataset", build_dataset, "canonical dataset file")->required();
  build->add_option("--scheme", build_scheme, "rht | ggr | gdy");
  build->add_option("--epsilon", build_epsilon, "privacy budget");
  build->add_option("--beta", build_beta, "total-count budget fraction");
  build->add_option("--noise", build_noise, "on | off");
  build->add_option("--out", build_out, "output PSD file")->required();
  build_seed.attach(build);

  // geocast
  auto* geo = app.add_subcommand("geocast", "PSD + task -> geocast region record");
  std::string geo_psd, geo_out;
  double geo_x = 0.0, geo_y = 0.0, geo_eu = 0.9, geo_mar = 0.1, geo_mtd = 300.0;
  double geo_lgr_fraction = 1.0;
  int geo_task_id = 0;
  geo->add_option("--psd", geo_psd, "serialized PSD file")->required();
  geo->add_option("--x", geo_x, "task x (m)")->required();
  geo->add_option("--y", geo_y, "task y (m)")->required();
  geo->add_option("--eu", geo_eu, "expected utility target");
  geo->add_option("--mar", geo_mar, "maximum acceptance rate");
  geo->add_option("--mtd-m", geo_mtd, "maximum travel distance (m)");
  geo->add_option("--lgr-fraction", geo_lgr_fraction, "LGR radius fraction");
  geo->add_option("--task-id", geo_task_id, "id echoed in the record");
  geo->add_option("--out", geo_out, "output file (default stdout)");

  // experiment
  auto* exp = app.add_subcommand("experiment", "config -> metrics.csv + timing.csv");
  std::string exp_config, exp_dataset, exp_out = "out", exp_noise = "on";
  int exp_threads = 0;
  SeedOpt exp_seed;
  exp->add_option("--config", exp_config, "experiment config file")->required();
  exp->add_option("--dataset", exp_dataset, "dataset file (overrides config)");
  exp->add_option("--out", exp_out, "output directory");
  exp->add_option("--noise", exp_noise, "on | off");
  exp->add_option("--threads", exp_threads, "snapshot worker threads");
  exp_seed.attach(exp);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "vary epsilon/eu/mar, one CSV per scheme");
  std::string sweep_config, sweep_dataset, sweep_param, sweep_out = "out",
              sweep_noise = "on";
  int sweep_threads = 0;
  SeedOpt sweep_seed;
  sweep->add_option("--config", sweep_config, "experiment config file")->required();
  sweep->add_option("--dataset", sweep_dataset, "dataset file (overrides config)");
  sweep->add_option("--param", sweep_param, "epsilon | eu | mar")->required();
  sweep->add_option("--out", sweep_out, "output directory");
  sweep->add_option("--noise", sweep_noise, "on | off");
  sweep->add_option("--threads", sweep_threads, "snapshot worker threads");
  sweep_seed.attach(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(ingest_config, ingest_out, ingest_seed);
    if (*synth) return cmd_synth(synth_spec, synth_out, synth_seed);
    if (*build)
      return cmd_build_psd(build_dataset, build_scheme, build_epsilon, build_beta,
                           build_noise, build_out, build_seed);
    if (*geo)
      return cmd_geocast(geo_psd, geo_x, geo_y, geo_eu, geo_mar, geo_mtd,
                         geo_lgr_fraction, geo_task_id, geo_out);
    if (*exp)
      return cmd_experiment(exp_config, exp_dataset, exp_out, exp_seed, exp_noise,
                            exp_threads);
    if (*sweep)
      return cmd_sweep(sweep_config, sweep_dataset, sweep_param, sweep_out, sweep_seed,
                       sweep_noise, sweep_threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
