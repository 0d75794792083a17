// Command-line front end: run campaigns and single estimations, scan the
// Fisher landscape, locate the CRB working points, and dump posterior
// snapshots. Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "triphase/config.hpp"
#include "triphase/harness.hpp"
#include "triphase/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<long> seed;
  std::optional<long> threads;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "configuration file (key = value lines)");
  cmd->add_option("--set", opts.overrides, "override a config key (key=value), repeatable");
  cmd->add_option("--out", opts.out_dir,
                  "output directory (default: $TRIPHASE_OUT_DIR or '.')");
  cmd->add_option("--seed", opts.seed, "override campaign.seed");
  cmd->add_option("--threads", opts.threads, "override campaign.threads");
}

triphase::Config load_config(const CommonOpts& opts) {
  triphase::Config cfg = opts.config_path.empty()
                             ? triphase::Config::from_string("", "<defaults>")
                             : triphase::Config::from_file(opts.config_path);
  for (const auto& o : opts.overrides) cfg.set(o);
  if (opts.seed) cfg.set("campaign.seed=" + std::to_string(*opts.seed));
  if (opts.threads) cfg.set("campaign.threads=" + std::to_string(*opts.threads));
  return cfg;
}

fs::path resolve_out_dir(const CommonOpts& opts) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (const char* env = std::getenv("TRIPHASE_OUT_DIR")) return env;
  return ".";
}

std::string fmt(double v) { return triphase::fmt_double(v); }

json policy_json(const triphase::ControlPolicy& p) {
  const char* kinds[] = {"asymptotic", "hybrid", "optimized", "random"};
  json j;
  j["kind"] = kinds[static_cast<int>(p.kind)];
  j["k"] = p.k;
  j["utility_grid"] = p.utility_grid;
  j["refine"] = p.refine;
  return j;
}

json device_json(const triphase::DeviceModel& d) {
  auto kind = [](triphase::TritterKind k) {
    return k == triphase::TritterKind::fourier ? "fourier" : "reck_planar";
  };
  json j;
  j["tritter_a"] = kind(d.tritter_a.kind);
  j["phi_t_a"] = d.tritter_a.phi_t;
  j["tritter_b"] = kind(d.tritter_b.kind);
  j["phi_t_b"] = d.tritter_b.phi_t;
  j["visibility"] = d.noise.visibility;
  j["background"] = d.noise.background;
  j["input_mode"] = d.input_mode;
  j["reference_mode"] = d.reference_mode;
  return j;
}

/// Fully-resolved configuration echo so every output is self-describing.
json config_echo(const triphase::ExperimentConfig& cfg) {
  json j;
  j["device"] = device_json(cfg.device);
  j["strategy"] = policy_json(cfg.policy);
  json c;
  c["probes"] = cfg.probes;
  c["repetitions"] = cfg.repetitions;
  if (cfg.phase_pairs.empty()) {
    c["phase_pairs"] = cfg.sampled_phase_pairs;
  } else {
    json list = json::array();
    for (auto p : cfg.phase_pairs) list.push_back({p.phi1, p.phi2});
    c["phases"] = list;
  }
  c["particles"] = cfg.particles;
  c["seed"] = cfg.seed;
  c["threads"] = cfg.threads;
  j["campaign"] = c;
  j["resample"] = {{"a", cfg.resample.a}, {"trigger", cfg.resample.trigger_fraction}};
  j["hardware"] = {{"enabled", cfg.hardware_mode}, {"quantum", cfg.control_quantum}};
  if (cfg.crb_trace_inverse) j["crb_trace_inverse_fixture"] = *cfg.crb_trace_inverse;
  return j;
}

int cmd_campaign(const CommonOpts& opts) {
  auto cfg = load_config(opts);
  auto exp = triphase::load_experiment(cfg);
  cfg.finish();
  fs::path out = resolve_out_dir(opts);
  fs::create_directories(out);

  auto result = triphase::run_campaign(exp);

  triphase::atomic_write(out / "campaign.csv", triphase::campaign_csv(result));

  json summary;
  summary["config"] = config_echo(exp);
  summary["crb_trace_inverse"] = result.crb_value;
  summary["runs"] = result.runs;
  summary["failures"] = result.failures;
  json pairs = json::array();
  for (auto p : result.phase_pairs) pairs.push_back({p.phi1, p.phi2});
  summary["phase_pairs"] = pairs;
  summary["final"] = {{"loss", result.loss.back()},
                      {"wrapped_loss", result.wrapped_loss.back()},
                      {"cov_trace", result.cov_trace.back()},
                      {"crb", result.crb.back()}};
  if (result.fit_ok) {
    summary["convergence_fit"] = {{"a", result.fit.a},
                                  {"b", result.fit.b},
                                  {"tau", result.fit.tau},
                                  {"residual", result.fit.residual},
                                  {"constant_residual", result.fit.constant_residual}};
  } else {
    summary["convergence_fit"] = nullptr;
  }
  triphase::atomic_write(out / "campaign.json", summary.dump(2) + "\n");

  std::cout << "runs=" << result.runs << " failures=" << result.failures
            << " wrapped_loss(N=" << result.probes
            << ")=" << fmt(result.wrapped_loss.back())
            << " crb=" << fmt(result.crb.back()) << "\n"
            << "wrote " << (out / "campaign.csv").string() << " and "
            << (out / "campaign.json").string() << "\n";
  return 0;
}

int cmd_run(const CommonOpts& opts, double phi1, double phi2, long run_index) {
  auto cfg = load_config(opts);
  auto exp = triphase::load_experiment(cfg);
  cfg.finish();
  fs::path out = resolve_out_dir(opts);
  fs::create_directories(out);

  auto trace = triphase::run_estimation(exp, {phi1, phi2},
                                        static_cast<std::uint64_t>(run_index));
  triphase::atomic_write(out / "trace.csv", triphase::trace_csv(trace));
  if (trace.failed) {
    std::cerr << "run failed: zero evidence at probe " << trace.failed_at << "\n";
    return 2;
  }
  const auto& last = trace.steps.back();
  std::cout << "estimate=(" << fmt(last.mean.phi1) << ", " << fmt(last.mean.phi2)
            << ") wrapped_loss=" << fmt(last.loss_wrapped) << "\n"
            << "wrote " << (out / "trace.csv").string() << "\n";
  return 0;
}

int cmd_fisher_scan(const CommonOpts& opts, int grid) {
  auto cfg = load_config(opts);
  auto dev = triphase::load_device(cfg);
  cfg.finish();
  fs::path out = resolve_out_dir(opts);
  fs::create_directories(out);

  triphase::Likelihood lik(dev);
  std::ostringstream csv;
  csv << "phi1,phi2,f11,f12,f22,trace_inverse\n";
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      double x = triphase::two_pi * (i + 0.5) / grid;
      double y = triphase::two_pi * (j + 0.5) / grid;
      auto f = triphase::fisher_matrix(lik, {x, y});
      csv << fmt(x) << ',' << fmt(y) << ',' << fmt(f.matrix.xx) << ','
          << fmt(f.matrix.xy) << ',' << fmt(f.matrix.yy) << ','
          << fmt(f.matrix.trace_inverse()) << '\n';
    }
  triphase::atomic_write(out / "fisher_scan.csv", csv.str());
  std::cout << "wrote " << (out / "fisher_scan.csv").string() << "\n";
  return 0;
}

int cmd_min_crb(const CommonOpts& opts, int grid) {
  auto cfg = load_config(opts);
  auto dev = triphase::load_device(cfg);
  cfg.finish();

  auto crb = triphase::min_trace_inverse_fisher(dev, grid);
  std::cout << "min Tr(F^-1) = " << fmt(crb.value) << "\n"
            << "minimizers (" << crb.minimizers.size() << "):\n";
  for (auto m : crb.minimizers)
    std::cout << "  (" << fmt(m.phi1) << ", " << fmt(m.phi2) << ")\n";
  return 0;
}

int cmd_posterior_snapshot(const CommonOpts& opts, double phi1, double phi2, int probes,
                           long run_index) {
  auto cfg = load_config(opts);
  auto exp = triphase::load_experiment(cfg);
  cfg.finish();
  if (probes > 0) exp.probes = probes;
  fs::path out = resolve_out_dir(opts);
  fs::create_directories(out);

  // Re-run the estimation loop and keep the cloud at the end.
  auto ctx = triphase::detail::make_run_context(exp);
  triphase::ParticleCloud cloud = triphase::init_uniform_grid(exp.particles);
  triphase::PhaseVector truth{phi1, phi2};
  for (int n = 1; n <= exp.probes; ++n) {
    auto rng = triphase::make_rng(exp.seed, {static_cast<std::uint64_t>(run_index), 0,
                                             static_cast<std::uint64_t>(n)});
    auto controls = triphase::select_controls(exp.policy, n, cloud, ctx.lik,
                                              ctx.delta_star, rng);
    int outcome = triphase::simulate_outcome(ctx.lik, truth, controls, rng);
    triphase::bayes_update(cloud, outcome, controls, ctx.lik);
    if (triphase::needs_resample(cloud, exp.resample))
      triphase::liu_west_resample(cloud, exp.resample, rng);
  }
  triphase::atomic_write(out / "posterior.csv", triphase::cloud_csv(cloud));
  auto mean = triphase::posterior_mean(cloud);
  std::cout << "posterior mean=(" << fmt(mean.phi1) << ", " << fmt(mean.phi2) << ")\n"
            << "wrote " << (out / "posterior.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive Bayesian two-phase estimation in a three-mode interferometer"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* campaign = app.add_subcommand("campaign", "run a Monte Carlo estimation campaign");
  add_common(campaign, opts);

  auto* run = app.add_subcommand("run", "run a single estimation and dump its trace");
  add_common(run, opts);
  double phi1 = 0.0, phi2 = 0.0;
  long run_index = 0;
  run->add_option("--phi1", phi1, "true phase 1 (radians)")->required();
  run->add_option("--phi2", phi2, "true phase 2 (radians)")->required();
  run->add_option("--run-index", run_index, "index selecting the random stream");

  auto* scan = app.add_subcommand("fisher-scan", "tabulate the Fisher matrix over the torus");
  add_common(scan, opts);
  int scan_grid = 60;
  scan->add_option("--grid", scan_grid, "grid points per axis");

  auto* mincrb = app.add_subcommand("min-crb", "minimum of Tr(F^-1) and its working points");
  add_common(mincrb, opts);
  int crb_grid = 180;
  mincrb->add_option("--grid", crb_grid, "scan grid points per axis");
  std::string device_preset;
  mincrb->add_option("--device", device_preset, "device preset ('ideal')");

  auto* snapshot =
      app.add_subcommand("posterior-snapshot", "dump the particle cloud after a run");
  add_common(snapshot, opts);
  double sphi1 = 0.0, sphi2 = 0.0;
  int sprobes = 0;
  long srun_index = 0;
  snapshot->add_option("--phi1", sphi1, "true phase 1 (radians)")->required();
  snapshot->add_option("--phi2", sphi2, "true phase 2 (radians)")->required();
  snapshot->add_option("--probes", sprobes, "probe count (default: campaign.probes)");
  snapshot->add_option("--run-index", srun_index, "index selecting the random stream");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (campaign->parsed()) return cmd_campaign(opts);
    if (run->parsed()) return cmd_run(opts, phi1, phi2, run_index);
    if (scan->parsed()) return cmd_fisher_scan(opts, scan_grid);
    if (mincrb->parsed()) {
      if (!device_preset.empty() && device_preset != "ideal") {
        std::cerr << "error: --device: unknown preset '" << device_preset
                  << "' (valid: ideal)\n";
        return 1;
      }
      return cmd_min_crb(opts, crb_grid);
    }
    if (snapshot->parsed())
      return cmd_posterior_snapshot(opts, sphi1, sphi2, sprobes, srun_index);
  } catch (const triphase::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
