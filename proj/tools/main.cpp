#include <iostream>

#include <CLI11.hpp>

#include "pipeline.hpp"

namespace pl = leosop::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"Beacon estimation and Doppler positioning with LEO signals of opportunity"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  pl::RunOptions opts;
  app.add_option("-c,--config", config_path, "JSON configuration file")->required();
  app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("-o,--out", opts.out_dir, "Output directory")->capture_default_str();
  app.add_flag("-v,--verbose", opts.verbose, "Progress messages on stderr");

  auto* simulate = app.add_subcommand("simulate", "Synthesize captures, truth logs and ephemerides");
  auto* estimate = app.add_subcommand("estimate-beacon", "Estimate the beacon and resolve its ambiguities");
  auto* acquire = app.add_subcommand("acquire", "Doppler acquisition and SV association");
  auto* solve = app.add_subcommand("solve", "Doppler positioning");
  auto* report = app.add_subcommand("report", "Collect figure data under report/");
  auto* all = app.add_subcommand("run-all", "Every stage in order");
  for (auto* s : {simulate, estimate, acquire, solve, report, all}) s->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    pl::PipelineConfig cfg = pl::load_config(config_path);
    if (seed) cfg.seed = *seed;
    const bool every = all->parsed();
    if (every || simulate->parsed()) {
      const auto s = pl::run_simulate(cfg, opts);
      std::cout << "simulated " << s.frames << " frames (" << s.active << " active)\n";
    }
    if (every || estimate->parsed()) pl::run_estimate_beacon(cfg, opts);
    if (every || acquire->parsed()) pl::run_acquire(cfg, opts);
    if (every || solve->parsed()) pl::run_solve(cfg, opts);
    if (every || report->parsed()) pl::run_report(cfg, opts);
  } catch (const leosop::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return pl::kConfigError;
  } catch (const pl::UnresolvedBeaconError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pl::kUnresolvedBeacon;
  } catch (const pl::SolveError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pl::kSolveFailed;
  } catch (const leosop::GeometryError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pl::kSolveFailed;
  } catch (const leosop::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return pl::kIoError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return pl::kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return pl::kOk;
}
