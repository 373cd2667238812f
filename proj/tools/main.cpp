#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zovr/error.hpp"
#include "zovr/harness.hpp"
#include "zovr/textio.hpp"

namespace {

struct Overrides {
  std::int64_t seed = -1;
  std::int64_t threads = -1;
  std::string out;
};

void apply(zovr::ExperimentConfig& cfg, const Overrides& ov) {
  if (ov.seed >= 0) cfg.run.seed = static_cast<std::uint64_t>(ov.seed);
  if (ov.threads >= 1) cfg.threads = static_cast<std::size_t>(ov.threads);
  if (!ov.out.empty()) cfg.out = ov.out;
}

int cmd_run(const std::string& config_path, const Overrides& ov) {
  zovr::ExperimentConfig cfg = zovr::load_config(config_path);
  apply(cfg, ov);
  zovr::ExperimentResult res = zovr::run_experiment(cfg);
  if (res.exit_code != zovr::kExitOk) {
    std::fprintf(stderr, "zovr: %s\n", res.message.c_str());
  } else {
    std::printf("run complete: %s\n", res.out_dir.c_str());
    if (res.rates_valid) {
      std::printf("final_f = %s\nfinal_grad_norm_sq = %s\n",
                  zovr::format_double(res.rates.final_f).c_str(),
                  zovr::format_double(res.rates.final_grad_norm_sq).c_str());
    }
  }
  return res.exit_code;
}

int cmd_certify(const std::string& config_path, const Overrides& ov) {
  zovr::ExperimentConfig cfg = zovr::load_config(config_path);
  apply(cfg, ov);
  std::string report = zovr::certify(cfg);
  std::fputs(report.c_str(), stdout);
  return zovr::kExitOk;
}

int cmd_replay(const std::string& run_dir) {
  zovr::ReplayReport rep = zovr::replay_run_directory(run_dir);
  std::printf("ok = %s\n", rep.ok ? "true" : "false");
  std::printf("entries_checked = %zu\n", rep.entries_checked);
  std::printf("max_reconstruction_error = %s\n",
              zovr::format_double(rep.max_reconstruction_error).c_str());
  std::printf("max_staleness = %zu\n", rep.max_staleness);
  if (!rep.ok) {
    std::printf("first_bad_t = %zu\n", rep.first_bad_t);
    std::printf("detail = %s\n", rep.detail.c_str());
    return zovr::kExitFailure;
  }
  return zovr::kExitOk;
}

int cmd_rates(const std::vector<std::string>& traces) {
  bool first = true;
  for (const auto& path : traces) {
    zovr::Trace t = zovr::Trace::from_csv_file(path);
    zovr::RateReport rep = zovr::rate_report(t, path);
    if (!first) std::printf("\n");
    first = false;
    std::printf("trace = %s\n%s", path.c_str(), rep.to_report().c_str());
  }
  return zovr::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zeroth-order doubly stochastic optimization benchmark"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path;
  std::string run_dir;
  std::vector<std::string> traces;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", ov.seed, "override the run seed");
    sub->add_option("--threads", ov.threads, "override the worker count");
    sub->add_option("--out", ov.out, "override the output directory");
  };

  CLI::App* run = app.add_subcommand("run", "run an experiment");
  run->add_option("config", config_path, "experiment config file")
      ->required();
  add_common(run);

  CLI::App* certify =
      app.add_subcommand("certify", "evaluate the analysis constants only");
  certify->add_option("config", config_path, "experiment config file")
      ->required();
  add_common(certify);

  CLI::App* replay =
      app.add_subcommand("replay", "verify a simulated run directory");
  replay->add_option("rundir", run_dir, "run directory to verify")
      ->required();

  CLI::App* rates = app.add_subcommand("rates", "fit rate slopes to traces");
  rates->add_option("traces", traces, "trace CSV files")
      ->required()
      ->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : zovr::kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, ov);
    if (certify->parsed()) return cmd_certify(config_path, ov);
    if (replay->parsed()) return cmd_replay(run_dir);
    if (rates->parsed()) return cmd_rates(traces);
  } catch (const zovr::InfeasibleSettingsError& e) {
    std::fprintf(stderr, "zovr: infeasible settings: %s\n", e.what());
    return zovr::kExitInfeasible;
  } catch (const zovr::ConfigError& e) {
    std::fprintf(stderr, "zovr: config error: %s\n", e.what());
    return zovr::kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "zovr: %s\n", e.what());
    return zovr::kExitFailure;
  }
  return zovr::kExitConfig;
}
