#ifndef ZOVR_HARNESS_HPP
#define ZOVR_HARNESS_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>

#include "zovr/async.hpp"
#include "zovr/objective.hpp"
#include "zovr/optimizer.hpp"
#include "zovr/theory.hpp"

namespace zovr {

enum class Backend { kSequential, kAsync, kSimulated };

// Fully resolved experiment description: every field carries either the
// config file's value or its default, and dumps reproduce the run with
// no external state.
struct ExperimentConfig {
  // problem
  std::string objective = "ridge";  // ridge | logistic | lssvm
  std::size_t l = 500;
  std::size_t n = 20;
  double lambda = 0.01;
  std::uint64_t data_seed = 42;
  double label_noise = 0.1;
  std::string data_csv;  // when set, loaded instead of synthetic data

  // Scalar or comma-separated per-coordinate radii; materialized into
  // run.mu once the problem dimension is known.
  std::string mu_spec = "0.0001";
  RunConfig run;

  Backend backend = Backend::kSequential;
  std::size_t threads = 2;        // async backend
  DelayScenario scenario;         // simulated backend
  std::string schedule_file;

  // theory
  bool theory = false;
  double alpha = 0.5;
  double u0 = 0.1;
  double L = 0.0;        // 0 = estimate empirically
  double L_tilde = 0.0;
  double L_hat = 0.0;
  std::size_t estimate_trials = 200;

  std::string out = "runs/run";
};

// Flat "key = value" file with '#' comments. Unknown keys, missing
// required keys and constraint violations name the key (and line).
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin);
// Canonical resolved dump; load(dump(cfg)) is the identity.
std::string dump_config(const ExperimentConfig& cfg);

std::unique_ptr<FiniteSumObjective> build_objective(
    const ExperimentConfig& cfg);
SmoothingSchedule resolve_mu(const ExperimentConfig& cfg, std::size_t n);

// Analysis settings for the configured run: tau comes from the scenario
// for the simulated backend, zero otherwise.
AnalysisSettings analysis_settings(const ExperimentConfig& cfg,
                                   const SmoothnessConstants& constants);
SmoothnessConstants resolve_constants(const ExperimentConfig& cfg,
                                      const FiniteSumObjective& obj);

enum class RateMetric { kGradSqMin, kGradSqAvg };
enum class RateAxis { kIterations, kEvaluations };

struct RateFit {
  double slope = 0.0;
  double ci = 0.0;  // 95% half-width
  std::size_t points = 0;
};

// Least-squares slope of log(metric) vs log(x) over the trace window
// that survives burn-in (first 10% of the x-range by default). Needs at
// least 10 points and strictly positive metric values.
RateFit fit_rate(const Trace& trace, RateMetric metric, RateAxis axis,
                 double burn_in_fraction = 0.1);

struct RateReport {
  RateFit min_vs_iter;
  RateFit avg_vs_iter;
  RateFit min_vs_evals;
  RateFit avg_vs_evals;
  double final_f = 0.0;
  double final_grad_norm_sq = 0.0;
  std::string algorithm;

  std::string to_report() const;
};

RateReport rate_report(const Trace& trace, const std::string& algorithm);

// CLI exit-status contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;   // aborted runs, replay mismatch
inline constexpr int kExitDiverged = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitConfig = 4;

struct ExperimentResult {
  int exit_code = kExitOk;
  std::string message;  // one-line diagnosis when nonzero
  std::string out_dir;
  RateReport rates;
  bool rates_valid = false;
  ParameterVector x_final;
};

// Runs the configured experiment and writes the self-describing run
// directory: config.resolved, trace.csv, rates.txt, plot-data files,
// update_log.csv for the simulated backend and certificate.txt when
// theory is on. Honors the ZOVR_OUT environment variable as output
// root for relative paths.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Theory-only entry point: writes certificate.txt (and returns the
// report text). Throws InfeasibleSettingsError when the configured
// gamma/tau violate the variance-bound precondition.
std::string certify(const ExperimentConfig& cfg);

// Replays <rundir>/update_log.csv against <rundir>/config.resolved.
ReplayReport replay_run_directory(const std::string& run_dir);

std::string resolve_out_dir(const std::string& out);

}  // namespace zovr

#endif  // ZOVR_HARNESS_HPP
