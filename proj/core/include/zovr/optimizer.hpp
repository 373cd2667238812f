#ifndef ZOVR_OPTIMIZER_HPP
#define ZOVR_OPTIMIZER_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zovr/estimator.hpp"
#include "zovr/objective.hpp"
#include "zovr/sampling.hpp"

namespace zovr {

// Variance-reduced block estimate
//   v = (1/|B|) sum_{i in B} G_J(x_hat; f_i)
//     - (1/|B|) sum_{i in B} G_J(x_tilde; f_i)
//     + restrict_snapshot(g_mu, J)
// with every term on the common N/Y scale. When x_hat equals the
// snapshot point elementwise the two batch terms cancel bitwise and v
// reduces to the snapshot restriction.
struct VREstimate {
  std::vector<std::size_t> block;
  std::vector<double> values;
  std::vector<std::size_t> batch;
  std::size_t epoch = 0;
  std::size_t iter = 0;
};

enum class Algorithm { kDszovr, kAsyszo };
enum class TimingMode { kNone, kReal };

struct RunConfig {
  Algorithm algorithm = Algorithm::kDszovr;
  double gamma = 1e-3;          // constant step size (dszovr)
  std::size_t epochs = 1;       // S
  std::size_t inner_iters = 1;  // m; 0 is a degenerate no-op edge
  std::size_t batch_size = 1;   // b
  std::size_t block_size = 1;   // Y
  SmoothingSchedule mu;
  std::uint64_t seed = 0;
  double baseline_gamma0 = 0.1;  // asyszo: gamma_t = gamma0/(t+1)^decay
  double baseline_decay = 0.5;
  std::size_t trace_cadence = 1;  // record every k-th inner iteration
  ParameterVector x0;             // empty = origin
  TimingMode timing = TimingMode::kNone;

  void validate(const FiniteSumObjective& obj) const;
  ParameterVector initial_point(std::size_t n) const;
};

struct TraceRecord {
  std::size_t epoch = 0;
  std::size_t inner_iter = 0;
  std::size_t global_iter = 0;
  double f = 0.0;
  double grad_norm_sq = 0.0;
  std::uint64_t evals = 0;
  double wall_ms = 0.0;
};

struct Trace {
  std::vector<TraceRecord> records;

  static constexpr const char* kCsvHeader =
      "epoch,iter,global_iter,f,grad_norm_sq,evals,wall_ms";
  std::string to_csv() const;
  static Trace from_csv_file(const std::string& path);
  void write_csv_file(const std::string& path) const;
};

enum class RunStatus { kCompleted, kDiverged, kAborted };

struct RunResult {
  ParameterVector x;
  Trace trace;
  RunStatus status = RunStatus::kCompleted;
  std::string message;
};

inline constexpr double kDivergenceGuard = 1e12;

// Squared norm of the telemetry gradient: analytic when the objective
// provides one, dense central differences otherwise. Never routed
// through a counting wrapper; measurement must not move the evaluation
// budget of the algorithm under test.
double telemetry_grad_norm_sq(const FiniteSumObjective& obj,
                              std::span<const double> x,
                              const SmoothingSchedule& mu);

// Exactly 4*|batch|*|block| component evaluations. Throws
// std::logic_error when the snapshot's epoch does not match.
VREstimate vr_estimate(const FiniteSumObjective& obj,
                       std::span<const double> x_hat,
                       const SnapshotGradient& snap,
                       std::span<const std::size_t> batch,
                       std::span<const std::size_t> block,
                       const SmoothingSchedule& mu, std::size_t epoch,
                       std::size_t iter);

// x'_j = x_j - gamma * v_j on the block, x'_j = x_j elsewhere.
ParameterVector apply_update(const ParameterVector& x, const VREstimate& v,
                             double gamma);
ParameterVector apply_update(const ParameterVector& x, const BlockGradient& g,
                             double gamma);

// Sequential doubly stochastic zeroth-order descent with variance
// reduction: per epoch one snapshot pass, then m sample/estimate/update
// inner iterations.
RunResult run_dszovr(const FiniteSumObjective& obj, const RunConfig& cfg);

// Single-loop baseline: per iteration one component, one block, step
// gamma_t = gamma0/(t+1)^decay, no snapshots.
RunResult run_asyszo_sequential(const FiniteSumObjective& obj,
                                const RunConfig& cfg);

}  // namespace zovr

#endif  // ZOVR_OPTIMIZER_HPP
