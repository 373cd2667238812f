#ifndef ZOVR_SRC_RUN_INTERNAL_HPP
#define ZOVR_SRC_RUN_INTERNAL_HPP

#include <chrono>
#include <cmath>
#include <span>

#include "zovr/objective.hpp"
#include "zovr/optimizer.hpp"

namespace zovr::internal {

using Clock = std::chrono::steady_clock;

inline double infinity_norm(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

inline bool iterate_out_of_range(std::span<const double> x) {
  double m = infinity_norm(x);
  return !std::isfinite(m) || m > kDivergenceGuard;
}

// Trace assembly shared by the sequential drivers, the simulator and
// the async runtime. Telemetry goes through the raw objective so the
// evaluation counter only sees the algorithm's own work.
class TraceBuilder {
 public:
  TraceBuilder(const FiniteSumObjective& raw, const CountingObjective& counted,
               const SmoothingSchedule& mu, TimingMode timing)
      : raw_(raw),
        counted_(counted),
        mu_(mu),
        timing_(timing),
        start_(Clock::now()) {}

  // Returns false when the objective value trips the divergence guard.
  bool record(Trace& trace, std::size_t epoch, std::size_t inner,
              std::size_t global, std::span<const double> x) {
    TraceRecord r;
    r.epoch = epoch;
    r.inner_iter = inner;
    r.global_iter = global;
    r.f = raw_.value(x);
    r.grad_norm_sq = telemetry_grad_norm_sq(raw_, x, mu_);
    r.evals = counted_.evaluations();
    if (timing_ == TimingMode::kReal) {
      r.wall_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - start_)
              .count();
    }
    trace.records.push_back(r);
    return std::isfinite(r.f) && std::abs(r.f) <= kDivergenceGuard;
  }

 private:
  const FiniteSumObjective& raw_;
  const CountingObjective& counted_;
  const SmoothingSchedule& mu_;
  TimingMode timing_;
  Clock::time_point start_;
};

}  // namespace zovr::internal

#endif  // ZOVR_SRC_RUN_INTERNAL_HPP
