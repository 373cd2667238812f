#ifndef ZOVR_ASYNC_HPP
#define ZOVR_ASYNC_HPP

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "zovr/optimizer.hpp"

namespace zovr {

// Shared iterate with per-coordinate atomic cells. Single-coordinate
// loads and read-modify-writes are atomic; whole-vector reads are
// deliberately unsynchronized and may mix coordinates from different
// logical times.
class SharedIterate {
 public:
  explicit SharedIterate(const ParameterVector& init)
      : coords_(init.size()) {
    for (std::size_t j = 0; j < init.size(); ++j) {
      coords_[j].store(init[j], std::memory_order_relaxed);
    }
  }

  std::size_t size() const { return coords_.size(); }

  double load(std::size_t j) const {
    return coords_[j].load(std::memory_order_relaxed);
  }
  void subtract(std::size_t j, double delta) {
    coords_[j].fetch_sub(delta, std::memory_order_relaxed);
  }
  // Inconsistent whole-vector read.
  void read_vector(ParameterVector& out) const {
    out.resize(coords_.size());
    for (std::size_t j = 0; j < coords_.size(); ++j) out[j] = load(j);
  }

  std::uint64_t epoch_version() const {
    return version_.load(std::memory_order_acquire);
  }
  void bump_version() { version_.fetch_add(1, std::memory_order_acq_rel); }

 private:
  std::vector<std::atomic<double>> coords_;
  std::atomic<std::uint64_t> version_{0};
};

enum class DelayLaw { kNone, kFixed, kUniform, kSchedule };
enum class MaskPolicy { kAllOnes, kRandom, kSchedule };

// One line of an adversarial schedule file: "t,delay,maskbits".
struct ScheduleEntry {
  std::size_t t = 0;
  std::size_t delay = 0;
  std::string mask_bits;  // one '0'/'1' char per block coordinate
};

// Bounded-staleness model: every read at iteration t misses the
// masked coordinates of the updates in K(t), a subset of the last tau
// iterations of the current epoch.
struct DelayScenario {
  std::size_t tau = 0;
  DelayLaw delay_law = DelayLaw::kNone;
  std::size_t fixed_delay = 0;  // kFixed
  MaskPolicy mask_policy = MaskPolicy::kAllOnes;
  double p_keep = 1.0;       // kRandom: P(coordinate still pending)
  std::uint64_t seed = 0;    // scenario stream, distinct from the run seed
  std::vector<ScheduleEntry> schedule;

  void validate() const;
};

std::vector<ScheduleEntry> load_delay_schedule(const std::string& path);

// One applied update: t is the global inner-iteration index, delta the
// gamma*v values subtracted on the block, mask the realized diagonal of
// B_t over the block (1 = still pending in later stale reads).
struct UpdateLogEntry {
  std::size_t t = 0;
  std::vector<std::size_t> block;
  std::vector<double> delta;
  std::vector<std::uint8_t> mask;
};

struct UpdateLog {
  std::vector<UpdateLogEntry> entries;

  static constexpr const char* kCsvHeader = "t,J,delta,mask_bits";
  void write_csv_file(const std::string& path) const;
  static UpdateLog from_csv_file(const std::string& path);
};

struct SimResult {
  ParameterVector x;
  Trace trace;
  UpdateLog log;
  RunStatus status = RunStatus::kCompleted;
  std::string message;
  std::size_t max_realized_staleness = 0;
};

struct ReplayReport {
  bool ok = true;
  std::size_t entries_checked = 0;
  std::size_t first_bad_t = 0;  // meaningful when !ok
  std::string detail;
  double max_reconstruction_error = 0.0;
  std::size_t max_staleness = 0;
};

struct AsyncResult {
  ParameterVector x;
  Trace trace;
  RunStatus status = RunStatus::kCompleted;
  std::string message;
  // Applied inner updates per epoch; every entry equals m on a clean
  // run regardless of worker count.
  std::vector<std::uint64_t> epoch_updates;
};

// Lock-free shared-memory runtime with p workers. Per epoch: barrier,
// cooperative snapshot + full smoothed gradient, then workers consume m
// inner-iteration tickets concurrently, each doing an unsynchronized
// vector read, a variance-reduced estimate, and per-coordinate atomic
// subtracts. No mutex guards the iterate; only the epoch barriers and
// per-coordinate atomics synchronize. Trace records at epoch boundaries
// only (the only consistent points).
AsyncResult run_async(const FiniteSumObjective& obj, const RunConfig& cfg,
                      std::size_t workers);

// Deterministic single-threaded execution of the inconsistent-read
// model: at iteration t the read is reconstructed from the true vector
// by adding back the masked deltas of K(t), the estimate is computed at
// that stale read, and the update is then applied in full.
SimResult run_simulated(const FiniteSumObjective& obj, const RunConfig& cfg,
                        const DelayScenario& scenario);

// Recomputes every logged update from scratch (same streams, same
// reconstruction) and verifies the log matches the dynamics. Stops at
// the first offending entry.
ReplayReport replay_check(const FiniteSumObjective& obj, const RunConfig& cfg,
                          const DelayScenario& scenario, const UpdateLog& log);

}  // namespace zovr

#endif  // ZOVR_ASYNC_HPP
