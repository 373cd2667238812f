#include "zovr/async.hpp"

#include <barrier>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "zovr/error.hpp"
#include "zovr/sampling.hpp"
#include "zovr/textio.hpp"
#include "run_internal.hpp"

namespace zovr {

static_assert(std::atomic<double>::is_always_lock_free,
              "per-coordinate atomic updates must be lock-free");

using internal::iterate_out_of_range;
using internal::TraceBuilder;

namespace {

constexpr double kReplayTolerance = 1e-12;
// The scenario draws live on their own stream so they never perturb the
// algorithm's sample sequence.
constexpr std::uint64_t kScenarioStreamId = 0x5ced5cedULL;

std::string join_indices(std::span<const std::size_t> v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ';';
    out += std::to_string(v[k]);
  }
  return out;
}

// Realizes K(t) depths and B_t masks from a scenario: one delay draw
// then one mask draw per iteration, in iteration order.
class ScenarioRealization {
 public:
  ScenarioRealization(const DelayScenario& sc, std::size_t block_size)
      : sc_(sc), y_(block_size), rng_(sc.seed, kScenarioStreamId) {}

  std::size_t delay_at(std::size_t t) {
    switch (sc_.delay_law) {
      case DelayLaw::kNone:
        return 0;
      case DelayLaw::kFixed:
        return sc_.fixed_delay;
      case DelayLaw::kUniform:
        return static_cast<std::size_t>(rng_.next_below(sc_.tau + 1));
      case DelayLaw::kSchedule:
        return entry_at(t).delay;
    }
    return 0;
  }

  std::vector<std::uint8_t> mask_at(std::size_t t) {
    std::vector<std::uint8_t> mask(y_, 1);
    switch (sc_.mask_policy) {
      case MaskPolicy::kAllOnes:
        break;
      case MaskPolicy::kRandom:
        for (auto& bit : mask) {
          bit = rng_.next_double() < sc_.p_keep ? 1 : 0;
        }
        break;
      case MaskPolicy::kSchedule: {
        const auto& bits = entry_at(t).mask_bits;
        if (bits.size() != y_) {
          throw ConfigError("schedule line " + std::to_string(t) + ": " +
                            std::to_string(bits.size()) +
                            " mask bits, block size is " + std::to_string(y_));
        }
        for (std::size_t k = 0; k < y_; ++k) mask[k] = bits[k] == '1' ? 1 : 0;
        break;
      }
    }
    return mask;
  }

 private:
  const ScheduleEntry& entry_at(std::size_t t) {
    if (t >= sc_.schedule.size()) {
      throw ConfigError("delay schedule ends at iteration " +
                        std::to_string(sc_.schedule.size()) +
                        " but iteration " + std::to_string(t) + " was reached");
    }
    return sc_.schedule[t];
  }

  const DelayScenario& sc_;
  std::size_t y_;
  Pcg64 rng_;
};

// x_hat = x plus the still-pending (mask = 1) deltas of the last
// `depth` updates; updates subtract, so un-applying adds them back.
void reconstruct_read(const ParameterVector& x, const UpdateLog& log,
                      std::size_t t_global, std::size_t depth,
                      ParameterVector& x_hat) {
  x_hat = x;
  for (std::size_t t = t_global - depth; t < t_global; ++t) {
    const UpdateLogEntry& e = log.entries[t];
    for (std::size_t k = 0; k < e.block.size(); ++k) {
      if (e.mask[k]) x_hat[e.block[k]] += e.delta[k];
    }
  }
}

}  // namespace

void DelayScenario::validate() const {
  if (delay_law == DelayLaw::kNone && mask_policy != MaskPolicy::kAllOnes) {
    throw ConfigError(
        "mask policy must be all-ones when the delay law is none");
  }
  if (delay_law == DelayLaw::kFixed && fixed_delay > tau) {
    throw ConfigError("fixed delay " + std::to_string(fixed_delay) +
                      " exceeds tau = " + std::to_string(tau));
  }
  if (mask_policy == MaskPolicy::kRandom &&
      !(p_keep >= 0.0 && p_keep <= 1.0)) {
    throw ConfigError("p_keep must lie in [0, 1]");
  }
  const bool needs_schedule =
      delay_law == DelayLaw::kSchedule || mask_policy == MaskPolicy::kSchedule;
  if (needs_schedule) {
    if (schedule.empty()) throw ConfigError("scenario needs a schedule file");
    for (std::size_t t = 0; t < schedule.size(); ++t) {
      if (schedule[t].t != t) {
        throw ConfigError("schedule entries must cover t = 0,1,... in order; "
                          "entry " +
                          std::to_string(t) + " has t = " +
                          std::to_string(schedule[t].t));
      }
      if (delay_law == DelayLaw::kSchedule && schedule[t].delay > tau) {
        throw ConfigError("schedule delay " +
                          std::to_string(schedule[t].delay) +
                          " at iteration " + std::to_string(t) +
                          " exceeds tau = " + std::to_string(tau));
      }
    }
  }
}

std::vector<ScheduleEntry> load_delay_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schedule '" + path + "'");
  std::vector<ScheduleEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto cells = split(s, ',');
    if (cells.size() != 3) {
      throw ConfigError("schedule '" + path + "' line " +
                        std::to_string(lineno) +
                        ": expected t,delay,maskbits");
    }
    const std::string ctx = path + " line " + std::to_string(lineno);
    ScheduleEntry e;
    e.t = static_cast<std::size_t>(parse_double(cells[0], ctx));
    e.delay = static_cast<std::size_t>(parse_double(cells[1], ctx));
    e.mask_bits = std::string(trim(cells[2]));
    for (char c : e.mask_bits) {
      if (c != '0' && c != '1') {
        throw ConfigError(ctx + ": mask bits must be 0/1 characters");
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

void UpdateLog::write_csv_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << kCsvHeader << '\n';
  for (const auto& e : entries) {
    out << e.t << ',' << join_indices(e.block) << ',';
    for (std::size_t k = 0; k < e.delta.size(); ++k) {
      if (k) out << ';';
      out << format_double(e.delta[k]);
    }
    out << ',';
    for (auto bit : e.mask) out << (bit ? '1' : '0');
    out << '\n';
  }
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

UpdateLog UpdateLog::from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open update log '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) {
    throw ConfigError("update log '" + path + "': bad header");
  }
  UpdateLog log;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = trim(line);
    if (s.empty()) continue;
    auto cells = split(s, ',');
    if (cells.size() != 4) {
      throw ConfigError("update log '" + path + "' line " +
                        std::to_string(lineno) + ": expected 4 columns");
    }
    const std::string ctx = path + " line " + std::to_string(lineno);
    UpdateLogEntry e;
    e.t = static_cast<std::size_t>(parse_double(cells[0], ctx));
    for (auto part : split(cells[1], ';')) {
      e.block.push_back(static_cast<std::size_t>(parse_double(part, ctx)));
    }
    for (auto part : split(cells[2], ';')) {
      e.delta.push_back(parse_double(part, ctx));
    }
    for (char c : trim(cells[3])) {
      if (c != '0' && c != '1') {
        throw ConfigError(ctx + ": mask bits must be 0/1 characters");
      }
      e.mask.push_back(c == '1' ? 1 : 0);
    }
    if (e.block.size() != e.delta.size() || e.block.size() != e.mask.size()) {
      throw ConfigError(ctx + ": block/delta/mask lengths differ");
    }
    log.entries.push_back(std::move(e));
  }
  return log;
}

SimResult run_simulated(const FiniteSumObjective& obj, const RunConfig& cfg,
                        const DelayScenario& scenario) {
  cfg.validate(obj);
  scenario.validate();
  const std::size_t l = obj.num_components();
  const std::size_t n = obj.dimension();
  const std::size_t m = cfg.inner_iters;

  CountingObjective counted(obj);
  SamplerState sampler(cfg.seed, /*stream_id=*/0);
  ScenarioRealization real(scenario, cfg.block_size);
  TraceBuilder builder(obj, counted, cfg.mu, cfg.timing);

  SimResult res;
  res.x = cfg.initial_point(n);
  builder.record(res.trace, 0, 0, 0, res.x);
  ParameterVector x_hat(n);

  for (std::size_t s = 0; s < cfg.epochs; ++s) {
    SnapshotGradient snap = full_smoothed_gradient(counted, res.x, cfg.mu, s);
    for (std::size_t t = 0; t < m; ++t) {
      const std::size_t t_global = s * m + t;
      const std::size_t d_raw = real.delay_at(t_global);
      if (d_raw > scenario.tau) {
        throw ConfigError("realized delay " + std::to_string(d_raw) +
                          " exceeds tau = " + std::to_string(scenario.tau));
      }
      // Staleness never crosses the epoch barrier.
      const std::size_t depth = std::min(d_raw, t);
      res.max_realized_staleness =
          std::max(res.max_realized_staleness, depth);

      reconstruct_read(res.x, res.log, t_global, depth, x_hat);
      auto batch = sampler.sample_minibatch(l, cfg.batch_size);
      auto block = sampler.sample_block(n, cfg.block_size);
      VREstimate v =
          vr_estimate(counted, x_hat, snap, batch, block, cfg.mu, s, t);

      UpdateLogEntry entry;
      entry.t = t_global;
      entry.block = std::move(block);
      entry.mask = real.mask_at(t_global);
      entry.delta.resize(entry.block.size());
      for (std::size_t k = 0; k < entry.block.size(); ++k) {
        entry.delta[k] = cfg.gamma * v.values[k];
        res.x[entry.block[k]] -= entry.delta[k];
      }
      res.log.entries.push_back(std::move(entry));

      if (iterate_out_of_range(res.x)) {
        builder.record(res.trace, s, t + 1, t_global + 1, res.x);
        res.status = RunStatus::kDiverged;
        res.message = "iterate out of range at epoch " + std::to_string(s) +
                      " inner iteration " + std::to_string(t);
        return res;
      }
      const bool epoch_end = (t + 1 == m);
      if (!epoch_end && cfg.trace_cadence > 0 &&
          (t + 1) % cfg.trace_cadence == 0) {
        if (!builder.record(res.trace, s, t + 1, t_global + 1, res.x)) {
          res.status = RunStatus::kDiverged;
          res.message =
              "objective out of range at epoch " + std::to_string(s);
          return res;
        }
      }
    }
    if (m > 0 && !builder.record(res.trace, s, m, (s + 1) * m, res.x)) {
      res.status = RunStatus::kDiverged;
      res.message = "objective out of range at epoch " + std::to_string(s);
      return res;
    }
  }
  return res;
}

ReplayReport replay_check(const FiniteSumObjective& obj, const RunConfig& cfg,
                          const DelayScenario& scenario,
                          const UpdateLog& log) {
  cfg.validate(obj);
  scenario.validate();
  const std::size_t l = obj.num_components();
  const std::size_t n = obj.dimension();
  const std::size_t m = cfg.inner_iters;
  if (m == 0) {
    ReplayReport rep;
    rep.ok = log.entries.empty();
    if (!rep.ok) rep.detail = "log has entries but m = 0";
    return rep;
  }

  SamplerState sampler(cfg.seed, /*stream_id=*/0);
  ScenarioRealization real(scenario, cfg.block_size);

  ReplayReport rep;
  ParameterVector x = cfg.initial_point(n);
  ParameterVector x_hat(n);
  SnapshotGradient snap;

  auto fail = [&](std::size_t t, const std::string& why) {
    rep.ok = false;
    rep.first_bad_t = t;
    rep.detail = why;
  };

  for (std::size_t g = 0; g < log.entries.size(); ++g) {
    const std::size_t s = g / m;
    const std::size_t t = g % m;
    if (t == 0) snap = full_smoothed_gradient(obj, x, cfg.mu, s);

    const UpdateLogEntry& e = log.entries[g];
    if (e.t != g) {
      fail(g, "entry " + std::to_string(g) + " carries t = " +
                  std::to_string(e.t));
      break;
    }
    const std::size_t d_raw = real.delay_at(g);
    if (d_raw > scenario.tau) {
      fail(g, "realized delay " + std::to_string(d_raw) + " exceeds tau");
      break;
    }
    const std::size_t depth = std::min(d_raw, t);
    rep.max_staleness = std::max(rep.max_staleness, depth);

    reconstruct_read(x, log, g, depth, x_hat);
    auto batch = sampler.sample_minibatch(l, cfg.batch_size);
    auto block = sampler.sample_block(n, cfg.block_size);
    if (block != e.block) {
      fail(g, "block differs from the sampler's sequence");
      break;
    }
    VREstimate v = vr_estimate(obj, x_hat, snap, batch, block, cfg.mu, s, t);
    auto mask = real.mask_at(g);
    if (mask != e.mask) {
      fail(g, "mask differs from the scenario's sequence");
      break;
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < e.block.size(); ++k) {
      worst = std::max(worst,
                       std::abs(cfg.gamma * v.values[k] - e.delta[k]));
    }
    rep.max_reconstruction_error =
        std::max(rep.max_reconstruction_error, worst);
    if (worst > kReplayTolerance) {
      fail(g, "delta deviates from the recomputed update by " +
                  format_double(worst));
      break;
    }
    for (std::size_t k = 0; k < e.block.size(); ++k) {
      x[e.block[k]] -= e.delta[k];
    }
    ++rep.entries_checked;
  }
  return rep;
}

AsyncResult run_async(const FiniteSumObjective& obj, const RunConfig& cfg,
                      std::size_t workers) {
  cfg.validate(obj);
  if (workers < 1) throw ConfigError("worker count must be >= 1");
  const std::size_t l = obj.num_components();
  const std::size_t n = obj.dimension();
  const std::size_t m = cfg.inner_iters;
  const std::size_t epochs = cfg.epochs;

  CountingObjective counted(obj);
  SharedIterate shared(cfg.initial_point(n));
  ParameterVector snapshot_x(n);
  SnapshotGradient snap;
  snap.g_mu.assign(n, 0.0);

  // One ticket counter per phase per epoch; each is consumed once, so
  // no cross-phase resets are needed.
  std::vector<std::atomic<std::size_t>> ticket_copy(epochs);
  std::vector<std::atomic<std::size_t>> ticket_grad(epochs);
  std::vector<std::atomic<std::size_t>> ticket_inner(epochs);
  std::atomic<std::uint64_t> updates_this_epoch{0};
  std::atomic<bool> failed{false};
  std::atomic<bool> stop{false};
  std::string failure_message;
  std::mutex failure_mutex;  // touched only when a worker throws

  AsyncResult res;
  TraceBuilder builder(obj, counted, cfg.mu, cfg.timing);
  {
    ParameterVector x0v;
    shared.read_vector(x0v);
    builder.record(res.trace, 0, 0, 0, x0v);
  }

  std::barrier<> sync(static_cast<std::ptrdiff_t>(workers));

  auto register_failure = [&](const char* where) {
    std::lock_guard<std::mutex> g(failure_mutex);
    if (!failed.load(std::memory_order_relaxed)) {
      try {
        throw;  // rethrow current exception to capture its message
      } catch (const std::exception& e) {
        failure_message = std::string(where) + ": " + e.what();
      } catch (...) {
        failure_message = std::string(where) + ": unknown error";
      }
      failed.store(true, std::memory_order_release);
    }
  };

  // Runs serially in worker 0 while everyone else waits at the barrier.
  auto epoch_end = [&](std::size_t s) {
    shared.bump_version();
    res.epoch_updates.push_back(
        updates_this_epoch.exchange(0, std::memory_order_relaxed));
    if (failed.load(std::memory_order_acquire)) {
      res.status = RunStatus::kAborted;
      res.message = failure_message;
      stop.store(true, std::memory_order_release);
      return;
    }
    if (m == 0) return;
    ParameterVector xv;
    shared.read_vector(xv);
    if (iterate_out_of_range(xv) ||
        !builder.record(res.trace, s, m, (s + 1) * m, xv)) {
      res.status = RunStatus::kDiverged;
      res.message = "iterate or objective out of range at epoch " +
                    std::to_string(s);
      stop.store(true, std::memory_order_release);
    }
  };

  auto worker_fn = [&](std::size_t w) {
    SamplerState sampler(cfg.seed, w);
    ParameterVector x_hat(n);
    for (std::size_t s = 0; s < epochs; ++s) {
      // All workers observe the same post-barrier value.
      if (stop.load(std::memory_order_acquire)) return;

      // Snapshot copy, coordinate-atomic reads.
      for (std::size_t j = ticket_copy[s].fetch_add(1); j < n;
           j = ticket_copy[s].fetch_add(1)) {
        snapshot_x[j] = shared.load(j);
      }
      sync.arrive_and_wait();

      if (w == 0) {
        snap.snapshot_x = snapshot_x;
        snap.epoch = s;
      }
      // Full smoothed gradient, cooperative over coordinates. Each
      // coordinate sums components in index order, so the snapshot is
      // identical for any worker count.
      for (std::size_t j = ticket_grad[s].fetch_add(1); j < n;
           j = ticket_grad[s].fetch_add(1)) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
          snap.g_mu[j] =
              snapshot_coordinate(counted, snapshot_x, j, cfg.mu.mu[j]);
        } catch (...) {
          register_failure("snapshot");
        }
      }
      sync.arrive_and_wait();

      // Inner iterations: draw tickets until the epoch's m are spent.
      for (std::size_t t = ticket_inner[s].fetch_add(1); t < m;
           t = ticket_inner[s].fetch_add(1)) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
          shared.read_vector(x_hat);
          auto batch = sampler.sample_minibatch(l, cfg.batch_size);
          auto block = sampler.sample_block(n, cfg.block_size);
          VREstimate v =
              vr_estimate(counted, x_hat, snap, batch, block, cfg.mu, s, t);
          for (std::size_t k = 0; k < block.size(); ++k) {
            shared.subtract(block[k], cfg.gamma * v.values[k]);
          }
          updates_this_epoch.fetch_add(1, std::memory_order_relaxed);
        } catch (...) {
          register_failure("inner iteration");
        }
      }
      sync.arrive_and_wait();

      if (w == 0) epoch_end(s);
      sync.arrive_and_wait();
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(worker_fn, w);
    }
  }

  shared.read_vector(res.x);
  return res;
}

}  // namespace zovr
