#include "zovr/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "zovr/error.hpp"
#include "zovr/textio.hpp"
#include "run_internal.hpp"

namespace zovr {

using internal::iterate_out_of_range;
using internal::TraceBuilder;

void RunConfig::validate(const FiniteSumObjective& obj) const {
  const std::size_t l = obj.num_components();
  const std::size_t n = obj.dimension();
  if (!(gamma > 0.0)) {
    throw ConfigError("gamma must be positive, got " + format_double(gamma));
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1 || batch_size > l) {
    throw ConfigError("b: batch size " + std::to_string(batch_size) +
                      " out of range [1, " + std::to_string(l) + "]");
  }
  if (block_size < 1 || block_size > n) {
    throw ConfigError("Y: block size " + std::to_string(block_size) +
                      " out of range [1, " + std::to_string(n) + "]");
  }
  mu.validate(n);
  if (!x0.empty() && x0.size() != n) {
    throw ConfigError("x0 has dimension " + std::to_string(x0.size()) +
                      ", objective has " + std::to_string(n));
  }
  if (algorithm == Algorithm::kAsyszo && !(baseline_gamma0 > 0.0)) {
    throw ConfigError("gamma0 must be positive for the baseline");
  }
}

ParameterVector RunConfig::initial_point(std::size_t n) const {
  if (x0.empty()) return ParameterVector(n, 0.0);
  return x0;
}

std::string Trace::to_csv() const {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.epoch);
    out += ',';
    out += std::to_string(r.inner_iter);
    out += ',';
    out += std::to_string(r.global_iter);
    out += ',';
    out += format_double(r.f);
    out += ',';
    out += format_double(r.grad_norm_sq);
    out += ',';
    out += std::to_string(r.evals);
    out += ',';
    out += format_double(r.wall_ms);
    out += '\n';
  }
  return out;
}

void Trace::write_csv_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << to_csv();
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

Trace Trace::from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) {
    throw ConfigError("trace '" + path + "': bad header");
  }
  Trace t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = trim(line);
    if (s.empty()) continue;
    auto cells = split(s, ',');
    if (cells.size() != 7) {
      throw ConfigError("trace '" + path + "' line " + std::to_string(lineno) +
                        ": expected 7 columns");
    }
    const std::string ctx = path + " line " + std::to_string(lineno);
    TraceRecord r;
    r.epoch = static_cast<std::size_t>(parse_double(cells[0], ctx));
    r.inner_iter = static_cast<std::size_t>(parse_double(cells[1], ctx));
    r.global_iter = static_cast<std::size_t>(parse_double(cells[2], ctx));
    r.f = parse_double(cells[3], ctx);
    r.grad_norm_sq = parse_double(cells[4], ctx);
    r.evals = static_cast<std::uint64_t>(parse_double(cells[5], ctx));
    r.wall_ms = parse_double(cells[6], ctx);
    t.records.push_back(r);
  }
  return t;
}

double telemetry_grad_norm_sq(const FiniteSumObjective& obj,
                              std::span<const double> x,
                              const SmoothingSchedule& mu) {
  double s = 0.0;
  if (obj.has_analytic_gradient()) {
    ParameterVector g = obj.analytic_gradient(x);
    for (double v : g) s += v * v;
    return s;
  }
  SnapshotGradient snap = full_smoothed_gradient(obj, x, mu);
  for (double v : snap.g_mu) s += v * v;
  return s;
}

VREstimate vr_estimate(const FiniteSumObjective& obj,
                       std::span<const double> x_hat,
                       const SnapshotGradient& snap,
                       std::span<const std::size_t> batch,
                       std::span<const std::size_t> block,
                       const SmoothingSchedule& mu, std::size_t epoch,
                       std::size_t iter) {
  if (snap.epoch != epoch) {
    throw std::logic_error("vr_estimate: snapshot from epoch " +
                           std::to_string(snap.epoch) +
                           " used in epoch " + std::to_string(epoch));
  }
  if (batch.empty()) throw ConfigError("vr_estimate: empty mini-batch");

  const std::size_t y = block.size();
  std::vector<double> sum_hat(y, 0.0);
  std::vector<double> sum_tilde(y, 0.0);
  for (std::size_t i : batch) {
    BlockGradient at_hat = block_gradient(obj, i, x_hat, block, mu);
    BlockGradient at_tilde =
        block_gradient(obj, i, snap.snapshot_x, block, mu);
    for (std::size_t k = 0; k < y; ++k) {
      sum_hat[k] += at_hat.values[k];
      sum_tilde[k] += at_tilde.values[k];
    }
  }
  BlockGradient anchor = restrict_snapshot(snap, block);

  VREstimate v;
  v.block.assign(block.begin(), block.end());
  v.batch.assign(batch.begin(), batch.end());
  v.epoch = epoch;
  v.iter = iter;
  v.values.resize(y);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < y; ++k) {
    v.values[k] =
        sum_hat[k] * inv_b - sum_tilde[k] * inv_b + anchor.values[k];
  }
  return v;
}

ParameterVector apply_update(const ParameterVector& x, const VREstimate& v,
                             double gamma) {
  ParameterVector out = x;
  for (std::size_t k = 0; k < v.block.size(); ++k) {
    out[v.block[k]] = x[v.block[k]] - gamma * v.values[k];
  }
  return out;
}

ParameterVector apply_update(const ParameterVector& x, const BlockGradient& g,
                             double gamma) {
  ParameterVector out = x;
  for (std::size_t k = 0; k < g.block.size(); ++k) {
    out[g.block[k]] = x[g.block[k]] - gamma * g.values[k];
  }
  return out;
}

RunResult run_dszovr(const FiniteSumObjective& obj, const RunConfig& cfg) {
  cfg.validate(obj);
  const std::size_t l = obj.num_components();
  const std::size_t n = obj.dimension();
  const std::size_t m = cfg.inner_iters;

  CountingObjective counted(obj);
  SamplerState sampler(cfg.seed, /*stream_id=*/0);
  TraceBuilder builder(obj, counted, cfg.mu, cfg.timing);

  RunResult res;
  res.x = cfg.initial_point(n);
  builder.record(res.trace, 0, 0, 0, res.x);

  for (std::size_t s = 0; s < cfg.epochs; ++s) {
    SnapshotGradient snap = full_smoothed_gradient(counted, res.x, cfg.mu, s);
    for (std::size_t t = 0; t < m; ++t) {
      auto batch = sampler.sample_minibatch(l, cfg.batch_size);
      auto block = sampler.sample_block(n, cfg.block_size);
      VREstimate v =
          vr_estimate(counted, res.x, snap, batch, block, cfg.mu, s, t);
      res.x = apply_update(res.x, v, cfg.gamma);

      if (iterate_out_of_range(res.x)) {
        builder.record(res.trace, s, t + 1, s * m + t + 1, res.x);
        res.status = RunStatus::kDiverged;
        res.message = "iterate out of range at epoch " + std::to_string(s) +
                      " inner iteration " + std::to_string(t);
        return res;
      }
      const std::size_t global = s * m + t + 1;
      const bool epoch_end = (t + 1 == m);
      if (!epoch_end && cfg.trace_cadence > 0 &&
          (t + 1) % cfg.trace_cadence == 0) {
        if (!builder.record(res.trace, s, t + 1, global, res.x)) {
          res.status = RunStatus::kDiverged;
          res.message = "objective out of range at epoch " +
                        std::to_string(s);
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

RunResult run_asyszo_sequential(const FiniteSumObjective& obj,
                                const RunConfig& cfg) {
  cfg.validate(obj);
  const std::size_t l = obj.num_components();
  const std::size_t n = obj.dimension();
  const std::size_t m = std::max<std::size_t>(cfg.inner_iters, 1);
  const std::size_t total = cfg.epochs * cfg.inner_iters;

  CountingObjective counted(obj);
  SamplerState sampler(cfg.seed, /*stream_id=*/0);
  TraceBuilder builder(obj, counted, cfg.mu, cfg.timing);

  RunResult res;
  res.x = cfg.initial_point(n);
  builder.record(res.trace, 0, 0, 0, res.x);

  for (std::size_t t = 0; t < total; ++t) {
    auto comp = sampler.sample_minibatch(l, 1);
    auto block = sampler.sample_block(n, cfg.block_size);
    BlockGradient g = block_gradient(counted, comp[0], res.x, block, cfg.mu);
    const double gamma_t =
        cfg.baseline_gamma0 /
        std::pow(static_cast<double>(t + 1), cfg.baseline_decay);
    res.x = apply_update(res.x, g, gamma_t);

    const std::size_t global = t + 1;
    const std::size_t epoch = (global - 1) / m;
    const std::size_t inner = global - epoch * m;
    if (iterate_out_of_range(res.x)) {
      builder.record(res.trace, epoch, inner, global, res.x);
      res.status = RunStatus::kDiverged;
      res.message = "iterate out of range at iteration " + std::to_string(t);
      return res;
    }
    const bool last = (global == total);
    if (last || (cfg.trace_cadence > 0 && global % cfg.trace_cadence == 0)) {
      if (!builder.record(res.trace, epoch, inner, global, res.x)) {
        res.status = RunStatus::kDiverged;
        res.message = "objective out of range at iteration " +
                      std::to_string(t);
        return res;
      }
    }
  }
  return res;
}

}  // namespace zovr
