#include "zovr/estimator.hpp"

#include <string>

#include "zovr/error.hpp"
#include "zovr/textio.hpp"

namespace zovr {

namespace {

void check_block(std::span<const std::size_t> block, std::size_t n) {
  if (block.empty()) throw ConfigError("coordinate block must be nonempty");
  for (std::size_t k = 0; k < block.size(); ++k) {
    if (block[k] >= n) {
      throw ConfigError("block coordinate " + std::to_string(block[k]) +
                        " out of range for dimension " + std::to_string(n));
    }
    if (k > 0 && block[k] <= block[k - 1]) {
      throw ConfigError("block coordinates must be sorted and distinct");
    }
  }
}

}  // namespace

void SmoothingSchedule::validate(std::size_t n) const {
  if (mu.size() != n) {
    throw ConfigError("smoothing schedule has " + std::to_string(mu.size()) +
                      " radii, expected " + std::to_string(n));
  }
  for (double m : mu) {
    if (!(m > 0.0)) {
      throw ConfigError("smoothing radius must be positive, got " +
                        format_double(m));
    }
  }
}

double central_diff(const FiniteSumObjective& obj, std::size_t i,
                    std::span<const double> x, std::size_t j, double mu_j) {
  if (!(mu_j > 0.0)) {
    throw ConfigError("central_diff: mu must be positive, got " +
                      format_double(mu_j));
  }
  if (j >= obj.dimension()) {
    throw ConfigError("central_diff: coordinate " + std::to_string(j) +
                      " out of range");
  }
  std::vector<double> work(x.begin(), x.end());
  work[j] = x[j] + mu_j;
  double fp = obj.eval_component(i, work);
  work[j] = x[j] - mu_j;
  double fm = obj.eval_component(i, work);
  return (fp - fm) / (2.0 * mu_j);
}

BlockGradient block_gradient(const FiniteSumObjective& obj, std::size_t i,
                             std::span<const double> x,
                             std::span<const std::size_t> block,
                             const SmoothingSchedule& mu) {
  const std::size_t n = obj.dimension();
  check_block(block, n);
  mu.validate(n);
  const double scale =
      static_cast<double>(n) / static_cast<double>(block.size());

  BlockGradient out;
  out.block.assign(block.begin(), block.end());
  out.values.resize(block.size());
  std::vector<double> work(x.begin(), x.end());
  for (std::size_t k = 0; k < block.size(); ++k) {
    const std::size_t j = block[k];
    const double m = mu.mu[j];
    work[j] = x[j] + m;
    double fp = obj.eval_component(i, work);
    work[j] = x[j] - m;
    double fm = obj.eval_component(i, work);
    work[j] = x[j];
    out.values[k] = scale * (fp - fm) / (2.0 * m);
  }
  return out;
}

double snapshot_coordinate(const FiniteSumObjective& obj,
                           std::span<const double> x, std::size_t j,
                           double mu_j) {
  const std::size_t l = obj.num_components();
  std::vector<double> work(x.begin(), x.end());
  work[j] = x[j] + mu_j;
  double fp = 0.0;
  for (std::size_t i = 0; i < l; ++i) fp += obj.eval_component(i, work);
  work[j] = x[j] - mu_j;
  double fm = 0.0;
  for (std::size_t i = 0; i < l; ++i) fm += obj.eval_component(i, work);
  return (fp - fm) / (2.0 * mu_j * static_cast<double>(l));
}

SnapshotGradient full_smoothed_gradient(const FiniteSumObjective& obj,
                                        std::span<const double> x,
                                        const SmoothingSchedule& mu,
                                        std::size_t epoch) {
  const std::size_t n = obj.dimension();
  mu.validate(n);
  SnapshotGradient snap;
  snap.snapshot_x.assign(x.begin(), x.end());
  snap.epoch = epoch;
  snap.g_mu.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    snap.g_mu[j] = snapshot_coordinate(obj, x, j, mu.mu[j]);
  }
  return snap;
}

BlockGradient restrict_snapshot(const SnapshotGradient& snap,
                                std::span<const std::size_t> block) {
  const std::size_t n = snap.g_mu.size();
  check_block(block, n);
  const double scale =
      static_cast<double>(n) / static_cast<double>(block.size());
  BlockGradient out;
  out.block.assign(block.begin(), block.end());
  out.values.resize(block.size());
  for (std::size_t k = 0; k < block.size(); ++k) {
    out.values[k] = scale * snap.g_mu[block[k]];
  }
  return out;
}

}  // namespace zovr
