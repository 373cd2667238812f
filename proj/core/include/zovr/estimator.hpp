#ifndef ZOVR_ESTIMATOR_HPP
#define ZOVR_ESTIMATOR_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "zovr/objective.hpp"

namespace zovr {

// Per-coordinate smoothing radii mu_j > 0, same units as x.
struct SmoothingSchedule {
  std::vector<double> mu;

  static SmoothingSchedule uniform(std::size_t n, double value) {
    return SmoothingSchedule{std::vector<double>(n, value)};
  }
  void validate(std::size_t n) const;
};

// Sparse block vector supported on sorted coordinate set J. Values
// carry the N/Y scale: interpreted densely, the average over all
// size-Y blocks of a block gradient reproduces the plain dense
// central-difference vector.
struct BlockGradient {
  std::vector<std::size_t> block;  // sorted, distinct, in [0, N)
  std::vector<double> values;      // one per block entry

  std::vector<double> to_dense(std::size_t n) const {
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < block.size(); ++k) out[block[k]] = values[k];
    return out;
  }
};

// Dense central differences of the full objective at a snapshot point,
// unscaled: g_mu[j] = (f(x+mu_j e_j) - f(x-mu_j e_j)) / (2 mu_j).
struct SnapshotGradient {
  std::vector<double> g_mu;
  ParameterVector snapshot_x;
  std::size_t epoch = 0;
};

// Symmetric difference quotient of component f_i along coordinate j.
// Exactly 2 component evaluations.
double central_diff(const FiniteSumObjective& obj, std::size_t i,
                    std::span<const double> x, std::size_t j, double mu_j);

// Two-point block estimate of component i at x: value (N/Y) *
// central_diff per coordinate in J. Exactly 2|J| component evaluations.
BlockGradient block_gradient(const FiniteSumObjective& obj, std::size_t i,
                             std::span<const double> x,
                             std::span<const std::size_t> block,
                             const SmoothingSchedule& mu);

// Dense central differences of f at x over every coordinate. Exactly
// 2*N*l component evaluations; per-coordinate sums run over components
// in index order, so the result is deterministic however the
// coordinates are distributed across workers.
SnapshotGradient full_smoothed_gradient(const FiniteSumObjective& obj,
                                        std::span<const double> x,
                                        const SmoothingSchedule& mu,
                                        std::size_t epoch = 0);

// One coordinate of the snapshot; the piece of work a cooperative
// worker claims.
double snapshot_coordinate(const FiniteSumObjective& obj,
                           std::span<const double> x, std::size_t j,
                           double mu_j);

// Restriction of a snapshot to block J on the N/Y scale. No component
// evaluations.
BlockGradient restrict_snapshot(const SnapshotGradient& snap,
                                std::span<const std::size_t> block);

}  // namespace zovr

#endif  // ZOVR_ESTIMATOR_HPP
