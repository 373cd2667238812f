#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "test_helpers.hpp"
#include "zovr/error.hpp"
#include "zovr/optimizer.hpp"
#include "zovr/sampling.hpp"

using namespace zovr;
using zovrtest::reference_dszovr_config;
using zovrtest::reference_ridge;
using zovrtest::scalar_ridge;

namespace {

std::vector<std::vector<std::size_t>> all_subsets(std::size_t n,
                                                  std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (cur.size() == k) {
      out.push_back(cur);
      return;
    }
    for (std::size_t j = start; j + (k - cur.size()) <= n; ++j) {
      cur.push_back(j);
      rec(j + 1);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

}  // namespace

TEST_CASE("vr estimate collapses to the snapshot term at x_hat = x_tilde") {
  auto obj = reference_ridge();
  SmoothingSchedule mu = SmoothingSchedule::uniform(20, 1e-3);
  Pcg64 rng(4, 0);
  ParameterVector x(20);
  for (auto& v : x) v = rng.next_gaussian();
  SnapshotGradient snap = full_smoothed_gradient(*obj, x, mu, 3);

  std::vector<std::size_t> batch{1, 5, 17};
  std::vector<std::size_t> block{2, 9, 13};
  VREstimate v = vr_estimate(*obj, x, snap, batch, block, mu, 3, 0);
  BlockGradient anchor = restrict_snapshot(snap, block);
  CHECK(v.values == anchor.values);  // bitwise: the batch terms cancel
}

TEST_CASE("full batch collapses to the full-objective block gradient") {
  auto ds = make_synthetic_dataset(GeneratorKind::kGaussianLinear, 6, 4, 19,
                                   0.1);
  auto obj = make_ridge(std::move(ds), 0.1);
  SmoothingSchedule mu = SmoothingSchedule::uniform(4, 1e-2);
  ParameterVector x_tilde{0.5, -0.5, 0.25, 1.0};
  ParameterVector x_hat{1.0, 0.0, -1.0, 2.0};
  SnapshotGradient snap = full_smoothed_gradient(*obj, x_tilde, mu, 0);

  std::vector<std::size_t> batch{0, 1, 2, 3, 4, 5};
  std::vector<std::size_t> block{0, 3};
  VREstimate v = vr_estimate(*obj, x_hat, snap, batch, block, mu, 0, 0);

  // average the per-component block gradients of the full objective
  std::vector<double> mean(block.size(), 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    auto g = block_gradient(*obj, i, x_hat, block, mu);
    for (std::size_t k = 0; k < block.size(); ++k) {
      mean[k] += g.values[k] / 6.0;
    }
  }
  for (std::size_t k = 0; k < block.size(); ++k) {
    CHECK(std::abs(v.values[k] - mean[k]) <= 1e-12);
  }
}

TEST_CASE("vr estimate is unbiased over mini-batches, exhaustively") {
  // l = 5, b = 2, N = 4, Y = 2: mean over all 10 batches equals the
  // batch-free block gradient of f at x_hat.
  auto ds = make_synthetic_dataset(GeneratorKind::kGaussianLinear, 5, 4, 37,
                                   0.3);
  auto obj = make_ridge(std::move(ds), 0.05);
  SmoothingSchedule mu = SmoothingSchedule::uniform(4, 1e-2);
  Pcg64 rng(12, 0);
  ParameterVector x_tilde(4), x_hat(4);
  for (auto& v : x_tilde) v = rng.next_gaussian();
  for (auto& v : x_hat) v = rng.next_gaussian();
  SnapshotGradient snap = full_smoothed_gradient(*obj, x_tilde, mu, 0);

  for (const auto& block : all_subsets(4, 2)) {
    auto batches = all_subsets(5, 2);
    std::vector<double> mean(2, 0.0);
    for (const auto& batch : batches) {
      VREstimate v = vr_estimate(*obj, x_hat, snap, batch, block, mu, 0, 0);
      for (std::size_t k = 0; k < 2; ++k) {
        mean[k] += v.values[k] / static_cast<double>(batches.size());
      }
    }
    std::vector<double> want(2, 0.0);
    for (std::size_t i = 0; i < 5; ++i) {
      auto g = block_gradient(*obj, i, x_hat, block, mu);
      for (std::size_t k = 0; k < 2; ++k) want[k] += g.values[k] / 5.0;
    }
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(std::abs(mean[k] - want[k]) <= 1e-12);
    }
  }
}

TEST_CASE("vr estimate variance collapses exactly at the snapshot") {
  auto ds = make_synthetic_dataset(GeneratorKind::kGaussianLinear, 5, 4, 57,
                                   0.3);
  auto obj = make_ridge(std::move(ds), 0.05);
  SmoothingSchedule mu = SmoothingSchedule::uniform(4, 1e-2);
  ParameterVector x_tilde{0.2, -0.4, 0.8, -1.6};
  SnapshotGradient snap = full_smoothed_gradient(*obj, x_tilde, mu, 0);
  std::vector<std::size_t> block{1, 3};

  SUBCASE("at the snapshot every batch produces the identical estimate") {
    std::vector<double> first;
    for (const auto& batch : all_subsets(5, 2)) {
      VREstimate v =
          vr_estimate(*obj, x_tilde, snap, batch, block, mu, 0, 0);
      if (first.empty()) first = v.values;
      CHECK(v.values == first);  // bitwise equality, variance exactly 0
    }
  }
  SUBCASE("away from the snapshot the estimates genuinely vary") {
    ParameterVector x_hat{1.0, 1.0, -1.0, 0.5};
    bool any_diff = false;
    std::vector<double> first;
    for (const auto& batch : all_subsets(5, 2)) {
      VREstimate v = vr_estimate(*obj, x_hat, snap, batch, block, mu, 0, 0);
      if (first.empty()) first = v.values;
      else if (v.values != first) any_diff = true;
    }
    CHECK(any_diff);
  }
}

TEST_CASE("vr estimate costs exactly 4 b Y evaluations") {
  auto obj = reference_ridge();
  CountingObjective counted(*obj);
  SmoothingSchedule mu = SmoothingSchedule::uniform(20, 1e-3);
  ParameterVector x(20, 0.1);
  SnapshotGradient snap;
  snap.g_mu.assign(20, 0.0);
  snap.snapshot_x.assign(20, 0.0);
  snap.epoch = 0;
  std::vector<std::size_t> batch{0, 3, 7, 9};
  std::vector<std::size_t> block{1, 4, 6};
  vr_estimate(counted, x, snap, batch, block, mu, 0, 0);
  CHECK(counted.evaluations() == 4 * batch.size() * block.size());
}

TEST_CASE("stale snapshots are logic errors") {
  auto obj = scalar_ridge();
  SmoothingSchedule mu = SmoothingSchedule::uniform(1, 0.1);
  SnapshotGradient snap = full_smoothed_gradient(*obj, ParameterVector{1.0},
                                                 mu, 2);
  std::vector<std::size_t> batch{0};
  std::vector<std::size_t> block{0};
  CHECK_THROWS_AS(
      vr_estimate(*obj, ParameterVector{1.0}, snap, batch, block, mu, 3, 0),
      std::logic_error);
}

TEST_CASE("apply_update") {
  SUBCASE("zero step leaves x unchanged") {
    ParameterVector x{1.0, 2.0};
    VREstimate v;
    v.block = {0, 1};
    v.values = {5.0, -3.0};
    CHECK(apply_update(x, v, 0.0) == x);
  }
  SUBCASE("hand arithmetic") {
    ParameterVector x{1.0, 1.0};
    VREstimate v;
    v.block = {0};
    v.values = {2.0};
    CHECK(apply_update(x, v, 0.5) == ParameterVector{0.0, 1.0});
  }
  SUBCASE("disjoint-block updates commute exactly") {
    ParameterVector x{1.0, 2.0, 3.0, 4.0};
    VREstimate a, b;
    a.block = {0, 2};
    a.values = {1.5, -2.5};
    b.block = {1, 3};
    b.values = {0.25, 8.0};
    auto ab = apply_update(apply_update(x, a, 0.1), b, 0.1);
    auto ba = apply_update(apply_update(x, b, 0.1), a, 0.1);
    CHECK(ab == ba);
  }
}

TEST_CASE("dszovr: zero inner iterations is a no-op") {
  auto obj = scalar_ridge();
  RunConfig cfg;
  cfg.gamma = 0.5;
  cfg.epochs = 3;
  cfg.inner_iters = 0;
  cfg.batch_size = 1;
  cfg.block_size = 1;
  cfg.mu = SmoothingSchedule::uniform(1, 0.1);
  cfg.x0 = {1.0};
  RunResult res = run_dszovr(*obj, cfg);
  CHECK(res.status == RunStatus::kCompleted);
  CHECK(res.x == ParameterVector{1.0});
}

TEST_CASE("dszovr: one hand-simulated inner step on the scalar ridge") {
  auto obj = scalar_ridge();
  RunConfig cfg;
  cfg.gamma = 0.5;
  cfg.epochs = 1;
  cfg.inner_iters = 1;
  cfg.batch_size = 1;
  cfg.block_size = 1;
  cfg.mu = SmoothingSchedule::uniform(1, 0.1);
  cfg.x0 = {1.0};
  RunResult res = run_dszovr(*obj, cfg);
  // x_hat = x_tilde at t = 0, so the step is the snapshot value 1.0
  CHECK(res.x[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("asyszo: hand-simulated two iterations on the scalar ridge") {
  auto obj = scalar_ridge();
  RunConfig cfg;
  cfg.algorithm = Algorithm::kAsyszo;
  cfg.gamma = 1.0;
  cfg.baseline_gamma0 = 0.5;
  cfg.baseline_decay = 0.5;
  cfg.epochs = 1;
  cfg.inner_iters = 2;
  cfg.batch_size = 1;
  cfg.block_size = 1;
  cfg.mu = SmoothingSchedule::uniform(1, 0.1);
  cfg.x0 = {1.0};
  cfg.trace_cadence = 1;
  RunResult res = run_asyszo_sequential(*obj, cfg);
  // x1 = 1 - 0.5 * 1 = 0.5; x2 = 0.5 - (0.5/sqrt(2)) * 0.5
  const double x2 = 0.5 - 0.5 / std::sqrt(2.0) * 0.5;
  CHECK(res.x[0] == doctest::Approx(x2).epsilon(1e-12));
}

TEST_CASE("asyszo: a constant objective never moves") {
  auto obj = make_blackbox(3, 4, [](std::size_t, std::span<const double>) {
    return 1.25;
  });
  RunConfig cfg;
  cfg.algorithm = Algorithm::kAsyszo;
  cfg.gamma = 1.0;
  cfg.baseline_gamma0 = 0.7;
  cfg.epochs = 2;
  cfg.inner_iters = 25;
  cfg.batch_size = 1;
  cfg.block_size = 2;
  cfg.mu = SmoothingSchedule::uniform(3, 0.2);
  cfg.x0 = {1.0, -2.0, 3.0};
  RunResult res = run_asyszo_sequential(*obj, cfg);
  CHECK(res.x == ParameterVector{1.0, -2.0, 3.0});
}

TEST_CASE("sequential runs are deterministic bit for bit") {
  auto obj = reference_ridge();
  RunConfig cfg = reference_dszovr_config();
  cfg.epochs = 2;
  cfg.inner_iters = 50;
  RunResult a = run_dszovr(*obj, cfg);
  RunResult b = run_dszovr(*obj, cfg);
  CHECK(a.x == b.x);
  CHECK(a.trace.to_csv() == b.trace.to_csv());
}

TEST_CASE("trace invariants: strictly increasing iters, nondecreasing evals") {
  auto obj = reference_ridge();
  RunConfig cfg = reference_dszovr_config();
  cfg.epochs = 3;
  cfg.inner_iters = 70;
  cfg.trace_cadence = 7;
  RunResult res = run_dszovr(*obj, cfg);
  REQUIRE(res.trace.records.size() > 3);
  for (std::size_t k = 1; k < res.trace.records.size(); ++k) {
    CHECK(res.trace.records[k].global_iter >
          res.trace.records[k - 1].global_iter);
    CHECK(res.trace.records[k].evals >= res.trace.records[k - 1].evals);
  }
  // epoch boundary evals are exact: s * (2 N l + 4 b Y m)
  for (const auto& r : res.trace.records) {
    if (r.inner_iter == cfg.inner_iters) {
      CHECK(r.evals == (r.epoch + 1) * (2 * 20 * 500 +
                                        4 * cfg.batch_size *
                                            cfg.block_size * 70));
    }
  }
}

TEST_CASE("divergence guard aborts with the trace so far") {
  auto obj = reference_ridge();
  RunConfig cfg = reference_dszovr_config();
  cfg.gamma = 50.0;  // far beyond any stable step
  cfg.epochs = 5;
  cfg.inner_iters = 200;
  RunResult res = run_dszovr(*obj, cfg);
  CHECK(res.status == RunStatus::kDiverged);
  CHECK(!res.message.empty());
  CHECK(!res.trace.records.empty());
}

TEST_CASE("trace CSV round trip") {
  auto obj = scalar_ridge();
  RunConfig cfg;
  cfg.gamma = 0.3;
  cfg.epochs = 2;
  cfg.inner_iters = 5;
  cfg.batch_size = 1;
  cfg.block_size = 1;
  cfg.mu = SmoothingSchedule::uniform(1, 0.1);
  cfg.x0 = {1.0};
  cfg.trace_cadence = 1;
  RunResult res = run_dszovr(*obj, cfg);
  auto path = std::string("/tmp/zovr_trace_roundtrip.csv");
  res.trace.write_csv_file(path);
  Trace back = Trace::from_csv_file(path);
  CHECK(back.to_csv() == res.trace.to_csv());
}

TEST_CASE("reference regression: dszovr drives the gradient to noise level") {
  auto obj = reference_ridge();
  RunConfig cfg = reference_dszovr_config();
  RunResult res = run_dszovr(*obj, cfg);
  REQUIRE(res.status == RunStatus::kCompleted);
  double final_gradsq = res.trace.records.back().grad_norm_sq;
  std::printf("reference dszovr final grad_norm_sq = %.3e, f = %.6f\n",
              final_gradsq, res.trace.records.back().f);
  CHECK(final_gradsq <= 1e-6);
}

TEST_CASE("epoch descent on the strongly convex reference (empirical)") {
  auto obj = reference_ridge();
  RunConfig cfg = reference_dszovr_config();
  cfg.epochs = 6;
  RunResult res = run_dszovr(*obj, cfg);
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& r : res.trace.records) {
    if (r.inner_iter == cfg.inner_iters) {
      CHECK(r.f <= prev);
      prev = r.f;
    }
  }
}
