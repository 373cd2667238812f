#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "zovr/error.hpp"
#include "zovr/estimator.hpp"
#include "zovr/objective.hpp"
#include "zovr/sampling.hpp"

using namespace zovr;

namespace {

// All size-k subsets of {0..n-1}, lexicographic.
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

std::uint64_t binom(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::uint64_t i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

std::unique_ptr<FiniteSumObjective> fn_objective(
    std::size_t n, std::function<double(std::span<const double>)> f) {
  return make_blackbox(n, 1,
                       [f = std::move(f)](std::size_t,
                                          std::span<const double> x) {
                         return f(x);
                       });
}

}  // namespace

TEST_CASE("central difference basics") {
  SUBCASE("exact on quadratics for any radius") {
    auto obj = fn_objective(2, [](std::span<const double> x) {
      return x[1] * x[1];
    });
    ParameterVector x{0.0, 1.0};
    for (double mu : {1e-6, 1e-2, 0.5, 1.0}) {
      CHECK(central_diff(*obj, 0, x, 1, mu) ==
            doctest::Approx(2.0).epsilon(1e-9));
    }
  }
  SUBCASE("constant function gives zero") {
    auto obj = fn_objective(3, [](std::span<const double>) { return 7.0; });
    CHECK(central_diff(*obj, 0, ParameterVector{1, 2, 3}, 0, 0.3) == 0.0);
  }
  SUBCASE("exp at zero with mu = 1 is sinh(1)") {
    auto obj = fn_objective(1, [](std::span<const double> x) {
      return std::exp(x[0]);
    });
    CHECK(central_diff(*obj, 0, ParameterVector{0.0}, 0, 1.0) ==
          doctest::Approx(std::sinh(1.0)).epsilon(1e-12));
  }
  SUBCASE("nonpositive radius is a configuration error") {
    auto obj = fn_objective(1, [](std::span<const double> x) { return x[0]; });
    CHECK_THROWS_AS(central_diff(*obj, 0, ParameterVector{0.0}, 0, 0.0),
                    ConfigError);
    CHECK_THROWS_AS(central_diff(*obj, 0, ParameterVector{0.0}, 0, -0.1),
                    ConfigError);
  }
}

TEST_CASE("block gradient scaling follows N/Y") {
  // quadratic with gradient (3, -1) at x = (1, 1)
  auto obj = fn_objective(2, [](std::span<const double> x) {
    return 1.5 * x[0] * x[0] - x[1];
  });
  ParameterVector x{1.0, 1.0};
  SmoothingSchedule mu = SmoothingSchedule::uniform(2, 0.1);

  SUBCASE("full block recovers the gradient") {
    std::vector<std::size_t> all{0, 1};
    auto g = block_gradient(*obj, 0, x, all, mu);
    auto dense = g.to_dense(2);
    CHECK(dense[0] == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(dense[1] == doctest::Approx(-1.0).epsilon(1e-10));
  }
  SUBCASE("singleton block doubles the value in 2-d") {
    std::vector<std::size_t> j0{0};
    auto g = block_gradient(*obj, 0, x, j0, mu);
    auto dense = g.to_dense(2);
    CHECK(dense[0] == doctest::Approx(6.0).epsilon(1e-10));
    CHECK(dense[1] == 0.0);
  }
  SUBCASE("empty block is a configuration error") {
    std::vector<std::size_t> none;
    CHECK_THROWS_AS(block_gradient(*obj, 0, x, none, mu), ConfigError);
  }
  SUBCASE("unsorted or duplicate blocks are rejected") {
    std::vector<std::size_t> dup{0, 0};
    CHECK_THROWS_AS(block_gradient(*obj, 0, x, dup, mu), ConfigError);
    std::vector<std::size_t> unsorted{1, 0};
    CHECK_THROWS_AS(block_gradient(*obj, 0, x, unsorted, mu), ConfigError);
  }
}

TEST_CASE("counting identity behind block unbiasedness") {
  // Each coordinate lies in C(N-1, Y-1) of the C(N, Y) blocks, and
  // C(N-1, Y-1) * N == C(N, Y) * Y exactly.
  for (std::uint64_t n = 1; n <= 6; ++n) {
    for (std::uint64_t y = 1; y <= n; ++y) {
      CHECK(binom(n - 1, y - 1) * n == binom(n, y) * y);
    }
  }
}

TEST_CASE("unbiasedness over blocks, exhaustive up to N = 6") {
  auto ds = make_synthetic_dataset(GeneratorKind::kGaussianLinear, 3, 6, 15,
                                   0.2);
  auto obj = make_ridge(std::move(ds), 0.05);
  Pcg64 rng(21, 0);
  for (std::size_t n = 2; n <= 6; ++n) {
    // restrict attention to the first n coordinates via a wrapper
    auto sub = make_blackbox(n, 3, [&](std::size_t i,
                                       std::span<const double> x) {
      ParameterVector full(6, 0.0);
      for (std::size_t j = 0; j < n; ++j) full[j] = x[j];
      return obj->eval_component(i, full);
    });
    SmoothingSchedule mu = SmoothingSchedule::uniform(n, 1e-3);
    ParameterVector x(n);
    for (auto& v : x) v = rng.next_gaussian();
    SnapshotGradient dense;
    dense.g_mu.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      dense.g_mu[j] = central_diff(*sub, 0, x, j, mu.mu[j]);
    }
    for (std::size_t y = 1; y <= n; ++y) {
      auto blocks = all_subsets(n, y);
      ParameterVector mean(n, 0.0);
      for (const auto& block : blocks) {
        auto g = block_gradient(*sub, 0, x, block, mu);
        auto d = g.to_dense(n);
        for (std::size_t j = 0; j < n; ++j) {
          mean[j] += d[j] / static_cast<double>(blocks.size());
        }
      }
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(std::abs(mean[j] - dense.g_mu[j]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("full smoothed gradient") {
  SUBCASE("matches analytic gradient on the quadratic ridge for any mu") {
    auto ds = make_synthetic_dataset(GeneratorKind::kGaussianLinear, 8, 5, 29,
                                     0.1);
    auto obj = make_ridge(std::move(ds), 0.02);
    Pcg64 rng(2, 0);
    ParameterVector x(5);
    for (auto& v : x) v = rng.next_gaussian();
    auto g = obj->analytic_gradient(x);
    for (double mu_val : {1e-3, 1e-1, 1.0}) {
      auto snap =
          full_smoothed_gradient(*obj, x, SmoothingSchedule::uniform(5, mu_val));
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(std::abs(snap.g_mu[j] - g[j]) <= 1e-8);
      }
    }
  }
  SUBCASE("constant objective gives the zero vector") {
    auto obj = make_blackbox(4, 3, [](std::size_t, std::span<const double>) {
      return -2.5;
    });
    auto snap = full_smoothed_gradient(*obj, ParameterVector(4, 1.0),
                                       SmoothingSchedule::uniform(4, 0.2));
    for (double v : snap.g_mu) CHECK(v == 0.0);
  }
  SUBCASE("two-component hand value") {
    // f1 = x^2, f2 = 4x at x = 1, mu = 0.5: mean central diff = (2+4)/2
    auto obj = make_blackbox(1, 2, [](std::size_t i,
                                      std::span<const double> x) {
      return i == 0 ? x[0] * x[0] : 4.0 * x[0];
    });
    auto snap = full_smoothed_gradient(*obj, ParameterVector{1.0},
                                       SmoothingSchedule::uniform(1, 0.5));
    CHECK(snap.g_mu[0] == doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("evaluation budgets are exact") {
  auto ds = make_synthetic_dataset(GeneratorKind::kGaussianLinear, 7, 4, 33,
                                   0.1);
  auto ridge = make_ridge(std::move(ds), 0.0);
  CountingObjective counted(*ridge);
  SmoothingSchedule mu = SmoothingSchedule::uniform(4, 1e-2);
  ParameterVector x{0.1, 0.2, 0.3, 0.4};

  central_diff(counted, 2, x, 1, 0.1);
  CHECK(counted.evaluations() == 2);

  counted.reset();
  std::vector<std::size_t> block{0, 2, 3};
  block_gradient(counted, 1, x, block, mu);
  CHECK(counted.evaluations() == 2 * block.size());

  counted.reset();
  full_smoothed_gradient(counted, x, mu);
  CHECK(counted.evaluations() == 2 * 4 * 7);

  counted.reset();
  SnapshotGradient snap;
  snap.g_mu = {1, 2, 3, 4};
  restrict_snapshot(snap, block);
  CHECK(counted.evaluations() == 0);
}

TEST_CASE("evaluations stay on the two-point pattern") {
  // every evaluation must differ from the base point in exactly one
  // coordinate, by exactly +/- mu_j
  ParameterVector base{0.4, -0.7, 1.2};
  SmoothingSchedule mu{{0.1, 0.2, 0.3}};
  auto probe = make_blackbox(3, 1, [&](std::size_t,
                                       std::span<const double> x) {
    int touched = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      if (x[j] != base[j]) {
        ++touched;
        CHECK(std::abs(std::abs(x[j] - base[j]) - mu.mu[j]) <= 1e-15);
      }
    }
    CHECK(touched == 1);
    return x[0] + x[1] + x[2];
  });
  std::vector<std::size_t> block{0, 1, 2};
  block_gradient(*probe, 0, base, block, mu);
  full_smoothed_gradient(*probe, base, mu);
}

TEST_CASE("snapshot restriction") {
  SnapshotGradient snap;
  snap.g_mu = {3.0, -1.0};
  SUBCASE("full block returns the snapshot itself") {
    std::vector<std::size_t> all{0, 1};
    auto g = restrict_snapshot(snap, all);
    CHECK(g.to_dense(2) == ParameterVector{3.0, -1.0});
  }
  SUBCASE("singleton applies the N/Y scale") {
    std::vector<std::size_t> j1{1};
    auto g = restrict_snapshot(snap, j1);
    CHECK(g.to_dense(2) == ParameterVector{0.0, -2.0});
  }
  SUBCASE("mean over all blocks reproduces the snapshot (N=4, Y=2)") {
    SnapshotGradient s4;
    s4.g_mu = {0.5, -2.0, 3.25, 0.125};
    auto blocks = all_subsets(4, 2);
    ParameterVector mean(4, 0.0);
    for (const auto& b : blocks) {
      auto d = restrict_snapshot(s4, b).to_dense(4);
      for (std::size_t j = 0; j < 4; ++j) {
        mean[j] += d[j] / static_cast<double>(blocks.size());
      }
    }
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(mean[j] - s4.g_mu[j]) <= 1e-12);
    }
  }
}

TEST_CASE("smoothing bias is second order in mu") {
  // f(x) = x^4 at x = 1: the central difference is 4 + 4 mu^2, so
  // halving mu divides the bias by four.
  auto obj = fn_objective(1, [](std::span<const double> x) {
    return x[0] * x[0] * x[0] * x[0];
  });
  ParameterVector x{1.0};
  auto err = [&](double mu) {
    return std::abs(central_diff(*obj, 0, x, 0, mu) - 4.0);
  };
  double e1 = err(0.2), e2 = err(0.1), e3 = err(0.05);
  CHECK(e1 / e2 >= 3.5);
  CHECK(e1 / e2 <= 4.5);
  CHECK(e2 / e3 >= 3.5);
  CHECK(e2 / e3 <= 4.5);
}
