#ifndef ZOVR_OBJECTIVE_HPP
#define ZOVR_OBJECTIVE_HPP

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zovr {

// Dense real iterate of dimension N.
using ParameterVector = std::vector<double>;

// Finite sum f(x) = (1/l) sum_i f_i(x), evaluation-only. Components are
// deterministic and pure; objects are immutable after construction, so
// eval_component is safe to call concurrently from many workers.
//
// Analytic gradients, when present, exist for telemetry and oracles
// only; the zeroth-order algorithms never touch them.
class FiniteSumObjective {
 public:
  virtual ~FiniteSumObjective() = default;

  virtual std::size_t num_components() const = 0;  // l
  virtual std::size_t dimension() const = 0;       // N

  // f_i(x), 0 <= i < l.
  virtual double eval_component(std::size_t i,
                                std::span<const double> x) const = 0;

  virtual bool has_analytic_gradient() const { return false; }
  virtual void analytic_component_gradient(std::size_t i,
                                           std::span<const double> x,
                                           std::span<double> out) const;

  // Largest per-component gradient Lipschitz constant, when known in
  // closed form.
  virtual std::optional<double> analytic_smoothness() const {
    return std::nullopt;
  }

  // f(x) = (1/l) sum_i f_i(x); components summed in index order.
  double value(std::span<const double> x) const;
  // (1/l) sum_i analytic_component_gradient(i, x).
  ParameterVector analytic_gradient(std::span<const double> x) const;
};

enum class GeneratorKind { kGaussianLinear, kGaussianLogistic, kImported };

// Dense l x N design matrix plus labels. Regeneration with the same
// seed is bit-identical (fixed PCG64 stream, fixed draw order).
struct SyntheticDataset {
  std::size_t l = 0;
  std::size_t n = 0;
  std::vector<double> features;  // row-major, l rows of n
  std::vector<double> labels;    // length l
  std::uint64_t seed = 0;
  GeneratorKind kind = GeneratorKind::kGaussianLinear;

  double feature(std::size_t i, std::size_t j) const {
    return features[i * n + j];
  }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * n, n};
  }
};

// Draw order: features row-major, then the planted parameter vector,
// then one noise draw per label.
SyntheticDataset make_synthetic_dataset(GeneratorKind kind, std::size_t l,
                                        std::size_t n, std::uint64_t seed,
                                        double label_noise = 0.0);

// CSV with header "j0,...,j{N-1},label", one sample per line, shortest
// round-trip decimal formatting.
void export_dataset_csv(const SyntheticDataset& ds, const std::string& path);
SyntheticDataset import_dataset_csv(const std::string& path);

// f_i(x) = 1/2 (a_i.x - b_i)^2 + lambda/2 ||x||^2
std::unique_ptr<FiniteSumObjective> make_ridge(SyntheticDataset dataset,
                                               double lambda);
// f_i(x) = log(1 + exp(-b_i a_i.x)) + lambda/2 ||x||^2, b_i in {-1,+1}
std::unique_ptr<FiniteSumObjective> make_logistic(SyntheticDataset dataset,
                                                  double lambda);
// f_i(x) = 1/2 (1 - b_i a_i.x)^2 + lambda/2 ||x||^2
std::unique_ptr<FiniteSumObjective> make_least_squares_svm(
    SyntheticDataset dataset, double lambda);

// Opaque component evaluator; no analytic gradient.
using ComponentEvalFn =
    std::function<double(std::size_t i, std::span<const double> x)>;
std::unique_ptr<FiniteSumObjective> make_blackbox(std::size_t n, std::size_t l,
                                                  ComponentEvalFn eval_fn);

// Pass-through wrapper counting component evaluations. The algorithms
// run through one of these so traces can report evaluation budgets;
// telemetry goes through the raw objective and stays out of the count.
class CountingObjective final : public FiniteSumObjective {
 public:
  explicit CountingObjective(const FiniteSumObjective& inner)
      : inner_(inner) {}

  std::size_t num_components() const override {
    return inner_.num_components();
  }
  std::size_t dimension() const override { return inner_.dimension(); }
  double eval_component(std::size_t i,
                        std::span<const double> x) const override {
    count_.fetch_add(1, std::memory_order_relaxed);
    return inner_.eval_component(i, x);
  }
  bool has_analytic_gradient() const override {
    return inner_.has_analytic_gradient();
  }
  void analytic_component_gradient(std::size_t i, std::span<const double> x,
                                   std::span<double> out) const override {
    inner_.analytic_component_gradient(i, x, out);
  }
  std::optional<double> analytic_smoothness() const override {
    return inner_.analytic_smoothness();
  }

  std::uint64_t evaluations() const {
    return count_.load(std::memory_order_relaxed);
  }
  void reset() { count_.store(0, std::memory_order_relaxed); }

 private:
  const FiniteSumObjective& inner_;
  mutable std::atomic<std::uint64_t> count_{0};
};

}  // namespace zovr

#endif  // ZOVR_OBJECTIVE_HPP
