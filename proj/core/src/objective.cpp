#include "zovr/objective.hpp"

#include <cmath>
#include <fstream>
#include <utility>

#include "zovr/error.hpp"
#include "zovr/sampling.hpp"
#include "zovr/textio.hpp"

namespace zovr {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double squared_norm(std::span<const double> x) { return dot(x, x); }

void check_dims(const SyntheticDataset& ds) {
  if (ds.l == 0 || ds.n == 0 || ds.features.size() != ds.l * ds.n ||
      ds.labels.size() != ds.l) {
    throw ConfigError("dataset dimensions inconsistent: l=" +
                      std::to_string(ds.l) + " n=" + std::to_string(ds.n) +
                      " features=" + std::to_string(ds.features.size()) +
                      " labels=" + std::to_string(ds.labels.size()));
  }
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0)) {
    throw ConfigError("lambda must be nonnegative, got " +
                      format_double(lambda));
  }
}

class DatasetObjective : public FiniteSumObjective {
 public:
  DatasetObjective(SyntheticDataset ds, double lambda)
      : ds_(std::move(ds)), lambda_(lambda) {
    check_dims(ds_);
    check_lambda(lambda_);
  }

  std::size_t num_components() const override { return ds_.l; }
  std::size_t dimension() const override { return ds_.n; }
  bool has_analytic_gradient() const override { return true; }

  const SyntheticDataset& dataset() const { return ds_; }

 protected:
  SyntheticDataset ds_;
  double lambda_;
};

class RidgeObjective final : public DatasetObjective {
 public:
  using DatasetObjective::DatasetObjective;

  double eval_component(std::size_t i,
                        std::span<const double> x) const override {
    double r = dot(ds_.row(i), x) - ds_.labels[i];
    return 0.5 * r * r + 0.5 * lambda_ * squared_norm(x);
  }

  void analytic_component_gradient(std::size_t i, std::span<const double> x,
                                   std::span<double> out) const override {
    double r = dot(ds_.row(i), x) - ds_.labels[i];
    auto a = ds_.row(i);
    for (std::size_t j = 0; j < a.size(); ++j) {
      out[j] = r * a[j] + lambda_ * x[j];
    }
  }

  std::optional<double> analytic_smoothness() const override {
    double m = 0.0;
    for (std::size_t i = 0; i < ds_.l; ++i) {
      m = std::max(m, squared_norm(ds_.row(i)));
    }
    return m + lambda_;
  }
};

class LogisticObjective final : public DatasetObjective {
 public:
  LogisticObjective(SyntheticDataset ds, double lambda)
      : DatasetObjective(std::move(ds), lambda) {
    for (std::size_t i = 0; i < ds_.l; ++i) {
      if (ds_.labels[i] != 1.0 && ds_.labels[i] != -1.0) {
        throw ConfigError("logistic labels must be in {-1,+1}; sample " +
                          std::to_string(i) + " has label " +
                          format_double(ds_.labels[i]));
      }
    }
  }

  double eval_component(std::size_t i,
                        std::span<const double> x) const override {
    double z = ds_.labels[i] * dot(ds_.row(i), x);
    // softplus(-z), stable for large |z|
    double loss = z > 0.0 ? std::log1p(std::exp(-z))
                          : -z + std::log1p(std::exp(z));
    return loss + 0.5 * lambda_ * squared_norm(x);
  }

  void analytic_component_gradient(std::size_t i, std::span<const double> x,
                                   std::span<double> out) const override {
    double b = ds_.labels[i];
    double z = b * dot(ds_.row(i), x);
    double sig = z > 0.0 ? std::exp(-z) / (1.0 + std::exp(-z))
                         : 1.0 / (1.0 + std::exp(z));  // sigmoid(-z)
    auto a = ds_.row(i);
    for (std::size_t j = 0; j < a.size(); ++j) {
      out[j] = -b * sig * a[j] + lambda_ * x[j];
    }
  }

  std::optional<double> analytic_smoothness() const override {
    double m = 0.0;
    for (std::size_t i = 0; i < ds_.l; ++i) {
      m = std::max(m, squared_norm(ds_.row(i)));
    }
    return 0.25 * m + lambda_;
  }
};

class LeastSquaresSvmObjective final : public DatasetObjective {
 public:
  using DatasetObjective::DatasetObjective;

  double eval_component(std::size_t i,
                        std::span<const double> x) const override {
    double r = 1.0 - ds_.labels[i] * dot(ds_.row(i), x);
    return 0.5 * r * r + 0.5 * lambda_ * squared_norm(x);
  }

  void analytic_component_gradient(std::size_t i, std::span<const double> x,
                                   std::span<double> out) const override {
    double b = ds_.labels[i];
    double r = 1.0 - b * dot(ds_.row(i), x);
    auto a = ds_.row(i);
    for (std::size_t j = 0; j < a.size(); ++j) {
      out[j] = -b * r * a[j] + lambda_ * x[j];
    }
  }

  std::optional<double> analytic_smoothness() const override {
    double m = 0.0;
    for (std::size_t i = 0; i < ds_.l; ++i) {
      m = std::max(m, squared_norm(ds_.row(i)));
    }
    return m + lambda_;
  }
};

class BlackboxObjective final : public FiniteSumObjective {
 public:
  BlackboxObjective(std::size_t n, std::size_t l, ComponentEvalFn fn)
      : n_(n), l_(l), fn_(std::move(fn)) {
    if (n_ == 0 || l_ == 0) {
      throw ConfigError("blackbox objective needs N >= 1 and l >= 1");
    }
    if (!fn_) throw ConfigError("blackbox objective needs an evaluator");
  }

  std::size_t num_components() const override { return l_; }
  std::size_t dimension() const override { return n_; }
  double eval_component(std::size_t i,
                        std::span<const double> x) const override {
    return fn_(i, x);
  }

 private:
  std::size_t n_;
  std::size_t l_;
  ComponentEvalFn fn_;
};

}  // namespace

void FiniteSumObjective::analytic_component_gradient(std::size_t,
                                                     std::span<const double>,
                                                     std::span<double>) const {
  throw std::logic_error("objective has no analytic gradient");
}

double FiniteSumObjective::value(std::span<const double> x) const {
  const std::size_t l = num_components();
  double s = 0.0;
  for (std::size_t i = 0; i < l; ++i) s += eval_component(i, x);
  return s / static_cast<double>(l);
}

ParameterVector FiniteSumObjective::analytic_gradient(
    std::span<const double> x) const {
  const std::size_t l = num_components();
  const std::size_t n = dimension();
  ParameterVector g(n, 0.0);
  ParameterVector gi(n);
  for (std::size_t i = 0; i < l; ++i) {
    analytic_component_gradient(i, x, gi);
    for (std::size_t j = 0; j < n; ++j) g[j] += gi[j];
  }
  for (std::size_t j = 0; j < n; ++j) g[j] /= static_cast<double>(l);
  return g;
}

SyntheticDataset make_synthetic_dataset(GeneratorKind kind, std::size_t l,
                                        std::size_t n, std::uint64_t seed,
                                        double label_noise) {
  if (l == 0 || n == 0) {
    throw ConfigError("synthetic dataset needs l >= 1 and N >= 1");
  }
  if (kind == GeneratorKind::kImported) {
    throw ConfigError("kImported is reserved for CSV-loaded datasets");
  }
  SyntheticDataset ds;
  ds.l = l;
  ds.n = n;
  ds.seed = seed;
  ds.kind = kind;
  ds.features.resize(l * n);
  ds.labels.resize(l);

  Pcg64 rng(seed, /*stream_id=*/0);
  for (auto& v : ds.features) v = rng.next_gaussian();
  std::vector<double> planted(n);
  for (auto& v : planted) v = rng.next_gaussian();
  for (std::size_t i = 0; i < l; ++i) {
    double score = dot(ds.row(i), planted) + label_noise * rng.next_gaussian();
    if (kind == GeneratorKind::kGaussianLinear) {
      ds.labels[i] = score;
    } else {
      ds.labels[i] = score >= 0.0 ? 1.0 : -1.0;
    }
  }
  return ds;
}

void export_dataset_csv(const SyntheticDataset& ds, const std::string& path) {
  check_dims(ds);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < ds.n; ++j) out << 'j' << j << ',';
  out << "label\n";
  for (std::size_t i = 0; i < ds.l; ++i) {
    for (std::size_t j = 0; j < ds.n; ++j) {
      out << format_double(ds.feature(i, j)) << ',';
    }
    out << format_double(ds.labels[i]) << '\n';
  }
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

SyntheticDataset import_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError("dataset '" + path + "' is empty");
  }
  auto header = split(trim(line), ',');
  if (header.size() < 2 || trim(header.back()) != "label") {
    throw ConfigError("dataset '" + path +
                      "': header must be j0,...,j{N-1},label");
  }
  const std::size_t n = header.size() - 1;
  for (std::size_t j = 0; j < n; ++j) {
    if (trim(header[j]) != "j" + std::to_string(j)) {
      throw ConfigError("dataset '" + path + "': unexpected header column '" +
                        std::string(trim(header[j])) + "'");
    }
  }

  SyntheticDataset ds;
  ds.n = n;
  ds.kind = GeneratorKind::kImported;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty()) continue;
    auto cells = split(t, ',');
    if (cells.size() != n + 1) {
      throw ConfigError("dataset '" + path + "' line " +
                        std::to_string(lineno) + ": expected " +
                        std::to_string(n + 1) + " columns, got " +
                        std::to_string(cells.size()));
    }
    const std::string ctx = path + " line " + std::to_string(lineno);
    for (std::size_t j = 0; j < n; ++j) {
      ds.features.push_back(parse_double(cells[j], ctx));
    }
    ds.labels.push_back(parse_double(cells[n], ctx));
  }
  ds.l = ds.labels.size();
  check_dims(ds);
  return ds;
}

std::unique_ptr<FiniteSumObjective> make_ridge(SyntheticDataset dataset,
                                               double lambda) {
  return std::make_unique<RidgeObjective>(std::move(dataset), lambda);
}

std::unique_ptr<FiniteSumObjective> make_logistic(SyntheticDataset dataset,
                                                  double lambda) {
  return std::make_unique<LogisticObjective>(std::move(dataset), lambda);
}

std::unique_ptr<FiniteSumObjective> make_least_squares_svm(
    SyntheticDataset dataset, double lambda) {
  return std::make_unique<LeastSquaresSvmObjective>(std::move(dataset),
                                                    lambda);
}

std::unique_ptr<FiniteSumObjective> make_blackbox(std::size_t n, std::size_t l,
                                                  ComponentEvalFn eval_fn) {
  return std::make_unique<BlackboxObjective>(n, l, std::move(eval_fn));
}

}  // namespace zovr
