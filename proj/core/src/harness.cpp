#include "zovr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "zovr/error.hpp"
#include "zovr/textio.hpp"

namespace zovr {

namespace fs = std::filesystem;

namespace {

struct RawValue {
  std::string value;
  std::size_t line = 0;
};

// Pulls typed values out of the key/value file; every key must be
// consumed or load fails naming it.
class Resolver {
 public:
  Resolver(const std::string& text, std::string origin)
      : origin_(std::move(origin)) {
    std::size_t lineno = 0;
    for (auto raw_line : split(text, '\n')) {
      ++lineno;
      auto hash = raw_line.find('#');
      auto s = trim(hash == std::string_view::npos ? raw_line
                                                   : raw_line.substr(0, hash));
      if (s.empty()) continue;
      auto eq = s.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(where(lineno) + ": expected 'key = value', got '" +
                          std::string(s) + "'");
      }
      std::string key(trim(s.substr(0, eq)));
      std::string value(trim(s.substr(eq + 1)));
      if (key.empty()) throw ConfigError(where(lineno) + ": empty key");
      if (entries_.count(key)) {
        throw ConfigError(where(lineno) + ": duplicate key '" + key + "'");
      }
      entries_[key] = RawValue{value, lineno};
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    return it->second.value;
  }

  std::string require_string(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw ConfigError(origin_ + ": missing required key '" + key + "'");
    }
    consumed_.insert(key);
    return it->second.value;
  }

  double get_double(const std::string& key, double fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    return parse_double(it->second.value, context(key));
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) {
    double v = get_double(key, static_cast<double>(fallback));
    if (v < 0.0 || v != std::floor(v)) {
      throw ConfigError(context(key) + ": expected a nonnegative integer");
    }
    return static_cast<std::size_t>(v);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    return static_cast<std::uint64_t>(
        get_size(key, static_cast<std::size_t>(fallback)));
  }

  bool get_bool(const std::string& key, bool fallback) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    consumed_.insert(key);
    if (it->second.value == "true") return true;
    if (it->second.value == "false") return false;
    throw ConfigError(context(key) + ": expected true or false");
  }

  void finish() const {
    for (const auto& [key, raw] : entries_) {
      if (!consumed_.count(key)) {
        throw ConfigError(where(raw.line) + ": unknown key '" + key + "'");
      }
    }
  }

  std::string context(const std::string& key) const {
    auto it = entries_.find(key);
    return where(it == entries_.end() ? 0 : it->second.line) + ": key '" +
           key + "'";
  }

 private:
  std::string where(std::size_t line) const {
    return origin_ + " line " + std::to_string(line);
  }

  std::string origin_;
  std::map<std::string, RawValue> entries_;
  std::set<std::string> consumed_;
};

template <typename Enum>
Enum parse_enum(const std::string& value, const Resolver& r,
                const std::string& key,
                std::initializer_list<std::pair<const char*, Enum>> table) {
  for (const auto& [name, e] : table) {
    if (value == name) return e;
  }
  std::string names;
  for (const auto& [name, e] : table) {
    if (!names.empty()) names += " | ";
    names += name;
  }
  throw ConfigError(r.context(key) + ": '" + value + "' is not one of " +
                    names);
}

const char* algorithm_name(Algorithm a) {
  return a == Algorithm::kDszovr ? "dszovr" : "asyszo";
}
const char* backend_name(Backend b) {
  switch (b) {
    case Backend::kSequential: return "sequential";
    case Backend::kAsync: return "async";
    case Backend::kSimulated: return "simulated";
  }
  return "sequential";
}
const char* delay_law_name(DelayLaw d) {
  switch (d) {
    case DelayLaw::kNone: return "none";
    case DelayLaw::kFixed: return "fixed";
    case DelayLaw::kUniform: return "uniform";
    case DelayLaw::kSchedule: return "schedule";
  }
  return "none";
}
const char* mask_policy_name(MaskPolicy m) {
  switch (m) {
    case MaskPolicy::kAllOnes: return "all-ones";
    case MaskPolicy::kRandom: return "random";
    case MaskPolicy::kSchedule: return "schedule";
  }
  return "all-ones";
}
const char* timing_name(TimingMode t) {
  return t == TimingMode::kReal ? "real" : "none";
}

std::vector<double> parse_mu_spec(const std::string& spec,
                                  const std::string& context) {
  std::vector<double> values;
  for (auto part : split(spec, ',')) {
    double v = parse_double(part, context);
    if (!(v > 0.0)) {
      throw ConfigError(context + ": smoothing radii must be positive");
    }
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError(context + ": empty mu list");
  return values;
}

std::string canonical_mu_spec(const std::vector<double>& values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) out += ',';
    out += format_double(values[k]);
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_plot_file(const std::string& path, const Trace& trace,
                     double (*x_of)(const TraceRecord&),
                     double (*y_of)(const TraceRecord&)) {
  std::string text;
  for (const auto& r : trace.records) {
    double x = x_of(r);
    double y = y_of(r);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    text += format_double(x);
    text += ' ';
    text += format_double(y);
    text += '\n';
  }
  write_text_file(path, text);
}

struct Series {
  std::vector<double> x;
  std::vector<double> y;
};

Series metric_series(const Trace& trace, RateMetric metric, RateAxis axis) {
  Series s;
  double running_min = std::numeric_limits<double>::infinity();
  double running_sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : trace.records) {
    running_min = std::min(running_min, r.grad_norm_sq);
    running_sum += r.grad_norm_sq;
    ++count;
    double y = metric == RateMetric::kGradSqMin
                   ? running_min
                   : running_sum / static_cast<double>(count);
    double x = axis == RateAxis::kIterations
                   ? static_cast<double>(r.global_iter)
                   : static_cast<double>(r.evals);
    s.x.push_back(x);
    s.y.push_back(y);
  }
  return s;
}

}  // namespace

SmoothingSchedule resolve_mu(const ExperimentConfig& cfg, std::size_t n) {
  auto values = parse_mu_spec(cfg.mu_spec, "mu");
  if (values.size() == 1) return SmoothingSchedule::uniform(n, values[0]);
  if (values.size() != n) {
    throw ConfigError("mu: " + std::to_string(values.size()) +
                      " radii for dimension " + std::to_string(n));
  }
  return SmoothingSchedule{std::move(values)};
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin) {
  Resolver r(text, origin);
  ExperimentConfig cfg;

  cfg.objective = r.require_string("objective");
  if (cfg.objective != "ridge" && cfg.objective != "logistic" &&
      cfg.objective != "lssvm") {
    throw ConfigError(r.context("objective") + ": '" + cfg.objective +
                      "' is not one of ridge | logistic | lssvm");
  }
  cfg.l = r.get_size("l", cfg.l);
  cfg.n = r.get_size("n", cfg.n);
  cfg.lambda = r.get_double("lambda", cfg.lambda);
  cfg.data_seed = r.get_u64("data_seed", cfg.data_seed);
  cfg.label_noise = r.get_double("label_noise", cfg.label_noise);
  cfg.data_csv = r.get_string("data_csv", cfg.data_csv);

  cfg.run.algorithm = parse_enum<Algorithm>(
      r.get_string("algorithm", "dszovr"), r, "algorithm",
      {{"dszovr", Algorithm::kDszovr}, {"asyszo", Algorithm::kAsyszo}});
  cfg.run.gamma = r.get_double("gamma", 0.001);
  cfg.run.baseline_gamma0 = r.get_double("gamma0", 0.01);
  cfg.run.baseline_decay = r.get_double("decay", 0.5);
  cfg.run.epochs = r.get_size("epochs", 10);
  cfg.run.inner_iters = r.get_size("m", 100);
  cfg.run.batch_size = r.get_size("b", 1);
  cfg.run.block_size = r.get_size("y", 1);
  cfg.run.seed = r.get_u64("seed", 1);
  cfg.run.trace_cadence = r.get_size("trace_cadence", 10);
  cfg.run.timing = parse_enum<TimingMode>(
      r.get_string("timing", "none"), r, "timing",
      {{"none", TimingMode::kNone}, {"real", TimingMode::kReal}});
  cfg.mu_spec =
      canonical_mu_spec(parse_mu_spec(r.get_string("mu", "0.0001"), "mu"));

  cfg.backend = parse_enum<Backend>(r.get_string("backend", "sequential"), r,
                                    "backend",
                                    {{"sequential", Backend::kSequential},
                                     {"async", Backend::kAsync},
                                     {"simulated", Backend::kSimulated}});
  cfg.threads = r.get_size("threads", cfg.threads);
  cfg.scenario.tau = r.get_size("tau", 0);
  cfg.scenario.delay_law = parse_enum<DelayLaw>(
      r.get_string("delay_law", "none"), r, "delay_law",
      {{"none", DelayLaw::kNone},
       {"fixed", DelayLaw::kFixed},
       {"uniform", DelayLaw::kUniform},
       {"schedule", DelayLaw::kSchedule}});
  cfg.scenario.fixed_delay = r.get_size("fixed_delay", 0);
  cfg.scenario.mask_policy = parse_enum<MaskPolicy>(
      r.get_string("mask_policy", "all-ones"), r, "mask_policy",
      {{"all-ones", MaskPolicy::kAllOnes},
       {"random", MaskPolicy::kRandom},
       {"schedule", MaskPolicy::kSchedule}});
  cfg.scenario.p_keep = r.get_double("p_keep", 1.0);
  cfg.scenario.seed = r.get_u64("scenario_seed", 99);
  cfg.schedule_file = r.get_string("schedule_file", "");

  cfg.theory = r.get_bool("theory", false);
  cfg.alpha = r.get_double("alpha", cfg.alpha);
  cfg.u0 = r.get_double("u0", cfg.u0);
  cfg.L = r.get_double("L", 0.0);
  cfg.L_tilde = r.get_double("L_tilde", 0.0);
  cfg.L_hat = r.get_double("L_hat", 0.0);
  cfg.estimate_trials = r.get_size("estimate_trials", cfg.estimate_trials);

  cfg.out = r.get_string("out", cfg.out);
  r.finish();

  // structural checks that do not need the objective
  if (cfg.l < 1) throw ConfigError(r.context("l") + ": l must be >= 1");
  if (cfg.n < 1) throw ConfigError(r.context("n") + ": n must be >= 1");
  if (!(cfg.lambda >= 0.0)) {
    throw ConfigError(r.context("lambda") + ": lambda must be >= 0");
  }
  if (!(cfg.run.gamma > 0.0)) {
    throw ConfigError(r.context("gamma") + ": gamma must be positive");
  }
  if (cfg.run.epochs < 1) {
    throw ConfigError(r.context("epochs") + ": epochs must be >= 1");
  }
  if (cfg.data_csv.empty()) {
    if (cfg.run.batch_size < 1 || cfg.run.batch_size > cfg.l) {
      throw ConfigError(r.context("b") + ": b = " +
                        std::to_string(cfg.run.batch_size) +
                        " out of range [1, l = " + std::to_string(cfg.l) +
                        "]");
    }
    if (cfg.run.block_size < 1 || cfg.run.block_size > cfg.n) {
      throw ConfigError(r.context("y") + ": y = " +
                        std::to_string(cfg.run.block_size) +
                        " out of range [1, n = " + std::to_string(cfg.n) +
                        "]");
    }
  } else if (!fs::exists(cfg.data_csv)) {
    throw ConfigError(r.context("data_csv") + ": file '" + cfg.data_csv +
                      "' does not exist");
  }
  if (cfg.backend == Backend::kAsync && cfg.threads < 1) {
    throw ConfigError(r.context("threads") + ": threads must be >= 1");
  }
  if (!cfg.schedule_file.empty()) {
    if (!fs::exists(cfg.schedule_file)) {
      throw ConfigError(r.context("schedule_file") + ": file '" +
                        cfg.schedule_file + "' does not exist");
    }
    cfg.scenario.schedule = load_delay_schedule(cfg.schedule_file);
  }
  if (cfg.backend == Backend::kSimulated) cfg.scenario.validate();
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw ConfigError(r.context("alpha") + ": alpha must lie in (0, 1)");
  }
  if (!(cfg.u0 > 0.0 && cfg.u0 < 1.0)) {
    throw ConfigError(r.context("u0") + ": u0 must lie in (0, 1)");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config_text(read_text_file(path), path);
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  auto put = [&](const char* key, const std::string& v) {
    out << key << " = " << v << '\n';
  };
  put("L", format_double(cfg.L));
  put("L_hat", format_double(cfg.L_hat));
  put("L_tilde", format_double(cfg.L_tilde));
  put("algorithm", algorithm_name(cfg.run.algorithm));
  put("alpha", format_double(cfg.alpha));
  put("b", std::to_string(cfg.run.batch_size));
  put("backend", backend_name(cfg.backend));
  put("data_csv", cfg.data_csv);
  put("data_seed", std::to_string(cfg.data_seed));
  put("decay", format_double(cfg.run.baseline_decay));
  put("delay_law", delay_law_name(cfg.scenario.delay_law));
  put("epochs", std::to_string(cfg.run.epochs));
  put("estimate_trials", std::to_string(cfg.estimate_trials));
  put("fixed_delay", std::to_string(cfg.scenario.fixed_delay));
  put("gamma", format_double(cfg.run.gamma));
  put("gamma0", format_double(cfg.run.baseline_gamma0));
  put("l", std::to_string(cfg.l));
  put("label_noise", format_double(cfg.label_noise));
  put("lambda", format_double(cfg.lambda));
  put("m", std::to_string(cfg.run.inner_iters));
  put("mask_policy", mask_policy_name(cfg.scenario.mask_policy));
  put("mu", cfg.mu_spec);
  put("n", std::to_string(cfg.n));
  put("objective", cfg.objective);
  put("out", cfg.out);
  put("p_keep", format_double(cfg.scenario.p_keep));
  put("scenario_seed", std::to_string(cfg.scenario.seed));
  put("schedule_file", cfg.schedule_file);
  put("seed", std::to_string(cfg.run.seed));
  put("tau", std::to_string(cfg.scenario.tau));
  put("theory", cfg.theory ? "true" : "false");
  put("threads", std::to_string(cfg.threads));
  put("timing", timing_name(cfg.run.timing));
  put("trace_cadence", std::to_string(cfg.run.trace_cadence));
  put("u0", format_double(cfg.u0));
  put("y", std::to_string(cfg.run.block_size));
  return out.str();
}

std::unique_ptr<FiniteSumObjective> build_objective(
    const ExperimentConfig& cfg) {
  SyntheticDataset ds;
  if (!cfg.data_csv.empty()) {
    ds = import_dataset_csv(cfg.data_csv);
  } else {
    GeneratorKind kind = cfg.objective == "ridge"
                             ? GeneratorKind::kGaussianLinear
                             : GeneratorKind::kGaussianLogistic;
    ds = make_synthetic_dataset(kind, cfg.l, cfg.n, cfg.data_seed,
                                cfg.label_noise);
  }
  if (cfg.objective == "ridge") return make_ridge(std::move(ds), cfg.lambda);
  if (cfg.objective == "logistic") {
    return make_logistic(std::move(ds), cfg.lambda);
  }
  return make_least_squares_svm(std::move(ds), cfg.lambda);
}

SmoothnessConstants resolve_constants(const ExperimentConfig& cfg,
                                      const FiniteSumObjective& obj) {
  SmoothnessConstants c;
  if (cfg.L_tilde > 0.0) {
    c.L_tilde = cfg.L_tilde;
    c.L = cfg.L > 0.0 ? cfg.L : cfg.L_tilde;
    c.L_hat = cfg.L_hat > 0.0 ? cfg.L_hat : 1.0;
    c.source = ConstantsSource::kAnalytic;
    return c;
  }
  c = estimate_constants(obj, resolve_mu(cfg, obj.dimension()),
                         cfg.estimate_trials, cfg.data_seed ^ 0x7e0);
  if (cfg.L > 0.0) c.L = cfg.L;
  if (cfg.L_hat > 0.0) c.L_hat = cfg.L_hat;
  return c;
}

AnalysisSettings analysis_settings(const ExperimentConfig& cfg,
                                   const SmoothnessConstants& constants) {
  AnalysisSettings st;
  st.N = cfg.n;
  st.l = cfg.l;
  st.Y = cfg.run.block_size;
  st.b = cfg.run.batch_size;
  st.tau = cfg.backend == Backend::kSimulated ? cfg.scenario.tau : 0;
  st.m = cfg.run.inner_iters;
  st.S = cfg.run.epochs;
  st.alpha = cfg.alpha;
  st.u0 = cfg.u0;
  st.mu = resolve_mu(cfg, cfg.n);
  st.constants = constants;
  st.gamma = cfg.run.gamma;
  return st;
}

RateFit fit_rate(const Trace& trace, RateMetric metric, RateAxis axis,
                 double burn_in_fraction) {
  Series s = metric_series(trace, metric, axis);
  if (s.x.empty()) throw ConfigError("rate fit: empty trace");
  const double x_max = *std::max_element(s.x.begin(), s.x.end());
  const double x_min_keep = burn_in_fraction * x_max;

  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < s.x.size(); ++k) {
    if (s.x[k] <= 0.0 || s.x[k] < x_min_keep) continue;
    if (!(s.y[k] > 0.0)) {
      throw ConfigError("rate fit: nonpositive metric value " +
                        format_double(s.y[k]) + " at x = " +
                        format_double(s.x[k]));
    }
    lx.push_back(std::log(s.x[k]));
    ly.push_back(std::log(s.y[k]));
  }
  if (lx.size() < 10) {
    throw ConfigError("rate fit needs at least 10 points in the window, got " +
                      std::to_string(lx.size()));
  }

  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  if (sxx == 0.0) throw ConfigError("rate fit: degenerate x values");

  RateFit fit;
  fit.points = lx.size();
  fit.slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    double resid = ly[k] - my - fit.slope * (lx[k] - mx);
    rss += resid * resid;
  }
  fit.ci = 1.96 * std::sqrt(rss / std::max(1.0, n - 2.0) / sxx);
  return fit;
}

RateReport rate_report(const Trace& trace, const std::string& algorithm) {
  RateReport rep;
  rep.algorithm = algorithm;
  rep.min_vs_iter =
      fit_rate(trace, RateMetric::kGradSqMin, RateAxis::kIterations);
  rep.avg_vs_iter =
      fit_rate(trace, RateMetric::kGradSqAvg, RateAxis::kIterations);
  rep.min_vs_evals =
      fit_rate(trace, RateMetric::kGradSqMin, RateAxis::kEvaluations);
  rep.avg_vs_evals =
      fit_rate(trace, RateMetric::kGradSqAvg, RateAxis::kEvaluations);
  if (!trace.records.empty()) {
    rep.final_f = trace.records.back().f;
    rep.final_grad_norm_sq = trace.records.back().grad_norm_sq;
  }
  return rep;
}

std::string RateReport::to_report() const {
  std::ostringstream out;
  auto put_fit = [&](const char* name, const RateFit& f) {
    out << "slope_" << name << " = " << format_double(f.slope) << '\n';
    out << "ci_" << name << " = " << format_double(f.ci) << '\n';
    out << "points_" << name << " = " << f.points << '\n';
  };
  out << "algorithm = " << algorithm << '\n';
  out << "final_f = " << format_double(final_f) << '\n';
  out << "final_grad_norm_sq = " << format_double(final_grad_norm_sq) << '\n';
  put_fit("min_vs_iter", min_vs_iter);
  put_fit("avg_vs_iter", avg_vs_iter);
  put_fit("min_vs_evals", min_vs_evals);
  put_fit("avg_vs_evals", avg_vs_evals);
  return out.str();
}

std::string resolve_out_dir(const std::string& out) {
  const char* root = std::getenv("ZOVR_OUT");
  if (root && *root && !fs::path(out).is_absolute()) {
    return (fs::path(root) / out).string();
  }
  return out;
}

namespace {

std::string certificate_text_for(const ExperimentConfig& cfg,
                                 const FiniteSumObjective& obj,
                                 double* run_margin_out) {
  SmoothnessConstants constants = resolve_constants(cfg, obj);
  AnalysisSettings st = analysis_settings(cfg, constants);
  st.N = obj.dimension();
  st.l = obj.num_components();
  st.mu = resolve_mu(cfg, obj.dimension());

  const double run_margin = variance_margin(st, cfg.run.gamma);
  if (run_margin_out) *run_margin_out = run_margin;

  std::string text;
  try {
    Certificate cert = theorem2_certificate(st);
    text = certificate_report(cert);
  } catch (const InfeasibleSettingsError& e) {
    text = std::string("feasible = false\nnote = ") + e.what() + "\n";
  }
  text += "run_gamma = " + format_double(cfg.run.gamma) + "\n";
  text += "run_variance_margin = " + format_double(run_margin) + "\n";
  text += "constants_source = ";
  text += constants.source == ConstantsSource::kAnalytic ? "analytic"
                                                         : "empirical-estimate";
  text += "\nconstant_L = " + format_double(constants.L) + "\n";
  text += "constant_L_tilde = " + format_double(constants.L_tilde) + "\n";
  text += "constant_L_hat = " + format_double(constants.L_hat) + "\n";
  return text;
}

void require_run_margin(double run_margin, const ExperimentConfig& cfg) {
  if (!(run_margin > 0.0)) {
    throw InfeasibleSettingsError(
        "configured gamma violates the variance-bound precondition: "
        "Y - 2 N L_tilde^2 gamma^2 tau^2 = " +
        format_double(run_margin) + " <= 0 (gamma = " +
        format_double(cfg.run.gamma) + ", tau = " +
        std::to_string(cfg.scenario.tau) + ")");
  }
}

}  // namespace

std::string certify(const ExperimentConfig& cfg) {
  auto obj = build_objective(cfg);
  double run_margin = 0.0;
  std::string text = certificate_text_for(cfg, *obj, &run_margin);
  std::string dir = resolve_out_dir(cfg.out);
  fs::create_directories(dir);
  write_text_file((fs::path(dir) / "certificate.txt").string(), text);
  require_run_margin(run_margin, cfg);
  return text;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult res;
  res.out_dir = resolve_out_dir(cfg.out);
  std::error_code ec;
  fs::create_directories(res.out_dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory '" + res.out_dir +
                      "': " + ec.message());
  }
  const fs::path dir(res.out_dir);

  auto obj = build_objective(cfg);
  RunConfig rc = cfg.run;
  rc.mu = resolve_mu(cfg, obj->dimension());
  rc.validate(*obj);

  write_text_file((dir / "config.resolved").string(), dump_config(cfg));

  if (cfg.theory) {
    double run_margin = 0.0;
    std::string cert_text = certificate_text_for(cfg, *obj, &run_margin);
    write_text_file((dir / "certificate.txt").string(), cert_text);
    require_run_margin(run_margin, cfg);
  }

  Trace trace;
  RunStatus status = RunStatus::kCompleted;
  std::string message;
  switch (cfg.backend) {
    case Backend::kSequential: {
      RunResult r = cfg.run.algorithm == Algorithm::kDszovr
                        ? run_dszovr(*obj, rc)
                        : run_asyszo_sequential(*obj, rc);
      res.x_final = std::move(r.x);
      trace = std::move(r.trace);
      status = r.status;
      message = std::move(r.message);
      break;
    }
    case Backend::kAsync: {
      if (cfg.run.algorithm != Algorithm::kDszovr) {
        throw ConfigError(
            "algorithm asyszo has no async backend here; use backend = "
            "sequential");
      }
      AsyncResult r = run_async(*obj, rc, cfg.threads);
      res.x_final = std::move(r.x);
      trace = std::move(r.trace);
      status = r.status;
      message = std::move(r.message);
      break;
    }
    case Backend::kSimulated: {
      if (cfg.run.algorithm != Algorithm::kDszovr) {
        throw ConfigError(
            "the simulator drives dszovr; set algorithm = dszovr");
      }
      SimResult r = run_simulated(*obj, rc, cfg.scenario);
      res.x_final = std::move(r.x);
      trace = std::move(r.trace);
      status = r.status;
      message = std::move(r.message);
      r.log.write_csv_file((dir / "update_log.csv").string());
      break;
    }
  }

  trace.write_csv_file((dir / "trace.csv").string());

  auto by_iter = [](const TraceRecord& r) {
    return static_cast<double>(r.global_iter);
  };
  auto by_evals = [](const TraceRecord& r) {
    return static_cast<double>(r.evals);
  };
  auto f_of = [](const TraceRecord& r) { return r.f; };
  auto g_of = [](const TraceRecord& r) { return r.grad_norm_sq; };
  write_plot_file((dir / "f_vs_iter.dat").string(), trace, by_iter, f_of);
  write_plot_file((dir / "gradsq_vs_iter.dat").string(), trace, by_iter,
                  g_of);
  write_plot_file((dir / "f_vs_evals.dat").string(), trace, by_evals, f_of);
  write_plot_file((dir / "gradsq_vs_evals.dat").string(), trace, by_evals,
                  g_of);
  for (auto axis : {RateAxis::kIterations, RateAxis::kEvaluations}) {
    Series s = metric_series(trace, RateMetric::kGradSqMin, axis);
    std::string text;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      text += format_double(s.x[k]);
      text += ' ';
      text += format_double(s.y[k]);
      text += '\n';
    }
    write_text_file((dir / (axis == RateAxis::kIterations
                                ? "gradsq_min_vs_iter.dat"
                                : "gradsq_min_vs_evals.dat"))
                        .string(),
                    text);
  }

  try {
    res.rates = rate_report(
        trace, cfg.run.algorithm == Algorithm::kDszovr ? "dszovr" : "asyszo");
    res.rates_valid = true;
    write_text_file((dir / "rates.txt").string(), res.rates.to_report());
  } catch (const ConfigError& e) {
    write_text_file((dir / "rates.txt").string(),
                    std::string("unavailable = true\nreason = ") + e.what() +
                        "\n");
  }

  switch (status) {
    case RunStatus::kCompleted:
      res.exit_code = kExitOk;
      break;
    case RunStatus::kDiverged:
      res.exit_code = kExitDiverged;
      res.message = message.empty() ? "run diverged" : message;
      break;
    case RunStatus::kAborted:
      res.exit_code = kExitFailure;
      res.message = message.empty() ? "run aborted" : message;
      break;
  }
  return res;
}

ReplayReport replay_run_directory(const std::string& run_dir) {
  const fs::path dir(run_dir);
  ExperimentConfig cfg = load_config((dir / "config.resolved").string());
  if (cfg.backend != Backend::kSimulated) {
    throw ConfigError("replay needs a run directory from the simulated "
                      "backend");
  }
  auto obj = build_objective(cfg);
  RunConfig rc = cfg.run;
  rc.mu = resolve_mu(cfg, obj->dimension());
  UpdateLog log = UpdateLog::from_csv_file((dir / "update_log.csv").string());
  return replay_check(*obj, rc, cfg.scenario, log);
}

}  // namespace zovr
