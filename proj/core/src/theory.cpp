#include "zovr/theory.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "zovr/error.hpp"
#include "zovr/sampling.hpp"
#include "zovr/textio.hpp"

namespace zovr {

namespace {

void check_settings(const AnalysisSettings& st) {
  if (st.N < 1 || st.l < 1) {
    throw ConfigError("analysis settings need N >= 1 and l >= 1");
  }
  if (st.Y < 1 || st.Y > st.N) {
    throw ConfigError("analysis settings: Y out of range [1, N]");
  }
  if (st.b < 1 || st.b > st.l) {
    throw ConfigError("analysis settings: b out of range [1, l]");
  }
  if (!(st.alpha > 0.0 && st.alpha < 1.0)) {
    throw ConfigError("analysis settings: alpha must lie in (0, 1)");
  }
  if (!(st.u0 > 0.0 && st.u0 < 1.0)) {
    throw ConfigError("analysis settings: u0 must lie in (0, 1)");
  }
  if (!(st.constants.L >= 0.0) || !(st.constants.L_tilde >= 0.0) ||
      !(st.constants.L_hat >= 0.0)) {
    throw ConfigError("analysis settings: constants must be nonnegative");
  }
}

double derived_gamma(const AnalysisSettings& st) {
  if (!(st.constants.L_tilde > 0.0)) {
    throw ConfigError("deriving gamma needs L_tilde > 0");
  }
  return st.u0 * static_cast<double>(st.b) /
         (st.constants.L_tilde *
          std::pow(static_cast<double>(st.l), st.alpha));
}

double derived_beta(const AnalysisSettings& st) {
  const double n = static_cast<double>(st.N);
  return st.constants.L_tilde * n * n / static_cast<double>(st.Y);
}

double effective_gamma(const AnalysisSettings& st) {
  return st.gamma > 0.0 ? st.gamma : derived_gamma(st);
}

double effective_beta(const AnalysisSettings& st) {
  return st.beta > 0.0 ? st.beta : derived_beta(st);
}

double require_margin(const AnalysisSettings& st, double gamma) {
  double margin = variance_margin(st, gamma);
  if (!(margin > 0.0)) {
    throw InfeasibleSettingsError(
        "variance bound precondition violated: Y - 2 N L_tilde^2 gamma^2 "
        "tau^2 = " +
        format_double(margin) + " <= 0 (gamma = " + format_double(gamma) +
        ", tau = " + std::to_string(st.tau) + ")");
  }
  return margin;
}

// c_{t+1} N g^2 / Y + L Y g^2 / (2N) + g^3 N L^2 tau^2 / Y
double bracket_term(const AnalysisSettings& st, double gamma, double c_next) {
  const double n = static_cast<double>(st.N);
  const double y = static_cast<double>(st.Y);
  const double tau = static_cast<double>(st.tau);
  const double L = st.constants.L;
  return c_next * n * gamma * gamma / y +
         L * y * gamma * gamma / (2.0 * n) +
         gamma * gamma * gamma * n * L * L * tau * tau / y;
}

const char* kLemma2Note =
    "variance bound uses the stated factor 2*N*L_tilde^2/b; the proof's "
    "final line carries 2*L_tilde^2/b instead";

}  // namespace

double compute_omega(const SmoothnessConstants& constants,
                     const SmoothingSchedule& mu, std::size_t n) {
  if (mu.mu.size() != n) {
    throw ConfigError("omega: smoothing schedule has " +
                      std::to_string(mu.mu.size()) + " radii, expected " +
                      std::to_string(n));
  }
  double sum_sq = 0.0;
  for (double m : mu.mu) {
    if (!(m >= 0.0)) {
      throw ConfigError("omega: smoothing radii must be nonnegative");
    }
    sum_sq += m * m;
  }
  return constants.L * constants.L * sum_sq / static_cast<double>(n);
}

double variance_margin(const AnalysisSettings& st, double gamma) {
  const double n = static_cast<double>(st.N);
  const double lt = st.constants.L_tilde;
  const double tau = static_cast<double>(st.tau);
  return static_cast<double>(st.Y) -
         2.0 * n * lt * lt * gamma * gamma * tau * tau;
}

DerivedSettings theorem2_settings(const AnalysisSettings& st) {
  check_settings(st);
  const double l_alpha = std::pow(static_cast<double>(st.l), st.alpha);
  if (!(static_cast<double>(st.b) < l_alpha)) {
    throw InfeasibleSettingsError(
        "hypothesis b < l^alpha violated: b = " + std::to_string(st.b) +
        ", l^alpha = " + format_double(l_alpha));
  }
  DerivedSettings d;
  d.gamma = derived_gamma(st);
  d.beta = derived_beta(st);
  const double margin = require_margin(st, d.gamma);
  const double n = static_cast<double>(st.N);
  const double lt = st.constants.L_tilde;
  d.theta = d.gamma * d.beta +
            4.0 * n * n * d.gamma * d.gamma * lt * lt /
                (static_cast<double>(st.b) * margin);
  d.m_theorem = std::floor(static_cast<double>(st.Y) * l_alpha /
                           (5.0 * st.u0 * static_cast<double>(st.b) * n * n));
  return d;
}

CSequence c_sequence(const AnalysisSettings& st) {
  check_settings(st);
  const double gamma = effective_gamma(st);
  const double beta = effective_beta(st);
  const double margin = require_margin(st, gamma);
  const double n = static_cast<double>(st.N);
  const double y = static_cast<double>(st.Y);
  const double lt = st.constants.L_tilde;
  const double lh = st.constants.L_hat;
  const double growth = 4.0 * y * n * lt * lt /
                        (static_cast<double>(st.b) * margin);

  CSequence seq;
  seq.c.assign(st.m + 1, 0.0);
  seq.gamma_t.assign(st.m, 0.0);
  for (std::size_t t = st.m; t-- > 0;) {
    const double c_next = seq.c[t + 1];
    const double bracket = bracket_term(st, gamma, c_next);
    seq.c[t] = c_next * (1.0 + gamma * beta) + bracket * growth;
    seq.gamma_t[t] = gamma / 2.0 - bracket * 4.0 * y * lh / margin;
    if (beta < 2.0 * c_next) seq.beta_dominates = false;
  }
  seq.min_gamma_t = seq.gamma_t.empty() ? 0.0 : seq.gamma_t.front();
  for (double g : seq.gamma_t) seq.min_gamma_t = std::min(seq.min_gamma_t, g);
  return seq;
}

double Certificate::predicted_bound(double T, double f0, double fS) const {
  if (!(T > 0.0)) throw ConfigError("predicted bound needs T > 0");
  if (!(sigma > 0.0)) {
    throw InfeasibleSettingsError(
        "predicted bound undefined: sigma <= 0 (u0 too large)");
  }
  return l_tilde_ * l_alpha_ * (f0 - fS) / (sigma * b_ * T) +
         n_ * u0_ * omega / (4.0 * sigma);
}

Certificate theorem2_certificate(const AnalysisSettings& st) {
  check_settings(st);
  DerivedSettings d = theorem2_settings(st);
  const double margin = require_margin(st, d.gamma);
  const double n = static_cast<double>(st.N);
  const double y = static_cast<double>(st.Y);
  const double b = static_cast<double>(st.b);
  const double tau = static_cast<double>(st.tau);
  const double L = st.constants.L;
  const double lh = st.constants.L_hat;
  const double l_alpha = std::pow(static_cast<double>(st.l), st.alpha);

  Certificate cert;
  cert.gamma = d.gamma;
  cert.beta = d.beta;
  cert.theta = d.theta;
  cert.m_theorem = d.m_theorem;
  cert.omega = compute_omega(st.constants, st.mu, st.N);
  cert.rho1 = (2.0 * L * y * y / n + 4.0 * n * L * L * tau * tau * st.u0 * b) /
              (5.0 * n) * (std::numbers::e - 1.0);
  cert.rho2 = 4.0 * y * lh / margin;
  cert.rho3 = 0.5 - cert.rho1 * n * cert.rho2 * d.gamma / y -
              L * y * cert.rho2 * d.gamma / (2.0 * n) -
              cert.rho2 * n * L * L * tau * tau * d.gamma * d.gamma / y;
  cert.sigma = cert.rho3 * st.u0;
  cert.rho3_positive = cert.rho3 > 0.0;
  cert.theta_bound_ok = d.theta <= 5.0 * st.u0 * b * n * n / (y * l_alpha);

  if (d.m_theorem >= 1.0) {
    AnalysisSettings at_theorem = st;
    at_theorem.gamma = d.gamma;
    at_theorem.beta = d.beta;
    at_theorem.m = static_cast<std::size_t>(d.m_theorem);
    CSequence seq = c_sequence(at_theorem);
    cert.c0 = seq.c.front();
    cert.min_gamma_t = seq.min_gamma_t;
    cert.c0_bound_ok = cert.c0 <= cert.rho1;
    cert.gamma_lower_ok =
        cert.sigma > 0.0 &&
        seq.min_gamma_t >= cert.sigma * b / (st.constants.L_tilde * l_alpha);
  } else {
    cert.c0_bound_vacuous = true;
    cert.gamma_lower_ok = cert.sigma > 0.0;
  }
  if (!cert.rho3_positive) {
    cert.note = "u0 too large: rho3 = " + format_double(cert.rho3) +
                " <= 0; " + kLemma2Note;
  } else {
    cert.note = kLemma2Note;
  }

  cert.l_alpha_ = l_alpha;
  cert.b_ = b;
  cert.l_tilde_ = st.constants.L_tilde;
  cert.n_ = n;
  cert.u0_ = st.u0;
  return cert;
}

std::string certificate_report(const Certificate& cert) {
  std::ostringstream out;
  auto put = [&](const char* key, double v) {
    out << key << " = " << format_double(v) << '\n';
  };
  auto put_bool = [&](const char* key, bool v) {
    out << key << " = " << (v ? "true" : "false") << '\n';
  };
  put("gamma", cert.gamma);
  put("beta", cert.beta);
  put("theta", cert.theta);
  put("m_theorem", cert.m_theorem);
  put("omega", cert.omega);
  put("rho1", cert.rho1);
  put("rho2", cert.rho2);
  put("rho3", cert.rho3);
  put("sigma", cert.sigma);
  put("c0", cert.c0);
  put("min_gamma_t", cert.min_gamma_t);
  put_bool("c0_bound_ok", cert.c0_bound_ok);
  put_bool("c0_bound_vacuous", cert.c0_bound_vacuous);
  put_bool("theta_bound_ok", cert.theta_bound_ok);
  put_bool("gamma_lower_ok", cert.gamma_lower_ok);
  put_bool("rho3_positive", cert.rho3_positive);
  put_bool("feasible", cert.all_ok());
  out << "note = " << cert.note << '\n';
  return out.str();
}

Certificate parse_certificate_report(const std::string& text) {
  Certificate cert;
  for (auto line : split(text, '\n')) {
    auto s = trim(line);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("certificate line without '=': " + std::string(s));
    }
    auto key = trim(s.substr(0, eq));
    auto value = trim(s.substr(eq + 1));
    auto as_bool = [&]() { return value == "true"; };
    if (key == "gamma") cert.gamma = parse_double(value, "certificate");
    else if (key == "beta") cert.beta = parse_double(value, "certificate");
    else if (key == "theta") cert.theta = parse_double(value, "certificate");
    else if (key == "m_theorem")
      cert.m_theorem = parse_double(value, "certificate");
    else if (key == "omega") cert.omega = parse_double(value, "certificate");
    else if (key == "rho1") cert.rho1 = parse_double(value, "certificate");
    else if (key == "rho2") cert.rho2 = parse_double(value, "certificate");
    else if (key == "rho3") cert.rho3 = parse_double(value, "certificate");
    else if (key == "sigma") cert.sigma = parse_double(value, "certificate");
    else if (key == "c0") cert.c0 = parse_double(value, "certificate");
    else if (key == "min_gamma_t")
      cert.min_gamma_t = parse_double(value, "certificate");
    else if (key == "c0_bound_ok") cert.c0_bound_ok = as_bool();
    else if (key == "c0_bound_vacuous") cert.c0_bound_vacuous = as_bool();
    else if (key == "theta_bound_ok") cert.theta_bound_ok = as_bool();
    else if (key == "gamma_lower_ok") cert.gamma_lower_ok = as_bool();
    else if (key == "rho3_positive") cert.rho3_positive = as_bool();
    else if (key == "note") cert.note = std::string(value);
    // other keys ("feasible", run echoes) are derived or informational
  }
  return cert;
}

SmoothnessConstants estimate_constants(const FiniteSumObjective& obj,
                                       const SmoothingSchedule& mu,
                                       std::size_t trials,
                                       std::uint64_t seed) {
  if (trials < 2) {
    throw ConfigError("estimate_constants needs at least 2 trials");
  }
  const std::size_t n = obj.dimension();
  const std::size_t l = obj.num_components();
  mu.validate(n);
  Pcg64 rng(seed, /*stream_id=*/1);

  const bool analytic = obj.has_analytic_gradient();
  SmoothnessConstants est;
  est.source = ConstantsSource::kEmpiricalEstimate;
  est.L_hat = 0.0;

  auto component_field = [&](std::size_t i, const ParameterVector& x) {
    ParameterVector g(n);
    for (std::size_t j = 0; j < n; ++j) {
      g[j] = central_diff(obj, i, x, j, mu.mu[j]);
    }
    return g;
  };
  auto norm = [](const ParameterVector& v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s);
  };
  auto diff_norm = [&](const ParameterVector& a, const ParameterVector& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
  };

  // The full central-difference field costs 2Nl evaluations per point,
  // so the L_hat ratio is sampled on a capped subset of the trials.
  const std::size_t hat_points = std::min<std::size_t>(trials, 32);

  ParameterVector x(n), y(n), gx(n), gy(n);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    for (std::size_t j = 0; j < n; ++j) x[j] = rng.next_gaussian();
    double r = 0.1 + 0.9 * rng.next_double();
    ParameterVector dir(n);
    double dn = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dir[j] = rng.next_gaussian();
      dn += dir[j] * dir[j];
    }
    dn = std::sqrt(dn);
    if (dn == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) y[j] = x[j] + r * dir[j] / dn;

    const std::size_t i = static_cast<std::size_t>(rng.next_below(l));
    if (analytic) {
      obj.analytic_component_gradient(i, x, gx);
      obj.analytic_component_gradient(i, y, gy);
      est.L = std::max(est.L, diff_norm(gx, gy) / r);
    }
    ParameterVector fx = component_field(i, x);
    ParameterVector fy = component_field(i, y);
    double lt = diff_norm(fx, fy) / r;
    est.L_tilde = std::max(est.L_tilde, lt);
    if (!analytic) est.L = std::max(est.L, lt);

    if (trial < hat_points && analytic) {
      SnapshotGradient field = full_smoothed_gradient(obj, x, mu);
      ParameterVector grad = obj.analytic_gradient(x);
      double gn = norm(grad);
      if (gn > 1e-8) {
        est.L_hat = std::max(est.L_hat, norm(field.g_mu) / gn);
      }
    }
  }
  if (est.L_hat == 0.0) est.L_hat = 1.0;
  return est;
}

}  // namespace zovr
