#ifndef ZOVR_THEORY_HPP
#define ZOVR_THEORY_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "zovr/estimator.hpp"
#include "zovr/objective.hpp"

namespace zovr {

enum class ConstantsSource { kAnalytic, kEmpiricalEstimate };

// L:       Lipschitz constant of each component gradient.
// L_tilde: Lipschitz constant of the mixtured gradient (the dense
//          central-difference field); approaches L as the radii shrink.
// L_hat:   bound on the norm of the mixtured gradient relative to the
//          true gradient norm.
struct SmoothnessConstants {
  double L = 0.0;
  double L_tilde = 0.0;
  double L_hat = 1.0;
  ConstantsSource source = ConstantsSource::kAnalytic;
};

struct AnalysisSettings {
  std::size_t N = 1;
  std::size_t l = 1;
  std::size_t Y = 1;
  std::size_t b = 1;
  std::size_t tau = 0;
  std::size_t m = 1;
  std::size_t S = 1;
  double alpha = 0.5;  // in (0, 1)
  double u0 = 0.1;     // in (0, 1)
  SmoothingSchedule mu;
  SmoothnessConstants constants;
  double gamma = 0.0;  // the step size actually run; 0 = use the derived one
  double beta = 0.0;   // 0 = use the derived constant rule
};

// Smoothing-bias constant: omega = L^2 * sum_j mu_j^2 / N.
double compute_omega(const SmoothnessConstants& constants,
                     const SmoothingSchedule& mu, std::size_t n);

struct DerivedSettings {
  double gamma = 0.0;      // u0 b / (L_tilde l^alpha)
  double beta = 0.0;       // L_tilde N^2 / Y
  double theta = 0.0;      // gamma beta + 4 N^2 gamma^2 Lt^2 / (b (Y - 2 N Lt^2 g^2 tau^2))
  double m_theorem = 0.0;  // floor(Y l^alpha / (5 u0 b N^2)); may be 0 at desk scale
};

// Denominator of the variance bound, Y - 2 N L_tilde^2 gamma^2 tau^2.
// Every delay-dependent constant requires it to be positive.
double variance_margin(const AnalysisSettings& st, double gamma);

DerivedSettings theorem2_settings(const AnalysisSettings& st);

struct CSequence {
  std::vector<double> c;      // c[t] for t = 0..m, c[m] = 0
  std::vector<double> gamma_t;  // Gamma_t for t = 0..m-1
  double min_gamma_t = 0.0;
  bool beta_dominates = true;  // beta >= 2 c_{t+1} for every t
};

// Backward recurrence from c_m = 0 at the settings' own gamma/beta/m.
CSequence c_sequence(const AnalysisSettings& st);

struct Certificate {
  // echo of the analysed instance
  double gamma = 0.0;
  double beta = 0.0;
  double theta = 0.0;
  double m_theorem = 0.0;
  double omega = 0.0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  double rho3 = 0.0;
  double sigma = 0.0;
  double c0 = 0.0;          // from the recurrence at m = m_theorem
  double min_gamma_t = 0.0;
  bool c0_bound_ok = false;     // c0 <= rho1; vacuous when m_theorem < 1
  bool c0_bound_vacuous = false;
  bool theta_bound_ok = false;  // theta <= 5 u0 b N^2 / (Y l^alpha)
  bool gamma_lower_ok = false;  // min_t Gamma_t >= sigma b / (L_tilde l^alpha)
  bool rho3_positive = false;
  std::string note;

  bool all_ok() const {
    return (c0_bound_ok || c0_bound_vacuous) && theta_bound_ok &&
           gamma_lower_ok && rho3_positive;
  }
  // Right-hand side of the rate bound for a horizon of T inner
  // iterations and objective gap f0 - fS. With omega = 0 only the O(1/T)
  // term survives.
  double predicted_bound(double T, double f0, double fS) const;

 private:
  friend Certificate theorem2_certificate(const AnalysisSettings&);
  double l_alpha_ = 1.0;
  double b_ = 1.0;
  double l_tilde_ = 0.0;
  double n_ = 1.0;
  double u0_ = 0.0;
};

Certificate theorem2_certificate(const AnalysisSettings& st);

// Flat key=value report, one constant per line.
std::string certificate_report(const Certificate& cert);
Certificate parse_certificate_report(const std::string& text);

// Empirical lower-bound estimates from sampled point pairs: L from the
// per-component analytic gradients (or central-difference proxies when
// the objective is evaluation-only), L_tilde from the per-component
// central-difference fields, L_hat from the ratio of the full
// central-difference field norm to the true gradient norm.
SmoothnessConstants estimate_constants(const FiniteSumObjective& obj,
                                       const SmoothingSchedule& mu,
                                       std::size_t trials,
                                       std::uint64_t seed = 0);

}  // namespace zovr

#endif  // ZOVR_THEORY_HPP
