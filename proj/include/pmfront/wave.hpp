#pragma once

#include <utility>
#include <vector>

#include "pmfront/params.hpp"

namespace pmfront::wave {

enum class Termination { ReachedCeiling, CrossedZero, DivedBelow, StepFailure };

const char* to_string(Termination t);

struct IntegratorOptions {
  double front_offset = 0.0;   // seed level delta; 0 -> 1e-5 * q_max
  double saddle_offset = 0.0;  // stop distance eps;  0 -> 1e-5 * q_max
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double max_step = 0.0;       // 0 -> q_max / 256
  double dive_margin = 0.5;    // DivedBelow once p < -(1 + margin) c
  double cone_fraction = 0.5;  // ReachedCeiling cone half-width (relative to gamma*eps)
  double max_dx = 0.0;         // cap on per-step dq/|p| (profile sampling); 0 -> off
  int max_bracket_expansions = 60;
};

// Sampled solution p(q) of the phase-plane equation at trial speed c.
// inner[i] = int_{q0}^{q_i} F(s)/p(s)^2 ds and x[i] = int_0^{q_i} ds/p(s)
// are integrated alongside p and feed the Psi weight and the profile map.
struct PhaseTrajectory {
  ModelParams params;
  double speed = 0.0;
  std::vector<double> q, p;
  std::vector<double> inner, x;
  Termination termination = Termination::StepFailure;
  double stop_q = 0.0;          // event location, or last q reached
  double front_seed_slope = 0.0;

  double q_lo() const { return q.front(); }
  double q_hi() const { return q.back(); }
};

struct WaveSpeed {
  ModelParams params;
  double c = 0.0;
  double c_lo = 0.0, c_hi = 0.0;
  double residual = 0.0;  // |p(delta) + c - front_slope*delta| seed consistency
  int iterations = 0;
};

// Sharp wavefront on x <= 0: pressure phi and density Phi samples.
struct WaveProfile {
  ModelParams params;
  double speed = 0.0;
  std::vector<double> x, phi, Phi;
};

struct Sensitivity {
  double alpha = 0.0;
  double c_prime = 0.0;
  std::vector<std::pair<double, double>> psi_samples;  // (q, Psi(q))
  double quadrature_error = 0.0;
};

struct ProfileConstant {
  double value = 0.0;
  double x_star = 0.0;
  double tail_sensitivity = 0.0;
};

// Positive root of m b^2 + (c + m alpha) b - 1 = 0, the slope of the
// saddle asymptote p ~ -gamma (q_max - q).
double gamma_slope(const ModelParams& params, double c);

// p'(0) = (m-1)/m (1/c - alpha); rejects c <= 0.
double front_slope(const ModelParams& params, double c);

// Shoot from the front seed (delta, -c + slope*delta) toward the saddle.
PhaseTrajectory integrate_trajectory(const ModelParams& params, double c,
                                     const IntegratorOptions& opts = {});

// Bisection between the CrossedZero / DivedBelow classes of the shooter.
WaveSpeed solve_min_speed(const ModelParams& params, double tol = 1e-8,
                          const IntegratorOptions& opts = {});

// Minimal-speed trajectory refined to near machine precision in c and
// truncated where forward shooting is still trustworthy; quadratures extend
// past its ends with the known asymptotic power laws.
PhaseTrajectory minimal_trajectory(const ModelParams& params,
                                   const IntegratorOptions& opts = {});

// Invert p = dphi/dx: x(q) = int_0^q ds/p(s); tail extended to
// phi >= q_max (1 - tail_tol) with the saddle exponential.
WaveProfile reconstruct_profile(const PhaseTrajectory& traj,
                                double tail_tol = 1e-8);

// Psi(q) = q^{1/(m-1)} exp( (1/(m-1)) int_q^1 f(s)/(s p^2) ds ).
double psi_weight(const ModelParams& params, const PhaseTrajectory& traj,
                  double q);

// c'(alpha) = -(m-1) int Psi dq / int Psi/q dq over (0, q_max).
Sensitivity c_prime(const ModelParams& params, const IntegratorOptions& opts = {});

// Log-shift constant c* = -c'(0)/c(0).
double cstar(double m);

// Same constant from the profile-integral form (independent x-space route).
ProfileConstant cstar_profile_form(double m, double tail_tol = 1e-8,
                                   double sensitivity_tol = 1e-3);

// sup over sampled x in [x_lo, 0] of |phi(x;a+h) - phi(x;a-h)| / (2h).
double dphi_dalpha_sup(const ModelParams& params, double h, double x_lo = -10.0);

// Inverse of alpha -> c(alpha) by 1-d root finding (c is decreasing).
double alpha_for_speed(double m, double c_target, double tol = 1e-6);

// Interpolated profile evaluation with tail extension; used by diagnostics.
class ProfileInterp {
 public:
  explicit ProfileInterp(const WaveProfile& profile);
  ~ProfileInterp();
  ProfileInterp(ProfileInterp&&) noexcept;
  ProfileInterp& operator=(ProfileInterp&&) noexcept;
  ProfileInterp(const ProfileInterp&) = delete;

  double pressure(double x) const;  // phi(x); 0 for x >= 0, ceiling tail left
  double density(double x) const;   // Phi(x)
  // x with Phi(x) = u; -inf (as -1e300) when u at/above the resolved ceiling,
  // +inf convention handled by callers for u <= 0.
  double x_at_density(double u) const;
  double x_min() const;
  double tail_rate() const;  // gamma used for the left tail

 private:
  struct Impl;
  Impl* impl_;
};

// Richardson one-sided slope of phi at x = 0 (should equal -c).
double profile_front_slope(const WaveProfile& profile);

// Max |ODE residual| of the reconstructed profile on a uniform resample,
// derivatives taken by finite differences (independent of the phase ODE).
double profile_ode_residual_max(const WaveProfile& profile);

}  // namespace pmfront::wave
