#pragma once

#include <cstddef>
#include <vector>

#include "pmfront/sim.hpp"
#include "pmfront/wave.hpp"

namespace pmfront::fit {

struct Window {
  double t_lo = 0.0, t_hi = 0.0;
};

// Exact least squares of h(t) ~ c_hat t - B_hat log t + r0_hat.
struct ShiftFit {
  Window window;
  std::size_t rows = 0;
  double c_hat = 0.0, B_hat = 0.0, r0_hat = 0.0;
  double rms_residual = 0.0;
  double condition = 0.0;  // normal-equations condition number
};

ShiftFit fit_shift(const sim::InterfaceSeries& series, Window window);

// Diagnostic variant with the linear speed pinned (fits only B and r0).
ShiftFit fit_shift_pinned(const sim::InterfaceSeries& series, Window window,
                          double c_fixed);

// B_hat(a) - B_hat(b) on a common window; discretization bias cancels.
double delta_B(const sim::InterfaceSeries& a, const sim::InterfaceSeries& b,
               Window window);

struct ScanOptions {
  double lo = -10.0, hi = 10.0;  // offset scan bounds around center
  double step = 1e-3;
  double xi_lo = -20.0, xi_hi = 5.0;  // moving-frame comparison range
  double center = 0.0;
};

struct ProfileComparison {
  double t = 0.0;
  double shift = 0.0;      // minimizing offset
  double sup_error = 0.0;  // minimal sup-norm distance
};

// Aligns a simulated snapshot with the wavefront in the moving frame
// xi = r - k_shift and scans the offset for the best sup-norm match.
ProfileComparison compare_profile(const sim::SimState& snapshot,
                                  const wave::WaveProfile& profile,
                                  double k_shift, ScanOptions opts = {});

struct EnvelopeOptions {
  double c_grid = 0.1;
  double c_max = 10.0;
  double lower_margin = 5.0;  // lower bound tested on r >= c* t - margin log t
};

struct EnvelopeReport {
  double C_lower = 0.0, C_upper = 0.0;
  int violations = 0;  // sample points not coverable with C <= c_max
};

// Smallest shift constants C for which
//   u(r,t) >= (1 - log t/t^2) Phi(xi + C; alpha(t))   (r past the margin)
//   u(r,t) <= (1 + log t/t^2) Phi(xi - C; alpha(t))   (r >= 0)
// hold at all sampled (r,t), with xi = r - c*t + (N-1) c_log log t and
// alpha(t) inverting the speed map at c* - (N-1) c_log / t.
EnvelopeReport envelope_check(const std::vector<sim::SimState>& snapshots,
                              double m, int dim, double c_star, double c_log,
                              EnvelopeOptions opts = {});

}  // namespace pmfront::fit
