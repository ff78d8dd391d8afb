#include "pmfront/wave.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>

#include "pmfront/errors.hpp"
#include "interp.hpp"

namespace pmfront::wave {

namespace {

constexpr double kQuadTol = 1e-9;

double default_or(double v, double fallback) { return v > 0.0 ? v : fallback; }

struct Resolved {
  double delta, eps, max_step;
};

Resolved resolve(const ModelParams& params, const IntegratorOptions& opts) {
  const double qm = params.q_max();
  return {default_or(opts.front_offset, 1e-5 * qm),
          default_or(opts.saddle_offset, 1e-5 * qm),
          default_or(opts.max_step, qm / 256.0)};
}

// Phase-plane right-hand side with the two slaved quadratures:
//   p' = -(c+p)/((m-1)q) - alpha - F(q)/p
//   J' = F(q)/p^2          (inner Psi integral)
//   x' = 1/p               (profile coordinate)
struct PhaseOde {
  const ModelParams& params;
  double c;

  bool operator()(double q, const std::array<double, 3>& y,
                  std::array<double, 3>& dy) const {
    const double p = y[0];
    if (!(p < 0.0)) return false;
    const double F = params.reaction_factor(q);
    const double inv = 1.0 / ((params.m - 1.0) * q);
    dy[0] = -(c + p) * inv - params.alpha - F / p;
    dy[1] = F / (p * p);
    dy[2] = 1.0 / p;
    return std::isfinite(dy[0]);
  }
};

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::ReachedCeiling: return "ReachedCeiling";
    case Termination::CrossedZero: return "CrossedZero";
    case Termination::DivedBelow: return "DivedBelow";
    case Termination::StepFailure: return "StepFailure";
  }
  return "?";
}

double gamma_slope(const ModelParams& params, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("gamma_slope: c must be > 0");
  const double B = c + params.m * params.alpha;
  // positive root of m b^2 + B b - 1 = 0, evaluated cancellation-free
  const double disc = std::sqrt(B * B + 4.0 * params.m);
  return 2.0 / (B + disc);
}

double front_slope(const ModelParams& params, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("front_slope: c must be > 0");
  return (params.m - 1.0) / params.m * (1.0 / c - params.alpha);
}

PhaseTrajectory integrate_trajectory(const ModelParams& params, double c,
                                     const IntegratorOptions& opts) {
  if (!(c > 0.0))
    throw std::invalid_argument("integrate_trajectory: c must be > 0");
  const auto [delta, eps, max_step] = resolve(params, opts);
  const double qm = params.q_max();
  const double q_end = qm - eps;
  if (!(delta < q_end))
    throw std::invalid_argument("integrate_trajectory: offsets overlap");

  const double slope = front_slope(params, c);
  const double gamma = gamma_slope(params, c);
  const double dive_level = -(1.0 + opts.dive_margin) * c;
  const double cross_margin = 1e-9 * (1.0 + c);

  PhaseTrajectory traj{params};
  traj.speed = c;
  traj.front_seed_slope = slope;

  double q = delta;
  std::array<double, 3> y{-c + slope * delta, 0.0,
                          -delta / c - slope * delta * delta / (2.0 * c * c)};
  const PhaseOde ode{params, c};

  auto push = [&](double qq, const std::array<double, 3>& yy) {
    traj.q.push_back(qq);
    traj.p.push_back(yy[0]);
    traj.inner.push_back(yy[1]);
    traj.x.push_back(yy[2]);
  };
  push(q, y);

  // Dormand-Prince 5(4) with FSAL.
  static constexpr double A21 = 1.0 / 5;
  static constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
  static constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
  static constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187,
                          A53 = 64448.0 / 6561, A54 = -212.0 / 729;
  static constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33,
                          A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                          A65 = -5103.0 / 18656;
  static constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192,
                          B5 = -2187.0 / 6784, B6 = 11.0 / 84;
  static constexpr double E1 = 35.0 / 384 - 5179.0 / 57600,
                          E3 = 500.0 / 1113 - 7571.0 / 16695,
                          E4 = 125.0 / 192 - 393.0 / 640,
                          E5 = -2187.0 / 6784 + 92097.0 / 339200,
                          E6 = 11.0 / 84 - 187.0 / 2100, E7 = -1.0 / 40;

  std::array<double, 3> k1{}, k2{}, k3{}, k4{}, k5{}, k6{}, k7{};
  bool have_k1 = false;
  double h = std::min(max_step, (q_end - delta) / 16.0);
  const double h_min = 1e-13 * qm;
  const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

  auto finish_interior = [&](Termination term, double level, double q_prev,
                             const std::array<double, 3>& y_prev, double q_new,
                             const std::array<double, 3>& y_new) {
    double tau = (level - y_prev[0]) / (y_new[0] - y_prev[0]);
    tau = std::clamp(tau, 0.0, 1.0);
    std::array<double, 3> ye{};
    for (int i = 0; i < 3; ++i)
      ye[static_cast<std::size_t>(i)] =
          y_prev[static_cast<std::size_t>(i)] +
          tau * (y_new[static_cast<std::size_t>(i)] -
                 y_prev[static_cast<std::size_t>(i)]);
    ye[0] = level;
    const double qe = q_prev + tau * (q_new - q_prev);
    if (qe > traj.q.back()) push(qe, ye);
    traj.termination = term;
    traj.stop_q = qe;
  };

  for (long iter = 0; iter < 2000000; ++iter) {
    if (y[0] > -cross_margin) {
      traj.termination = Termination::CrossedZero;
      traj.stop_q = q;
      return traj;
    }
    if (q_end - q <= 2.0 * h_min) break;
    h = std::min(h, q_end - q);
    if (opts.max_dx > 0.0)
      h = std::min(h, opts.max_dx * std::max(std::abs(y[0]), 1e-6));
    if (h < h_min) {
      // step collapse: the only singular obstacle ahead of a falling
      // trajectory is the sqrt-type p=0 crossing, so classify by direction
      std::array<double, 3> probe{};
      const bool rising = ode(q, y, probe) && probe[0] > 0.0;
      if (rising || y[0] > -1e-6 * (1.0 + c)) {
        traj.termination = Termination::CrossedZero;
        traj.stop_q = q;
      } else {
        traj.termination = Termination::StepFailure;
        traj.stop_q = q;
      }
      return traj;
    }

    if (!have_k1) {
      if (!ode(q, y, k1)) {
        h *= 0.5;
        continue;
      }
      have_k1 = true;
    }

    std::array<double, 3> yt{}, y5{}, err{};
    bool ok = true;
    auto stage = [&](const std::array<double, 3>& coef_sum) {
      for (std::size_t i = 0; i < 3; ++i) yt[i] = y[i] + h * coef_sum[i];
    };
    std::array<double, 3> s{};
    for (std::size_t i = 0; i < 3; ++i) s[i] = A21 * k1[i];
    stage(s);
    ok = ok && ode(q + c2 * h, yt, k2);
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i) s[i] = A31 * k1[i] + A32 * k2[i];
      stage(s);
      ok = ode(q + c3 * h, yt, k3);
    }
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i)
        s[i] = A41 * k1[i] + A42 * k2[i] + A43 * k3[i];
      stage(s);
      ok = ode(q + c4 * h, yt, k4);
    }
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i)
        s[i] = A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i];
      stage(s);
      ok = ode(q + c5 * h, yt, k5);
    }
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i)
        s[i] = A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] +
               A65 * k5[i];
      stage(s);
      ok = ode(q + h, yt, k6);
    }
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i)
        y5[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] +
                            B6 * k6[i]);
      ok = y5[0] < 0.0 && ode(q + h, y5, k7);
    }

    double err_norm = 0.0;
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i) {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] +
                      E6 * k6[i] + E7 * k7[i]);
        const double sc =
            opts.abs_tol +
            opts.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
        err_norm = std::max(err_norm, std::abs(err[i]) / sc);
      }
      ok = std::isfinite(err_norm);
    }

    if (!ok || err_norm > 1.0) {
      const double shrink =
          ok ? std::max(0.2, 0.9 * std::pow(err_norm, -0.2)) : 0.5;
      h *= shrink;
      continue;
    }

    const double q_new = q + h;
    // events inside the accepted step
    if (y5[0] >= -cross_margin) {
      finish_interior(Termination::CrossedZero, 0.0, q, y, q_new, y5);
      return traj;
    }
    if (y5[0] < dive_level) {
      finish_interior(Termination::DivedBelow, dive_level, q, y, q_new, y5);
      return traj;
    }

    q = q_new;
    y = y5;
    k1 = k7;  // FSAL
    push(q, y);
    h = std::min(max_step,
                 h * std::clamp(0.9 * std::pow(std::max(err_norm, 1e-10), -0.2),
                                0.2, 5.0));
  }

  if (q < q_end - 1e-12 * qm) {
    traj.termination = Termination::StepFailure;
    traj.stop_q = q;
    return traj;
  }

  // Reached the ceiling offset: classify against the saddle cone.
  const double d = qm - q;
  const double dev = y[0] + gamma * d;
  const double cone = opts.cone_fraction * gamma * d + 10.0 * opts.abs_tol;
  traj.stop_q = q;
  if (std::abs(dev) <= cone)
    traj.termination = Termination::ReachedCeiling;
  else if (dev > 0.0)
    traj.termination = Termination::CrossedZero;
  else
    traj.termination = Termination::DivedBelow;
  return traj;
}

namespace {

Termination classify(const ModelParams& params, double c,
                     const IntegratorOptions& opts) {
  const Termination t = integrate_trajectory(params, c, opts).termination;
  if (t == Termination::StepFailure)
    throw step_failure("phase-plane integration underflowed at c=" +
                       std::to_string(c));
  return t;
}

// Which termination class means "trial speed below minimal"? Calibrated once
// against the m=2 oracle (c(0)=1) and then assumed stable.
Termination low_speed_class() {
  static std::once_flag flag;
  static Termination low;
  std::call_once(flag, [] {
    const ModelParams probe(2.0, 0.0);
    const IntegratorOptions opts{};
    const Termination lo = classify(probe, 0.9, opts);
    const Termination hi = classify(probe, 1.1, opts);
    if (lo == hi || lo == Termination::ReachedCeiling ||
        hi == Termination::ReachedCeiling)
      throw solver_error("shooting classifier failed m=2 calibration");
    low = lo;
  });
  return low;
}

}  // namespace

WaveSpeed solve_min_speed(const ModelParams& params, double tol,
                          const IntegratorOptions& opts) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_min_speed: tol <= 0");
  const Termination low = low_speed_class();

  double lo = 0.05;
  double hi = 2.5 + params.m * std::max(0.0, -params.alpha);
  int used = 0;
  Termination cl_lo = classify(params, lo, opts);
  Termination cl_hi = classify(params, hi, opts);
  while (cl_lo == cl_hi) {
    if (++used > opts.max_bracket_expansions)
      throw bracket_not_found("solve_min_speed: no sign change in [" +
                              std::to_string(lo) + ", " + std::to_string(hi) +
                              "]");
    if (cl_lo == low) {  // both below the minimal speed
      lo = hi;
      cl_lo = cl_hi;
      hi *= 2.0;
      cl_hi = classify(params, hi, opts);
    } else {  // both above
      hi = lo;
      cl_hi = cl_lo;
      lo *= 0.25;
      if (lo < 1e-12)
        throw bracket_not_found("solve_min_speed: lower expansion exhausted");
      cl_lo = classify(params, lo, opts);
    }
  }

  int iters = used;
  bool exact = false;
  while (hi - lo > tol && iters < 300) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // machine-width bracket
    const Termination cm = classify(params, mid, opts);
    ++iters;
    if (cm == Termination::ReachedCeiling) {
      lo = hi = mid;
      exact = true;
      break;
    }
    (cm == cl_lo ? lo : hi) = mid;
  }

  WaveSpeed ws{params};
  ws.c = 0.5 * (lo + hi);
  ws.c_lo = exact ? ws.c - 0.5 * tol : lo;
  ws.c_hi = exact ? ws.c + 0.5 * tol : hi;
  ws.iterations = iters;

  const PhaseTrajectory traj = integrate_trajectory(params, ws.c, opts);
  ws.residual = std::abs(traj.p.front() + ws.c -
                         front_slope(params, ws.c) * traj.q.front());
  return ws;
}

namespace {

// Stable descent along the saddle separatrix: integrate the phase equation
// in decreasing q from the seed p = -gamma d0 at q = q_max - d0 down to
// q_stop. Forward shooting cannot track the connection into the corner (the
// saddle direction amplifies every error), but in this direction it
// contracts. Returns samples in decreasing q: (q, p, B, X) with
// B = int_q^{q0} F/p^2 and X = int_q^{q0} 1/p.
struct DescentSamples {
  std::vector<double> q, p, B, X;
};

DescentSamples saddle_descent(const ModelParams& params, double c,
                              double q_stop, double d0,
                              const IntegratorOptions& opts) {
  const double qm = params.q_max();
  const double gamma = gamma_slope(params, c);
  const double q0 = qm - d0;
  const double max_step = default_or(opts.max_step, qm / 256.0);

  auto rhs = [&](double q, const std::array<double, 3>& y,
                 std::array<double, 3>& dy) {
    const double p = y[0];
    if (!(p < 0.0)) return false;
    const double F = params.reaction_factor(q);
    const double inv = 1.0 / ((params.m - 1.0) * q);
    dy[0] = (c + p) * inv + params.alpha + F / p;  // -p'(q)
    dy[1] = F / (p * p);
    dy[2] = 1.0 / p;
    return std::isfinite(dy[0]);
  };

  DescentSamples out;
  double q = q0;
  std::array<double, 3> y{-gamma * d0, 0.0, 0.0};
  auto push = [&] {
    out.q.push_back(q);
    out.p.push_back(y[0]);
    out.B.push_back(y[1]);
    out.X.push_back(y[2]);
  };
  push();

  static constexpr double A21 = 1.0 / 5;
  static constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
  static constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
  static constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187,
                          A53 = 64448.0 / 6561, A54 = -212.0 / 729;
  static constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33,
                          A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                          A65 = -5103.0 / 18656;
  static constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192,
                          B5 = -2187.0 / 6784, B6 = 11.0 / 84;
  static constexpr double E1 = 35.0 / 384 - 5179.0 / 57600,
                          E3 = 500.0 / 1113 - 7571.0 / 16695,
                          E4 = 125.0 / 192 - 393.0 / 640,
                          E5 = -2187.0 / 6784 + 92097.0 / 339200,
                          E6 = 11.0 / 84 - 187.0 / 2100, E7 = -1.0 / 40;
  const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

  std::array<double, 3> k1{}, k2{}, k3{}, k4{}, k5{}, k6{}, k7{};
  bool have_k1 = false;
  double h = std::min(max_step, d0);  // sigma-step; q = q_cur - h
  const double h_min = 1e-14 * qm;

  for (long iter = 0; iter < 4000000; ++iter) {
    const double span = q - q_stop;
    if (span <= 2.0 * h_min) break;
    h = std::min(h, span);
    if (opts.max_dx > 0.0)
      h = std::min(h, opts.max_dx * std::max(std::abs(y[0]), 1e-9));
    if (h < h_min)
      throw step_failure("saddle_descent: step underflow at q=" +
                         std::to_string(q));

    if (!have_k1) {
      if (!rhs(q, y, k1)) {
        h *= 0.5;
        continue;
      }
      have_k1 = true;
    }
    std::array<double, 3> yt{}, y5{};
    bool ok = true;
    auto at = [&](double frac, const std::array<double, 3>& acc,
                  std::array<double, 3>& k) {
      for (std::size_t i = 0; i < 3; ++i) yt[i] = y[i] + h * acc[i];
      return rhs(q - frac * h, yt, k);
    };
    std::array<double, 3> s{};
    for (std::size_t i = 0; i < 3; ++i) s[i] = A21 * k1[i];
    ok = at(c2, s, k2);
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i) s[i] = A31 * k1[i] + A32 * k2[i];
      ok = at(c3, s, k3);
    }
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i)
        s[i] = A41 * k1[i] + A42 * k2[i] + A43 * k3[i];
      ok = at(c4, s, k4);
    }
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i)
        s[i] = A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i];
      ok = at(c5, s, k5);
    }
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i)
        s[i] = A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] +
               A65 * k5[i];
      ok = at(1.0, s, k6);
    }
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i)
        y5[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] +
                            B6 * k6[i]);
      ok = y5[0] < 0.0 && rhs(q - h, y5, k7);
    }
    double err_norm = 0.0;
    if (ok) {
      for (std::size_t i = 0; i < 3; ++i) {
        const double e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] +
                              E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        const double sc = opts.abs_tol + opts.rel_tol * std::max(std::abs(y[i]),
                                                                 std::abs(y5[i]));
        err_norm = std::max(err_norm, std::abs(e) / sc);
      }
      ok = std::isfinite(err_norm);
    }
    if (!ok || err_norm > 1.0) {
      h *= ok ? std::max(0.2, 0.9 * std::pow(err_norm, -0.2)) : 0.5;
      continue;
    }
    q -= h;
    y = y5;
    k1 = k7;
    push();
    h = std::min(max_step,
                 h * std::clamp(0.9 * std::pow(std::max(err_norm, 1e-10), -0.2),
                                0.2, 5.0));
  }
  return out;
}

double smootherstep(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

}  // namespace

PhaseTrajectory minimal_trajectory(const ModelParams& params,
                                   const IntegratorOptions& opts) {
  const double qm = params.q_max();
  // resolve c with the spec's forward shooter and sharp offsets
  IntegratorOptions sharp = opts;
  sharp.saddle_offset = 0.0;
  const WaveSpeed ws = solve_min_speed(params, 1e-13, sharp);

  IntegratorOptions fine = opts;
  if (fine.max_dx <= 0.0) fine.max_dx = 0.005;
  const double q_a = 0.45 * qm, q_b = 0.65 * qm;

  // forward pass covers the front half (stable there)
  IntegratorOptions fopts = fine;
  fopts.saddle_offset = qm - (q_b + 0.05 * qm);
  fopts.cone_fraction = 1e9;  // stop point is far from the saddle cone
  PhaseTrajectory fwd = integrate_trajectory(params, ws.c, fopts);
  if (fwd.termination == Termination::StepFailure || fwd.q.back() < q_b)
    throw solver_error("minimal_trajectory: forward pass failed at m=" +
                       std::to_string(params.m));

  // backward pass covers the saddle half (stable in decreasing q)
  const double d0 = std::clamp(default_or(opts.saddle_offset, 1e-6 * qm),
                               1e-9 * qm, 1e-3 * qm);
  const DescentSamples bwd =
      saddle_descent(params, ws.c, q_a - 0.02 * qm, d0, fine);

  // assemble: forward samples below q_a, blended backward samples above
  detail::Pchip p_fwd(fwd.q, fwd.p);
  detail::Pchip j_fwd(fwd.q, fwd.inner);
  detail::Pchip x_fwd(fwd.q, fwd.x);

  PhaseTrajectory traj{params};
  traj.speed = ws.c;
  traj.front_seed_slope = fwd.front_seed_slope;
  traj.termination = Termination::ReachedCeiling;

  for (std::size_t i = 0; i < fwd.q.size() && fwd.q[i] < q_a; ++i) {
    traj.q.push_back(fwd.q[i]);
    traj.p.push_back(fwd.p[i]);
    traj.inner.push_back(fwd.inner[i]);
    traj.x.push_back(fwd.x[i]);
  }
  std::vector<double> qu, pu;  // upper part, ascending
  for (std::size_t i = bwd.q.size(); i-- > 0;) {
    const double q = bwd.q[i];
    if (q < q_a || (!traj.q.empty() && q <= traj.q.back())) continue;
    const double w = smootherstep((q - q_a) / (q_b - q_a));
    const double p = q < q_b ? (1.0 - w) * p_fwd(q) + w * bwd.p[i] : bwd.p[i];
#ifdef PMFRONT_DEBUG_ASSEMBLY
    if (q < q_b)
      std::fprintf(stderr, "BLEND q=%.6f mismatch=%+.3e w=%.3f\n", q,
                   bwd.p[i] - p_fwd(q), w);
#endif
    qu.push_back(q);
    pu.push_back(p);
  }
  // rebuild the slaved quadratures across the seam from the blended p
  std::vector<double> gj(qu.size()), gx(qu.size());
  for (std::size_t i = 0; i < qu.size(); ++i) {
    gj[i] = params.reaction_factor(qu[i]) / (pu[i] * pu[i]);
    gx[i] = 1.0 / pu[i];
  }
  detail::Pchip GJ(qu, gj), GX(qu, gx);
  const double J0 = j_fwd(qu.front());
  const double X0 = x_fwd(qu.front());
  for (std::size_t i = 0; i < qu.size(); ++i) {
    traj.q.push_back(qu[i]);
    traj.p.push_back(pu[i]);
    traj.inner.push_back(J0 + GJ.integral_from_front(qu[i]));
    traj.x.push_back(X0 + GX.integral_from_front(qu[i]));
  }

#ifdef PMFRONT_DEBUG_ASSEMBLY
  for (std::size_t i = 1; i < traj.q.size(); ++i) {
    if (traj.q[i] > 0.88 && traj.q[i] < 0.93 && params.m == 2.0) {
      const double xe = 2.0 * std::log(1.0 - traj.q[i] / 2.0);
      std::fprintf(stderr, "ASM q=%.9f p_err=%+.3e x=%.10f x_err=%+.3e dq=%.5f\n",
                   traj.q[i], traj.p[i] - (traj.q[i] / 2 - 1), traj.x[i],
                   traj.x[i] - xe, traj.q[i] - traj.q[i - 1]);
    }
  }
#endif
  // resample onto an x-uniform master grid; smooth spacing keeps finite
  // differences of reconstructed profiles second-order accurate everywhere
  {
    const std::vector<double> xr(traj.x.rbegin(), traj.x.rend());
    const std::vector<double> qr(traj.q.rbegin(), traj.q.rend());

    const double dx = fine.max_dx;
    const double x_front = traj.x.front(), x_back = traj.x.back();
    PhaseTrajectory rs{params};
    rs.speed = traj.speed;
    rs.front_seed_slope = traj.front_seed_slope;
    rs.termination = traj.termination;
    rs.q.push_back(traj.q.front());
    rs.p.push_back(traj.p.front());
    rs.inner.push_back(traj.inner.front());
    rs.x.push_back(traj.x.front());
    for (double x = x_front - dx; x > x_back + 0.5 * dx; x -= dx) {
      const double q = detail::cubic4(xr, qr, x);
      if (q <= rs.q.back()) continue;
      rs.q.push_back(q);
      rs.p.push_back(detail::cubic4(traj.q, traj.p, q));
      rs.inner.push_back(detail::cubic4(traj.q, traj.inner, q));
      rs.x.push_back(detail::cubic4(traj.q, traj.x, q));
    }
    if (traj.q.back() > rs.q.back()) {
      rs.q.push_back(traj.q.back());
      rs.p.push_back(traj.p.back());
      rs.inner.push_back(traj.inner.back());
      rs.x.push_back(traj.x.back());
    }
    traj = std::move(rs);
  }
  traj.stop_q = traj.q.back();
  return traj;
}

namespace {

// Interpolated view of a saddle-connected trajectory with asymptotic
// extensions past both sampled ends.
struct TrajCtx {
  ModelParams params;
  double c, qm, gamma, beta, eta;
  double q_lo, q_hi, d_hi, slope;
  double J_hi, J1, x_hi;
  double b_tail = 0.0;  // p ~ -gamma d + b d^2 near the ceiling
  detail::Pchip P, J, X;

  explicit TrajCtx(const PhaseTrajectory& traj)
      : params(traj.params),
        c(traj.speed),
        qm(traj.params.q_max()),
        gamma(gamma_slope(traj.params, traj.speed)),
        beta(1.0 / (traj.params.m - 1.0)),
        eta(0.0),
        q_lo(traj.q.front()),
        q_hi(traj.q.back()),
        d_hi(qm - traj.q.back()),
        slope(traj.front_seed_slope),
        J_hi(traj.inner.back()),
        x_hi(traj.x.back()),
        P(traj.q, traj.p),
        J(traj.q, traj.inner),
        X(traj.q, traj.x) {
    if (traj.termination != Termination::ReachedCeiling)
      throw std::invalid_argument(
          "trajectory must terminate at the ceiling (saddle connection)");
    eta = 1.0 / (params.m * gamma * gamma);
    // fit the next-order tail coefficient on trusted samples
    double num = 0.0, den = 0.0;
    for (std::size_t i = traj.q.size(); i-- > 0;) {
      const double d = qm - traj.q[i];
      if (d > 6.0 * d_hi) break;
      const double r = traj.p[i] + gamma * d;
      num += r * d * d;
      den += d * d * d * d;
    }
    if (den > 0.0) b_tail = num / den;
    J1 = inner_at(1.0);
  }

  double p_at(double q) const {
    if (q <= q_lo) return -c + slope * q;
    if (q >= q_hi) {
      const double d = qm - q;
      return -gamma * d + b_tail * d * d;
    }
    return P(q);
  }

  double inner_at(double q) const {  // int_{q_lo}^{q} F/p^2
    if (q <= q_lo) return J.ys().front() - (q_lo - q) / (c * c);
    if (q >= q_hi) {
      const double d = std::max(qm - q, 1e-300);
      return J_hi + eta * std::log(d_hi / d);
    }
    return J(q);
  }

  double x_at(double q) const {  // int_0^q ds/p
    if (q <= q_lo) return -q / c - slope * q * q / (2.0 * c * c);
    if (q >= q_hi) {
      const double d = std::max(qm - q, 1e-300);
      return x_hi -
             (std::log(d_hi / d) + (b_tail / gamma) * (d_hi - d)) / gamma;
    }
    return X(q);
  }

  double psi(double q) const {
    return std::pow(q, beta) * std::exp(J1 - inner_at(q));
  }
};

}  // namespace

double psi_weight(const ModelParams& params, const PhaseTrajectory& traj,
                  double q) {
  if (!(q > 0.0) || !(q < params.q_max()))
    throw std::invalid_argument("psi_weight: q must lie in (0, q_max)");
  const TrajCtx ctx(traj);
  return ctx.psi(q);
}

Sensitivity c_prime(const ModelParams& params, const IntegratorOptions& opts) {
  const PhaseTrajectory traj = minimal_trajectory(params, opts);
  const TrajCtx ctx(traj);
  const double qm = params.q_max();
  const double a = std::max(1e-3 * qm, 2.0 * ctx.q_lo);

  double e1 = 0.0, e2 = 0.0;
  const double psi_a = ctx.psi(a);
  const double d_panel = std::max(0.01 * qm, 2.0 * ctx.d_hi);
  const double q_panel = qm - d_panel;
  const double psi_p = ctx.psi(q_panel);

  // front panel by the q^{1/(m-1)} power law, ceiling panel by d^{eta}
  double I1 = psi_a * a / (ctx.beta + 1.0);
  I1 += detail::gk_integrate([&](double q) { return ctx.psi(q); }, a, q_panel,
                             kQuadTol, &e1);
  I1 += psi_p * d_panel / (ctx.eta + 1.0);

  double I2 = psi_a / ctx.beta;
  I2 += detail::gk_integrate([&](double q) { return ctx.psi(q) / q; }, a,
                             q_panel, kQuadTol, &e2);
  I2 += psi_p * d_panel / ((ctx.eta + 1.0) * qm);

  Sensitivity out;
  out.alpha = params.alpha;
  out.c_prime = -(params.m - 1.0) * I1 / I2;
  out.quadrature_error =
      std::abs(out.c_prime) *
      (e1 / std::max(I1, 1e-300) + e2 / std::max(I2, 1e-300) +
       psi_p * d_panel * d_panel / std::max(I1, 1e-300));
  const int n_samples = 200;
  out.psi_samples.reserve(n_samples);
  for (int k = 1; k <= n_samples; ++k) {
    const double q = qm * k / (n_samples + 1.0);
    out.psi_samples.emplace_back(q, ctx.psi(q));
  }
  return out;
}

double cstar(double m) {
  const ModelParams params(m, 0.0);
  const WaveSpeed ws = solve_min_speed(params, 1e-11);
  const Sensitivity sens = c_prime(params);
  return -sens.c_prime / ws.c;
}

WaveProfile reconstruct_profile(const PhaseTrajectory& traj, double tail_tol) {
  if (traj.termination != Termination::ReachedCeiling)
    throw std::invalid_argument(
        "reconstruct_profile: trajectory did not reach the saddle");
  for (std::size_t i = 0; i + 1 < traj.p.size(); ++i)
    if (!(traj.p[i] < 0.0))
      throw std::invalid_argument(
          "reconstruct_profile: non-negative interior p");
  if (!(tail_tol > 0.0 && tail_tol < 1e-2))
    throw std::invalid_argument("reconstruct_profile: bad tail tolerance");

  const TrajCtx ctx(traj);
  const double qm = ctx.qm;

  WaveProfile prof{traj.params};
  prof.speed = traj.speed;

  // ceiling tail: x-spacing continues the trajectory grid, then grows
  // geometrically so the seam stays smooth for finite differencing
  const double d_stop = qm * tail_tol;
  std::vector<double> tail_d;
  {
    const std::size_t n = traj.x.size();
    double dx = n >= 2 ? traj.x[n - 2] - traj.x[n - 1] : 5e-3;
    if (!(dx > 0.0) || dx > 0.05) dx = 5e-3;
    double d = ctx.d_hi;
    while (d > d_stop * (1.0 + 1e-9)) {
      d *= std::exp(-ctx.gamma * dx);
      d = std::max(d, d_stop);
      tail_d.push_back(d);
      dx *= 1.05;
    }
  }
  for (std::size_t k = tail_d.size(); k-- > 0;) {
    const double q = qm - tail_d[k];
    prof.x.push_back(ctx.x_at(q));
    prof.phi.push_back(q);
  }
  // sampled range, ceiling to front
  for (std::size_t i = traj.q.size(); i-- > 0;) {
    prof.x.push_back(traj.x[i]);
    prof.phi.push_back(traj.q[i]);
  }
  // front closure at x = 0
  prof.x.push_back(0.0);
  prof.phi.push_back(0.0);

  // drop any non-increasing round-off duplicates
  std::size_t w = 1;
  for (std::size_t i = 1; i < prof.x.size(); ++i) {
    if (prof.x[i] > prof.x[w - 1] + 1e-15 * std::abs(prof.x[w - 1]) ||
        (prof.x[i] > prof.x[w - 1] && i + 1 == prof.x.size())) {
      prof.x[w] = prof.x[i];
      prof.phi[w] = prof.phi[i];
      ++w;
    }
  }
  prof.x.resize(w);
  prof.phi.resize(w);
  if (prof.x.back() != 0.0) {
    prof.x.push_back(0.0);
    prof.phi.push_back(0.0);
  }

  prof.Phi.resize(prof.x.size());
  for (std::size_t i = 0; i < prof.x.size(); ++i)
    prof.Phi[i] = traj.params.density_of_pressure(prof.phi[i]);
  return prof;
}

struct ProfileInterp::Impl {
  ModelParams params;
  double gamma, qm;
  double xmin, phi_min_x;  // deepest sample and its pressure
  detail::Pchip phi_of_x;
  detail::Pchip x_of_phi;

  Impl(const WaveProfile& prof)
      : params(prof.params),
        gamma(gamma_slope(prof.params, prof.speed)),
        qm(prof.params.q_max()),
        xmin(prof.x.front()),
        phi_min_x(prof.phi.front()),
        phi_of_x(prof.x, prof.phi),
        x_of_phi(
            [&] {
              std::vector<double> ph(prof.phi.rbegin(), prof.phi.rend());
              return ph;
            }(),
            [&] {
              std::vector<double> xs(prof.x.rbegin(), prof.x.rend());
              return xs;
            }()) {}

  double pressure(double x) const {
    if (x >= 0.0) return 0.0;
    if (x < xmin)
      return qm - (qm - phi_min_x) * std::exp(gamma * (x - xmin));
    return std::clamp(phi_of_x(x), 0.0, qm);
  }
};

ProfileInterp::ProfileInterp(const WaveProfile& profile)
    : impl_(new Impl(profile)) {
  if (profile.x.size() < 8)
    throw std::invalid_argument("ProfileInterp: profile too short");
}
ProfileInterp::~ProfileInterp() { delete impl_; }
ProfileInterp::ProfileInterp(ProfileInterp&& o) noexcept : impl_(o.impl_) {
  o.impl_ = nullptr;
}
ProfileInterp& ProfileInterp::operator=(ProfileInterp&& o) noexcept {
  std::swap(impl_, o.impl_);
  return *this;
}

double ProfileInterp::pressure(double x) const { return impl_->pressure(x); }

double ProfileInterp::density(double x) const {
  return impl_->params.density_of_pressure(impl_->pressure(x));
}

double ProfileInterp::x_at_density(double u) const {
  if (u <= 0.0) return 0.0;
  const double q = impl_->params.pressure_of_density(std::min(u, 1.0));
  if (q >= impl_->qm) return -1e300;
  if (q > impl_->phi_min_x)
    return impl_->xmin +
           std::log((impl_->qm - q) / (impl_->qm - impl_->phi_min_x)) /
               impl_->gamma;
  return impl_->x_of_phi(q);
}

double ProfileInterp::x_min() const { return impl_->xmin; }
double ProfileInterp::tail_rate() const { return impl_->gamma; }

double profile_front_slope(const WaveProfile& prof) {
  const std::size_t n = prof.x.size();
  if (n < 3) throw std::invalid_argument("profile too short");
  const double x1 = prof.x[n - 2], x2 = prof.x[n - 3];
  const double s1 = prof.phi[n - 2] / x1, s2 = prof.phi[n - 3] / x2;
  return (s1 * x2 - s2 * x1) / (x2 - x1);  // extrapolate chord slope to x->0
}

double profile_ode_residual_max(const WaveProfile& prof) {
  const ModelParams& mp = prof.params;
  const double c = prof.speed;
  double worst = 0.0;
  // Nonuniform 3-point stencils on the samples; only interior samples where
  // the grid is dense enough to define second derivatives take part.
  for (std::size_t i = 1; i + 1 < prof.x.size(); ++i) {
    const double a = prof.x[i] - prof.x[i - 1];
    const double b = prof.x[i + 1] - prof.x[i];
    if (prof.x[i] > -0.05 || std::max(a, b) > 0.05) continue;
    const double fm = prof.phi[i - 1], f0 = prof.phi[i], fp = prof.phi[i + 1];
    const double d1 = (a * a * fp - b * b * fm - (a * a - b * b) * f0) /
                      (a * b * (a + b));
    const double d2 = 2.0 * (a * fp + b * fm - (a + b) * f0) / (a * b * (a + b));
    const double res = -c * d1 - (mp.m - 1.0) * f0 * d2 - d1 * d1 -
                       mp.alpha * (mp.m - 1.0) * f0 * d1 -
                       mp.pressure_reaction(f0);
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

ProfileConstant cstar_profile_form(double m, double tail_tol,
                                   double sensitivity_tol) {
  const ModelParams params(m, 0.0);
  const WaveSpeed ws = solve_min_speed(params, 1e-11);
  const PhaseTrajectory traj = minimal_trajectory(params);
  const WaveProfile prof = reconstruct_profile(traj, tail_tol);
  const double qm = params.q_max();

  const std::size_t n = prof.x.size();
  detail::Pchip phi_of_x(prof.x, prof.phi);
  detail::Pchip Phi_of_x(prof.x, prof.Phi);
  std::vector<double> Phim(n);
  for (std::size_t i = 0; i < n; ++i) Phim[i] = std::pow(prof.Phi[i], m);
  detail::Pchip Phim_of_x(prof.x, Phim);

  // inner weight exponent, cumulative in x from the deepest sample
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dphi = phi_of_x.prime(prof.x[i]);
    g[i] = (1.0 - prof.Phi[i]) / std::min(dphi, -1e-14);
  }
  detail::Pchip g_of_x(prof.x, g);
  std::vector<double> A(n);
  for (std::size_t i = 0; i < n; ++i)
    A[i] = g_of_x.integral_from_front(prof.x[i]);
  detail::Pchip A_of_x(prof.x, A);

  // x_* is the level phi = 1 (density ((m-1)/m)^{1/(m-1)})
  std::vector<double> ph(prof.phi.rbegin(), prof.phi.rend());
  std::vector<double> xs(prof.x.rbegin(), prof.x.rend());
  detail::Pchip x_of_phi(std::move(ph), std::move(xs));
  const double x_star = x_of_phi(1.0);
  const double A_star = A_of_x(x_star);

  auto evaluate = [&](std::size_t i0) {
    std::vector<double> xsub(prof.x.begin() + static_cast<long>(i0),
                             prof.x.end());
    std::vector<double> fn(xsub.size()), fd(xsub.size());
    for (std::size_t i = 0; i < xsub.size(); ++i) {
      const double E = std::exp(A_star - A[i0 + i]);
      fn[i] = Phim_of_x.prime(xsub[i]) * E;
      fd[i] = Phi_of_x.prime(xsub[i]) * E;
    }
    detail::Pchip num(xsub, std::move(fn));
    detail::Pchip den(std::move(xsub), std::move(fd));
    return num.integral(num.x_front(), 0.0) / den.integral(den.x_front(), 0.0);
  };

  const double full = evaluate(0);
  std::size_t i_trunc = 0;
  const double phi_cut = qm * (1.0 - std::min(1e-6, 100.0 * tail_tol));
  while (i_trunc + 16 < n && prof.phi[i_trunc] > phi_cut) ++i_trunc;
  const double truncated = evaluate(i_trunc);

  ProfileConstant out;
  out.value = full / ws.c;
  out.x_star = x_star;
  out.tail_sensitivity = std::abs(full - truncated) / ws.c;
  if (out.tail_sensitivity > sensitivity_tol)
    throw tail_not_converged("cstar_profile_form: tail sensitivity " +
                             std::to_string(out.tail_sensitivity));
  return out;
}

double dphi_dalpha_sup(const ModelParams& params, double h, double x_lo) {
  if (!(h > 0.0)) throw std::invalid_argument("dphi_dalpha_sup: h must be > 0");
  if (!(x_lo < 0.0)) throw std::invalid_argument("dphi_dalpha_sup: x_lo >= 0");
  const ModelParams plus(params.m, params.alpha + h);
  const ModelParams minus(params.m, params.alpha - h);
  const WaveProfile prof_p = reconstruct_profile(minimal_trajectory(plus));
  const WaveProfile prof_m = reconstruct_profile(minimal_trajectory(minus));
  const ProfileInterp ip(prof_p), im(prof_m);
  const int n = 2000;
  double sup = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double x = x_lo * (1.0 - static_cast<double>(k) / n);
    sup = std::max(sup, std::abs(ip.pressure(x) - im.pressure(x)) / (2.0 * h));
  }
  return sup;
}

double alpha_for_speed(double m, double c_target, double tol) {
  if (!(c_target > 0.0))
    throw std::invalid_argument("alpha_for_speed: target speed must be > 0");
  const double solve_tol = 1e-9;
  auto c_of = [&](double a) {
    return solve_min_speed(ModelParams(m, a), solve_tol).c;
  };
  const double c0 = c_of(0.0);
  if (std::abs(c_target - c0) < 1e-12) return 0.0;

  // c(alpha) is strictly decreasing with |c'| < m
  double lo, hi;  // bracket with c(lo) >= c_target >= c(hi)
  if (c_target < c0) {
    lo = 0.0;
    hi = 1.25 * (c0 - c_target) / m + 1e-6;
    int guard = 0;
    while (c_of(hi) > c_target) {
      hi *= 2.0;
      if (++guard > 40)
        throw speed_inversion_failed("alpha_for_speed: no upper bracket");
    }
  } else {
    hi = 0.0;
    lo = -1.25 * (c_target - c0) / m - 1e-6;
    int guard = 0;
    while (c_of(lo) < c_target) {
      lo *= 2.0;
      if (++guard > 40)
        throw speed_inversion_failed("alpha_for_speed: no lower bracket");
    }
  }
  // bisect on alpha; c decreasing means c(lo) >= target
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    (c_of(mid) >= c_target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace pmfront::wave
