#include "pmfront/fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "pmfront/errors.hpp"

namespace pmfront::fit {

namespace {

// Eigenvalues of a symmetric 3x3 matrix (trigonometric method).
std::array<double, 3> sym3_eigenvalues(const std::array<std::array<double, 3>, 3>& A) {
  const double p1 = A[0][1] * A[0][1] + A[0][2] * A[0][2] + A[1][2] * A[1][2];
  const double tr = A[0][0] + A[1][1] + A[2][2];
  if (p1 == 0.0) return {A[0][0], A[1][1], A[2][2]};
  const double q = tr / 3.0;
  const double p2 = (A[0][0] - q) * (A[0][0] - q) + (A[1][1] - q) * (A[1][1] - q) +
                    (A[2][2] - q) * (A[2][2] - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  std::array<std::array<double, 3>, 3> B{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      B[i][j] = (A[i][j] - (i == j ? q : 0.0)) / p;
  const double detB = B[0][0] * (B[1][1] * B[2][2] - B[1][2] * B[2][1]) -
                      B[0][1] * (B[1][0] * B[2][2] - B[1][2] * B[2][0]) +
                      B[0][2] * (B[1][0] * B[2][1] - B[1][1] * B[2][0]);
  const double r = std::clamp(detB / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double l1 = q + 2.0 * p * std::cos(phi);
  const double l3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
  const double l2 = tr - l1 - l3;
  return {l1, l2, l3};
}

// Solve a small SPD-ish system by Gaussian elimination with partial pivoting.
template <int K>
std::array<long double, K> solve_dense(std::array<std::array<long double, K>, K> M,
                                       std::array<long double, K> b) {
  for (int col = 0; col < K; ++col) {
    int piv = col;
    for (int r = col + 1; r < K; ++r)
      if (std::abs(static_cast<double>(M[r][col])) >
          std::abs(static_cast<double>(M[piv][col])))
        piv = r;
    std::swap(M[piv], M[col]);
    std::swap(b[piv], b[col]);
    if (M[col][col] == 0.0L)
      throw ill_conditioned("fit_shift: singular normal equations");
    for (int r = col + 1; r < K; ++r) {
      const long double f = M[r][col] / M[col][col];
      for (int c = col; c < K; ++c) M[r][c] -= f * M[col][c];
      b[r] -= f * b[col];
    }
  }
  std::array<long double, K> z{};
  for (int r = K - 1; r >= 0; --r) {
    long double acc = b[r];
    for (int c = r + 1; c < K; ++c) acc -= M[r][c] * z[c];
    z[r] = acc / M[r][r];
  }
  return z;
}

struct Rows {
  std::vector<double> t, h;
};

Rows collect(const sim::InterfaceSeries& series, Window w) {
  Rows rows;
  for (std::size_t i = 0; i < series.rows(); ++i) {
    const double t = series.t[i];
    if (t >= w.t_lo && t <= w.t_hi && t > 0.0) {
      rows.t.push_back(t);
      rows.h.push_back(series.h[i]);
    }
  }
  return rows;
}

}  // namespace

ShiftFit fit_shift(const sim::InterfaceSeries& series, Window window) {
  const Rows rows = collect(series, window);
  const std::size_t n = rows.t.size();
  if (n < 50)
    throw ill_conditioned("fit_shift: window holds " + std::to_string(n) +
                          " rows; need >= 50");

  long double Stt = 0, Stl = 0, St = 0, Sll = 0, Sl = 0;
  long double Sht = 0, Shl = 0, Sh = 0, Shh = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double t = rows.t[i];
    const long double l = std::log(rows.t[i]);
    const long double h = rows.h[i];
    Stt += t * t;
    Stl += t * l;
    St += t;
    Sll += l * l;
    Sl += l;
    Sht += h * t;
    Shl += h * l;
    Sh += h;
    Shh += h * h;
  }

  const std::array<std::array<double, 3>, 3> Md{
      {{static_cast<double>(Stt), static_cast<double>(Stl), static_cast<double>(St)},
       {static_cast<double>(Stl), static_cast<double>(Sll), static_cast<double>(Sl)},
       {static_cast<double>(St), static_cast<double>(Sl), static_cast<double>(n)}}};
  const auto ev = sym3_eigenvalues(Md);
  const double lmax = std::max({ev[0], ev[1], ev[2]});
  const double lmin = std::min({ev[0], ev[1], ev[2]});
  const double cond = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e12))
    throw ill_conditioned(
        "fit_shift: normal-equations condition number " + std::to_string(cond) +
        " exceeds 1e12 (window too short for log/constant separation)");

  const auto z = solve_dense<3>(
      {{{Stt, Stl, St}, {Stl, Sll, Sl}, {St, Sl, static_cast<long double>(n)}}},
      {Sht, Shl, Sh});

  ShiftFit fitd;
  fitd.window = window;
  fitd.rows = n;
  fitd.c_hat = static_cast<double>(z[0]);
  fitd.B_hat = static_cast<double>(-z[1]);
  fitd.r0_hat = static_cast<double>(z[2]);
  fitd.condition = cond;

  long double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double r = static_cast<long double>(rows.h[i]) -
                          (z[0] * rows.t[i] + z[1] * std::log(rows.t[i]) + z[2]);
    ss += r * r;
  }
  fitd.rms_residual = static_cast<double>(std::sqrt(ss / n));
  return fitd;
}

ShiftFit fit_shift_pinned(const sim::InterfaceSeries& series, Window window,
                          double c_fixed) {
  const Rows rows = collect(series, window);
  const std::size_t n = rows.t.size();
  if (n < 50)
    throw ill_conditioned("fit_shift_pinned: window holds " + std::to_string(n) +
                          " rows; need >= 50");

  long double Sll = 0, Sl = 0, Syl = 0, Sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double l = std::log(rows.t[i]);
    const long double y = static_cast<long double>(rows.h[i]) -
                          static_cast<long double>(c_fixed) * rows.t[i];
    Sll += l * l;
    Sl += l;
    Syl += y * l;
    Sy += y;
  }
  const auto z = solve_dense<2>({{{Sll, Sl}, {Sl, static_cast<long double>(n)}}},
                                {Syl, Sy});

  ShiftFit fitd;
  fitd.window = window;
  fitd.rows = n;
  fitd.c_hat = c_fixed;
  fitd.B_hat = static_cast<double>(-z[0]);
  fitd.r0_hat = static_cast<double>(z[1]);
  const std::array<std::array<double, 3>, 3> Md{
      {{static_cast<double>(Sll), static_cast<double>(Sl), 0.0},
       {static_cast<double>(Sl), static_cast<double>(n), 0.0},
       {0.0, 0.0, 1.0}}};
  const auto ev = sym3_eigenvalues(Md);
  const double lmax = std::max({ev[0], ev[1], ev[2]});
  const double lmin = std::min({ev[0], ev[1], ev[2]});
  fitd.condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();

  long double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double r = static_cast<long double>(rows.h[i]) -
                          (static_cast<long double>(c_fixed) * rows.t[i] +
                           z[0] * std::log(rows.t[i]) + z[1]);
    ss += r * r;
  }
  fitd.rms_residual = static_cast<double>(std::sqrt(ss / n));
  return fitd;
}

double delta_B(const sim::InterfaceSeries& a, const sim::InterfaceSeries& b,
               Window window) {
  return fit_shift(a, window).B_hat - fit_shift(b, window).B_hat;
}

ProfileComparison compare_profile(const sim::SimState& snapshot,
                                  const wave::WaveProfile& profile,
                                  double k_shift, ScanOptions opts) {
  const double h = sim::locate_front(snapshot, 1e-10);
  if (h > snapshot.r_max() - 5.0)
    throw front_too_close("compare_profile: front within 5 length units of r_max");

  const wave::ProfileInterp interp(profile);

  // snapshot density on the moving-frame grid
  const double dxi = std::min(snapshot.dr / 2.0, 0.025);
  const int n_xi = static_cast<int>(std::floor((opts.xi_hi - opts.xi_lo) / dxi));
  std::vector<double> u_frame(static_cast<std::size_t>(n_xi) + 1);
  const int n_grid = static_cast<int>(snapshot.u.size()) - 1;
  for (int j = 0; j <= n_xi; ++j) {
    const double r = opts.xi_lo + j * dxi + k_shift;
    double val = 0.0;
    if (r <= 0.0) {
      val = snapshot.u[0];
    } else if (r < snapshot.r_max()) {
      const int i = static_cast<int>(r / snapshot.dr);
      const double w = r / snapshot.dr - i;
      const int ip = std::min(i + 1, n_grid);
      val = (1.0 - w) * snapshot.u[static_cast<std::size_t>(i)] +
            w * snapshot.u[static_cast<std::size_t>(ip)];
    }
    u_frame[static_cast<std::size_t>(j)] = val;
  }

  // wavefront density tabulated once; offsets then read it by linear lookup
  const double tab_lo = opts.xi_lo - (opts.center + opts.hi) - 1.0;
  const double tab_hi = opts.xi_hi - (opts.center + opts.lo) + 1.0;
  const double dtab = 5e-4;
  const std::size_t n_tab =
      static_cast<std::size_t>(std::ceil((tab_hi - tab_lo) / dtab)) + 1;
  std::vector<double> tab(n_tab);
  for (std::size_t j = 0; j < n_tab; ++j)
    tab[j] = interp.density(tab_lo + static_cast<double>(j) * dtab);
  auto wavefront = [&](double x) {
    if (x <= tab_lo) return tab.front();
    if (x >= tab_hi) return tab.back();
    const double s = (x - tab_lo) / dtab;
    const std::size_t j = static_cast<std::size_t>(s);
    const double w = s - static_cast<double>(j);
    return (1.0 - w) * tab[j] + w * tab[std::min(j + 1, n_tab - 1)];
  };

  auto sup_err = [&](double s) {
    double worst = 0.0;
    for (int j = 0; j <= n_xi; ++j) {
      const double xi = opts.xi_lo + j * dxi;
      worst = std::max(worst,
                       std::abs(u_frame[static_cast<std::size_t>(j)] -
                                wavefront(xi - s)));
    }
    return worst;
  };

  ProfileComparison best;
  best.t = snapshot.t;
  best.sup_error = std::numeric_limits<double>::infinity();
  const long n_scan = std::lround((opts.hi - opts.lo) / opts.step);
  for (long k = 0; k <= n_scan; ++k) {
    const double s = opts.center + opts.lo + static_cast<double>(k) * opts.step;
    const double e = sup_err(s);
    if (e < best.sup_error) {
      best.sup_error = e;
      best.shift = s;
    }
  }
  return best;
}

EnvelopeReport envelope_check(const std::vector<sim::SimState>& snapshots,
                              double m, int dim, double c_star, double c_log,
                              EnvelopeOptions opts) {
  if (snapshots.empty())
    throw std::invalid_argument("envelope_check: no snapshots");

  EnvelopeReport rep;
  double need_lo = 0.0, need_up = 0.0;
  std::map<long long, double> alpha_cache;

  for (const auto& snap : snapshots) {
    const double t = snap.t;
    if (!(t > 0.0)) continue;
    const double target = c_star - (dim - 1) * c_log / t;
    if (!(target > 0.0))
      throw speed_inversion_failed("envelope_check: nonpositive target speed");
    const long long key = std::llround(t * 1e6);
    if (!alpha_cache.count(key))
      alpha_cache[key] = wave::alpha_for_speed(m, target, 1e-7);
    const double alpha = alpha_cache[key];

    const ModelParams params(m, alpha);
    const wave::WaveProfile prof =
        wave::reconstruct_profile(wave::minimal_trajectory(params));
    const wave::ProfileInterp interp(prof);

    const double g = std::log(t) / (t * t);
    const double shift = c_star * t - (dim - 1) * c_log * std::log(t);
    const double r_floor_low = c_star * t - opts.lower_margin * std::log(t);

    const int n = static_cast<int>(snap.u.size()) - 1;
    for (int i = 0; i <= n; ++i) {
      const double r = snap.r(i);
      const double xi = r - shift;
      const double u = snap.u[static_cast<std::size_t>(i)];
      if (r >= r_floor_low) {
        // u >= (1-g) Phi(xi + C) requires C >= x_inv - xi; x_inv is -inf
        // (void constraint) once u/(1-g) reaches the ceiling
        need_lo = std::max(need_lo, interp.x_at_density(u / (1.0 - g)) - xi);
      }
      if (u > 0.0) {
        // u <= (1+g) Phi(xi - C) requires C >= xi - x_inv
        const double x_inv = interp.x_at_density(u / (1.0 + g));
        need_up = std::max(need_up, xi - x_inv);
      }
    }
  }

  auto snap_to_grid = [&](double v) {
    return std::ceil(std::max(v, 0.0) / opts.c_grid - 1e-9) * opts.c_grid;
  };
  rep.C_lower = snap_to_grid(need_lo);
  rep.C_upper = snap_to_grid(need_up);
  rep.violations = 0;
  if (rep.C_lower > opts.c_max || rep.C_upper > opts.c_max) {
    // count uncoverable points at C = c_max
    for (const auto& snap : snapshots) {
      const double t = snap.t;
      if (!(t > 0.0)) continue;
      const double target = c_star - (dim - 1) * c_log / t;
      const double alpha = alpha_cache[std::llround(t * 1e6)];
      const ModelParams params(m, alpha);
      const wave::WaveProfile prof =
          wave::reconstruct_profile(wave::minimal_trajectory(params));
      const wave::ProfileInterp interp(prof);
      const double g = std::log(t) / (t * t);
      const double shift = c_star * t - (dim - 1) * c_log * std::log(t);
      const double r_floor_low = c_star * t - opts.lower_margin * std::log(t);
      const int n = static_cast<int>(snap.u.size()) - 1;
      for (int i = 0; i <= n; ++i) {
        const double r = snap.r(i);
        const double xi = r - shift;
        const double u = snap.u[static_cast<std::size_t>(i)];
        if (r >= r_floor_low &&
            interp.x_at_density(u / (1.0 - g)) - xi > opts.c_max)
          ++rep.violations;
        if (u > 0.0 && xi - interp.x_at_density(u / (1.0 + g)) > opts.c_max)
          ++rep.violations;
      }
      (void)target;
    }
  }
  return rep;
}

}  // namespace pmfront::fit
