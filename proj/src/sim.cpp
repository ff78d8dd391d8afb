#include "pmfront/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pmfront/errors.hpp"

namespace pmfront::sim {

namespace {

void validate(const SimConfig& c) {
  ModelParams check(c.m);  // throws on bad m
  (void)check;
  if (c.dim < 1) throw std::invalid_argument("SimConfig: dim must be >= 1");
  if (!(c.dr > 0.0)) throw std::invalid_argument("SimConfig: dr must be > 0");
  if (!(c.cfl_safety > 0.0 && c.cfl_safety < 1.0))
    throw std::invalid_argument("SimConfig: cfl_safety must be in (0,1)");
  if (!(c.t_end > 0.0)) throw std::invalid_argument("SimConfig: t_end <= 0");
  if (!(c.u_tol > 0.0)) throw std::invalid_argument("SimConfig: u_tol <= 0");
  if (!(c.record_dt > 0.0))
    throw std::invalid_argument("SimConfig: record_dt <= 0");
}

double initial_extent(const SimConfig& c) {
  if (const auto* p = std::get_if<PlateauData>(&c.u0)) return p->radius;
  const auto& tab = std::get<TabulatedData>(c.u0);
  double ext = 0.0;
  for (std::size_t i = 0; i < tab.r.size(); ++i)
    if (tab.u[i] > 0.0) ext = std::max(ext, tab.r[i]);
  return ext;
}

double pow_m(double u, double m) {
  if (u <= 0.0) return 0.0;
  if (m == 2.0) return u * u;
  if (m == 3.0) return u * u * u;
  return std::pow(u, m);
}

}  // namespace

SimConfig effective_config(const SimConfig& config) {
  validate(config);
  SimConfig eff = config;
  const double bound = std::max(eff.expected_speed, 0.0);
  const double needed = std::max(bound * eff.t_end + 10.0,
                                 initial_extent(eff) + 10.0 * eff.dr);
  if (eff.r_max < needed)
    eff.r_max = std::ceil(needed / eff.dr) * eff.dr;
  return eff;
}

SimState init_state(const SimConfig& config) {
  validate(config);
  if (!(config.r_max > 0.0))
    throw std::invalid_argument("init_state: r_max not set (use effective_config)");
  SimState st;
  st.dr = config.dr;
  st.m = config.m;
  st.dim = config.dim;
  const int n = static_cast<int>(std::lround(config.r_max / config.dr));
  st.u.assign(static_cast<std::size_t>(n) + 1, 0.0);

  if (const auto* p = std::get_if<PlateauData>(&config.u0)) {
    if (!(p->height > 0.0) || !std::isfinite(p->height))
      throw std::invalid_argument("init_state: plateau height must be positive");
    if (!(p->radius >= 0.0))
      throw std::invalid_argument("init_state: plateau radius must be >= 0");
    for (int i = 0; i <= n; ++i)
      if (st.r(i) <= p->radius + 1e-12) st.u[static_cast<std::size_t>(i)] = p->height;
  } else {
    const auto& tab = std::get<TabulatedData>(config.u0);
    if (tab.r.size() != tab.u.size() || tab.r.size() < 2)
      throw std::invalid_argument("init_state: tabulated data needs matching r,u");
    for (std::size_t i = 0; i < tab.u.size(); ++i) {
      if (!std::isfinite(tab.u[i]) || tab.u[i] < 0.0)
        throw std::invalid_argument("init_state: tabulated data must be finite and nonnegative");
      if (i > 0 && !(tab.r[i] > tab.r[i - 1]))
        throw std::invalid_argument("init_state: tabulated r must increase");
    }
    for (int i = 0; i <= n; ++i) {
      const double r = st.r(i);
      if (r < tab.r.front() || r > tab.r.back()) continue;
      const auto it = std::upper_bound(tab.r.begin(), tab.r.end(), r);
      const std::size_t k = static_cast<std::size_t>(it - tab.r.begin());
      if (k == 0) {
        st.u[static_cast<std::size_t>(i)] = tab.u.front();
      } else if (k >= tab.r.size()) {
        st.u[static_cast<std::size_t>(i)] = tab.u.back();
      } else {
        const double w = (r - tab.r[k - 1]) / (tab.r[k] - tab.r[k - 1]);
        st.u[static_cast<std::size_t>(i)] = (1.0 - w) * tab.u[k - 1] + w * tab.u[k];
      }
    }
  }

  st.support_end = -1;
  double u_max = 0.0;
  for (int i = n; i >= 0; --i) {
    const double ui = st.u[static_cast<std::size_t>(i)];
    u_max = std::max(u_max, ui);
    if (ui > 0.0 && st.support_end < 0) st.support_end = i;
  }
  if (st.support_end < 0)
    throw std::invalid_argument("init_state: initial data identically zero");
  if (!std::isfinite(u_max))
    throw std::invalid_argument("init_state: initial data unbounded");
  if (st.support_end > n - 8)
    throw std::invalid_argument("init_state: support too close to r_max");
  return st;
}

double cfl_dt(const SimState& state, const SimConfig& config) {
  double u_max = 0.0;
  for (int i = 0; i <= state.support_end; ++i)
    u_max = std::max(u_max, state.u[static_cast<std::size_t>(i)]);
  const double rate = 2.0 * config.m * (u_max > 0.0 ? std::pow(u_max, config.m - 1.0) : 0.0);
  return config.cfl_safety * config.dr * config.dr / (rate + 1.0);
}

double step(SimState& state, const SimConfig& config, double dt_cap) {
  const int n = static_cast<int>(state.u.size()) - 1;
  const double dr = state.dr;
  const double m = state.m;
  const int N = state.dim;

  double u_max = 0.0;
  for (int i = 0; i <= state.support_end; ++i)
    u_max = std::max(u_max, state.u[static_cast<std::size_t>(i)]);

  const double rate =
      2.0 * m * (u_max > 0.0 ? std::pow(u_max, m - 1.0) : 0.0);
  double dt = config.cfl_safety * dr * dr / (rate + 1.0);
  dt = std::min(dt, dt_cap);
  if (!(dt > 0.0)) return 0.0;

  // positivity-preserving bound (origin stencil carries the factor 2N)
  const double diff_rate =
      2.0 * N * m * (u_max > 0.0 ? std::pow(u_max, m - 1.0) : 0.0) / (dr * dr);
  const double react_rate = std::max(0.0, u_max - 1.0) + 1.0;
  if (dt * (diff_rate + react_rate) > 1.0 + 1e-9)
    throw cfl_violation(
        "step: dt exceeds the positivity bound at dim=" + std::to_string(N) +
        "; reduce cfl_safety");

  if (state.support_end >= 0 && state.support_end > n - 4)
    throw domain_overflow("step: support reached the domain boundary");

  const int i_last = std::min(state.support_end + 1, n);
  static thread_local std::vector<double> w;
  w.assign(static_cast<std::size_t>(std::min(i_last + 2, n + 1)), 0.0);
  for (int i = 0; i <= std::min(i_last + 1, n); ++i)
    w[static_cast<std::size_t>(i)] = pow_m(state.u[static_cast<std::size_t>(i)], m);

  const double inv_dr2 = 1.0 / (dr * dr);
  for (int i = 0; i <= i_last; ++i) {
    const std::size_t iu = static_cast<std::size_t>(i);
    const double ui = state.u[iu];
    double lap;
    if (i == 0) {
      lap = 2.0 * N * (w[1] - w[0]) * inv_dr2;
    } else if (i == n) {
      lap = 2.0 * (w[iu - 1] - w[iu]) * inv_dr2;  // mirror boundary
    } else {
      const double wm = w[iu - 1], w0 = w[iu], wp = w[iu + 1];
      lap = (wp - 2.0 * w0 + wm) * inv_dr2 +
            (N - 1) / state.r(i) * (wp - wm) / (2.0 * dr);
    }
    double un = ui + dt * (lap + ui * (1.0 - ui));
    if (un < 0.0) {
      if (un < -1e-6)
        throw cfl_violation("step: update broke positivity (u=" +
                            std::to_string(un) + " at i=" + std::to_string(i) +
                            "); reduce cfl_safety");
      if (un < -1e-12) ++state.clamp_events;
      un = 0.0;
    }
    state.u[iu] = un;
  }

  int se = std::min(i_last, n);
  while (se >= 0 && state.u[static_cast<std::size_t>(se)] <= 0.0) --se;
  state.support_end = se;
  state.t += dt;
  return dt;
}

double locate_front(const SimState& state, double u_tol) {
  const int n = static_cast<int>(state.u.size()) - 1;
  int j = -1;
  for (int i = state.support_end; i >= 0; --i) {
    if (state.u[static_cast<std::size_t>(i)] > u_tol) {
      j = i;
      break;
    }
  }
  if (j < 0) throw empty_support("locate_front: no cell above threshold");
  if (j >= n) return state.r(n);
  const double vj = state.pressure(j);
  const double vj1 = state.pressure(j + 1);
  if (vj1 >= vj) return state.r(j);
  const double amount = std::clamp(vj * state.dr / (vj - vj1), 0.0, state.dr);
  return state.r(j) + amount;
}

double front_flux(const SimState& state, const SimConfig& config) {
  if (state.support_end < 0) throw empty_support("front_flux: empty support");
  int k = -1;
  for (int i = state.support_end; i >= 0; --i) {
    if (state.pressure(i) >= config.flux_pressure_floor) {
      k = i;
      break;
    }
  }
  if (k < 0) {  // support too weak for the floor; fall back to the edge pair
    k = state.support_end;
    if (k == 0) return 0.0;
    return (state.pressure(k) - state.pressure(k - 1)) / state.dr;
  }
  const double h = locate_front(state, config.u_tol);
  const double gap = h - state.r(k);
  if (gap <= 0.5 * state.dr) {
    if (k == 0) return 0.0;
    return (state.pressure(k) - state.pressure(k - 1)) / state.dr;
  }
  return -state.pressure(k) / gap;
}

double max_flux(const SimState& state) {
  const int n = static_cast<int>(state.u.size()) - 1;
  const int hi = std::min(state.support_end + 1, n - 1);
  double best = 0.0;
  double wm = pow_m(state.u[0], state.m);
  double w0 = pow_m(state.u[1], state.m);
  for (int i = 1; i <= hi; ++i) {
    const double wp = pow_m(state.u[static_cast<std::size_t>(i) + 1], state.m);
    best = std::max(best, std::abs(wp - wm) / (2.0 * state.dr));
    wm = w0;
    w0 = wp;
  }
  return best;
}

double aronson_benilan_floor(double m, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("aronson_benilan_floor: t <= 0");
  const double k = std::min(1.0, 1.0 / (m - 1.0));
  const double e = std::exp(-(m - 1.0) * k * t);
  return -k * e / (1.0 - e);
}

AbReport ab_check(const SimState& state, double u_tol) {
  if (!(state.t > 0.0)) throw std::invalid_argument("ab_check: needs t > 0");
  const ModelParams mp(state.m);
  const int n = static_cast<int>(state.u.size()) - 1;
  const double dr = state.dr;
  AbReport rep;
  rep.t = state.t;
  rep.floor = aronson_benilan_floor(state.m, state.t);
  rep.min_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= std::min(state.support_end, n - 1); ++i) {
    if (state.u[static_cast<std::size_t>(i)] <= u_tol) continue;
    const double v0 = state.pressure(i);
    const double vp = state.pressure(i + 1);
    double lap;
    if (i == 0) {
      lap = 2.0 * state.dim * (vp - v0) / (dr * dr);
    } else {
      const double vm = state.pressure(i - 1);
      lap = (vp - 2.0 * v0 + vm) / (dr * dr) +
            (state.dim - 1) / state.r(i) * (vp - vm) / (2.0 * dr);
    }
    rep.min_value = std::min(rep.min_value, lap + mp.pressure_reaction(v0));
    ++rep.points;
  }
  if (rep.points == 0) rep.min_value = 0.0;
  return rep;
}

RunResult run(const SimConfig& config) {
  const SimConfig eff = effective_config(config);
  RunResult out;
  out.r_max_used = eff.r_max;
  out.extended = eff.r_max > config.r_max;

  SimState state = init_state(eff);

  std::vector<double> snaps = eff.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
  std::size_t next_snap = 0;

  auto record = [&](double t_label) {
    out.series.t.push_back(t_label);
    out.series.h.push_back(locate_front(state, eff.u_tol));
    out.series.hdot.push_back(0.0);  // filled after the run
    out.series.front_flux.push_back(front_flux(state, eff));
    out.series.max_flux.push_back(max_flux(state));
  };

  for (double& s : snaps) s = std::min(s, eff.t_end);
  while (next_snap < snaps.size() && snaps[next_snap] <= 1e-12) {
    out.snapshots.push_back(state);
    ++next_snap;
  }

  record(0.0);
  long k_rec = 1;
  const long n_rec = std::lround(eff.t_end / eff.record_dt);
  const double inf = std::numeric_limits<double>::infinity();
  while (k_rec <= n_rec || next_snap < snaps.size()) {
    const double t_rec =
        k_rec <= n_rec ? std::min(eff.t_end, k_rec * eff.record_dt) : inf;
    const double t_snap = next_snap < snaps.size() ? snaps[next_snap] : inf;
    const double target = std::min(t_rec, t_snap);
    while (state.t < target - 1e-12) step(state, eff, target - state.t);
    state.t = target;  // absorb additive round-off for reproducible labels
    if (t_snap <= t_rec + 1e-12 && next_snap < snaps.size()) {
      out.snapshots.push_back(state);
      ++next_snap;
    }
    if (t_rec <= t_snap + 1e-12 && k_rec <= n_rec) {
      record(target);
      ++k_rec;
    }
  }

  // centered hdot over the smoothing window
  const auto& ts = out.series.t;
  const auto& hs = out.series.h;
  const double half = 0.5 * eff.hdot_window;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto lo_it = std::lower_bound(ts.begin(), ts.end(), ts[i] - half);
    auto hi_it = std::upper_bound(ts.begin(), ts.end(), ts[i] + half);
    std::size_t ia = static_cast<std::size_t>(lo_it - ts.begin());
    std::size_t ib = static_cast<std::size_t>(hi_it - ts.begin());
    if (ib > 0) --ib;
    if (ib <= ia) continue;
    out.series.hdot[i] = (hs[ib] - hs[ia]) / (ts[ib] - ts[ia]);
  }
  return out;
}

}  // namespace pmfront::sim
