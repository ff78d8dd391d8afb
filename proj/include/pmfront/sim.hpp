#pragma once

#include <cstddef>
#include <limits>
#include <variant>
#include <vector>

#include "pmfront/params.hpp"

namespace pmfront::sim {

struct PlateauData {
  double radius = 1.0;
  double height = 1.0;
};

struct TabulatedData {
  std::vector<double> r, u;  // linearly interpolated onto the grid, 0 outside
};

struct SimConfig {
  double m = 2.0;
  int dim = 1;  // spatial dimension N >= 1
  double dr = 0.05;
  double cfl_safety = 0.35;
  double t_end = 200.0;
  double r_max = 0.0;  // auto-extended when below expected front + 10
  std::variant<PlateauData, TabulatedData> u0 = PlateauData{};
  std::vector<double> snapshot_times;
  double u_tol = 1e-10;            // front threshold
  double record_dt = 0.1;          // series sampling cadence
  double hdot_window = 1.0;        // centered differencing window for hdot
  double warmup = 10.0;            // diagnostics start after this time
  double expected_speed = 2.0;     // spreading-speed bound for r_max extension
  double flux_pressure_floor = 0.05;  // one-sided v_r measured at last v >= this
};

// Applies the r_max auto-extension rule; validation of u0 happens in init_state.
SimConfig effective_config(const SimConfig& config);

struct SimState {
  double t = 0.0;
  double dr = 0.0;
  double m = 2.0;
  int dim = 1;
  std::vector<double> u;
  int support_end = -1;   // last index with u > 0
  long clamp_events = 0;  // negative round-off beyond 1e-12 clamped to 0

  double r(int i) const { return i * dr; }
  double pressure(int i) const {
    return ModelParams(m).pressure_of_density(u[static_cast<std::size_t>(i)]);
  }
  double r_max() const { return (static_cast<int>(u.size()) - 1) * dr; }
};

SimState init_state(const SimConfig& config);

// dt = cfl_safety * dr^2 / (2 m max(u)^{m-1} + 1)
double cfl_dt(const SimState& state, const SimConfig& config);

// One explicit update of u_t = (u^m)_rr + (N-1)/r (u^m)_r + u(1-u); returns dt.
double step(SimState& state, const SimConfig& config,
            double dt_cap = std::numeric_limits<double>::infinity());

// Subgrid front position from the pressure, which is asymptotically linear.
double locate_front(const SimState& state, double u_tol);

// One-sided v_r at the front (chord from the last well-resolved cell to h).
double front_flux(const SimState& state, const SimConfig& config);

// max_r |(u^m)_r| by centered differences.
double max_flux(const SimState& state);

double aronson_benilan_floor(double m, double t);  // W(t)

struct AbReport {
  double t = 0.0;
  double min_value = 0.0;  // min over positive interior points of Lap v + f(v)
  double floor = 0.0;      // W(t)
  int points = 0;
};
AbReport ab_check(const SimState& state, double u_tol = 1e-10);

struct InterfaceSeries {
  std::vector<double> t, h, hdot, front_flux, max_flux;
  std::size_t rows() const { return t.size(); }
};

struct RunResult {
  InterfaceSeries series;
  std::vector<SimState> snapshots;
  double r_max_used = 0.0;
  bool extended = false;
};

RunResult run(const SimConfig& config);

}  // namespace pmfront::sim
