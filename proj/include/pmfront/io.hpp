#pragma once

#include <string>

#include "pmfront/sim.hpp"
#include "pmfront/wave.hpp"

namespace pmfront::io {

// All floats are emitted with 17 significant digits (round-trip exact).
std::string format_double(double v);

std::string snapshot_filename(double t);  // snap_t<time>.csv

// series: header t,h,hdot,front_flux,max_flux
void write_series_csv(const std::string& path, const sim::InterfaceSeries& s);
sim::InterfaceSeries read_series_csv(const std::string& path);

// snapshot: header r,u,v
void write_snapshot_csv(const std::string& path, const sim::SimState& state);

// profile: header x,phi,Phi
void write_profile_csv(const std::string& path, const wave::WaveProfile& p);

}  // namespace pmfront::io
