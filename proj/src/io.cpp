#include "pmfront/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pmfront::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string snapshot_filename(double t) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "snap_t%g.csv", t);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

std::vector<double> split_doubles(const std::string& line, std::size_t expect,
                                  const std::string& path) {
  std::vector<double> vals;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      vals.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw std::runtime_error("bad number '" + tok + "' in " + path);
    }
  }
  if (vals.size() != expect)
    throw std::runtime_error("expected " + std::to_string(expect) +
                             " columns in " + path);
  return vals;
}

}  // namespace

void write_series_csv(const std::string& path, const sim::InterfaceSeries& s) {
  auto f = open_out(path);
  f << "t,h,hdot,front_flux,max_flux\n";
  for (std::size_t i = 0; i < s.rows(); ++i)
    f << format_double(s.t[i]) << ',' << format_double(s.h[i]) << ','
      << format_double(s.hdot[i]) << ',' << format_double(s.front_flux[i])
      << ',' << format_double(s.max_flux[i]) << '\n';
}

sim::InterfaceSeries read_series_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("t,h,hdot", 0) != 0)
    throw std::runtime_error("missing series header in " + path);
  sim::InterfaceSeries s;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto v = split_doubles(line, 5, path);
    s.t.push_back(v[0]);
    s.h.push_back(v[1]);
    s.hdot.push_back(v[2]);
    s.front_flux.push_back(v[3]);
    s.max_flux.push_back(v[4]);
  }
  return s;
}

void write_snapshot_csv(const std::string& path, const sim::SimState& state) {
  auto f = open_out(path);
  f << "r,u,v\n";
  for (std::size_t i = 0; i < state.u.size(); ++i)
    f << format_double(state.r(static_cast<int>(i))) << ','
      << format_double(state.u[i]) << ','
      << format_double(state.pressure(static_cast<int>(i))) << '\n';
}

void write_profile_csv(const std::string& path, const wave::WaveProfile& p) {
  auto f = open_out(path);
  f << "x,phi,Phi\n";
  for (std::size_t i = 0; i < p.x.size(); ++i)
    f << format_double(p.x[i]) << ',' << format_double(p.phi[i]) << ','
      << format_double(p.Phi[i]) << '\n';
}

}  // namespace pmfront::io
