#include "pmfront/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pmfront/io.hpp"

namespace pmfront::cli {

namespace {

const std::set<std::string> kKnownKeys = {
    "m",          "dim",          "dr",        "cfl_safety",
    "t_end",      "r_max",        "u0_kind",   "u0_radius",
    "u0_height",  "u0_file",      "snapshot_times", "u_tol",
    "record_dt",  "hdot_window",  "warmup",    "expected_speed",
    "flux_pressure_floor", "wave_tol", "out_dir"};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  const int i = static_cast<int>(x);
  if (i != x) throw std::invalid_argument("config: " + key + " must be an integer");
  return i;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(to_double(key, tok));
  }
  return out;
}

sim::TabulatedData read_table(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open u0_file: " + path);
  sim::TabulatedData tab;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (first && line.find_first_not_of("ruv, \t") == std::string::npos) {
      first = false;
      continue;  // header
    }
    first = false;
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ','))
      throw std::invalid_argument("config: u0_file needs r,u rows");
    tab.r.push_back(to_double("u0_file r", trim(a)));
    tab.u.push_back(to_double("u0_file u", trim(b)));
  }
  return tab;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!kKnownKeys.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "'");
    kv[key] = val;
  }

  RunConfig rc;
  sim::PlateauData plateau;
  std::string kind = "plateau";

  for (const auto& [key, val] : kv) {
    if (key == "m") rc.sim.m = to_double(key, val);
    else if (key == "dim") rc.sim.dim = to_int(key, val);
    else if (key == "dr") rc.sim.dr = to_double(key, val);
    else if (key == "cfl_safety") rc.sim.cfl_safety = to_double(key, val);
    else if (key == "t_end") rc.sim.t_end = to_double(key, val);
    else if (key == "r_max") rc.sim.r_max = to_double(key, val);
    else if (key == "u0_kind") kind = val;
    else if (key == "u0_radius") plateau.radius = to_double(key, val);
    else if (key == "u0_height") plateau.height = to_double(key, val);
    else if (key == "u0_file") rc.u0_file = val;
    else if (key == "snapshot_times") rc.sim.snapshot_times = to_list(key, val);
    else if (key == "u_tol") rc.sim.u_tol = to_double(key, val);
    else if (key == "record_dt") rc.sim.record_dt = to_double(key, val);
    else if (key == "hdot_window") rc.sim.hdot_window = to_double(key, val);
    else if (key == "warmup") rc.sim.warmup = to_double(key, val);
    else if (key == "expected_speed") rc.sim.expected_speed = to_double(key, val);
    else if (key == "flux_pressure_floor")
      rc.sim.flux_pressure_floor = to_double(key, val);
    else if (key == "wave_tol") rc.wave_tol = to_double(key, val);
    else if (key == "out_dir") rc.out_dir = val;
  }

  if (kind == "plateau") {
    rc.sim.u0 = plateau;
  } else if (kind == "table") {
    if (rc.u0_file.empty())
      throw std::invalid_argument("config: u0_kind=table requires u0_file");
    rc.sim.u0 = read_table(rc.u0_file);
  } else {
    throw std::invalid_argument("config: u0_kind must be plateau or table");
  }
  return rc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string render_config(const RunConfig& config) {
  std::ostringstream out;
  const auto& s = config.sim;
  out << "# effective run configuration\n";
  auto num = [&](const char* k, double v) {
    out << k << " = " << io::format_double(v) << "\n";
  };
  num("m", s.m);
  out << "dim = " << s.dim << "\n";
  num("dr", s.dr);
  num("cfl_safety", s.cfl_safety);
  num("t_end", s.t_end);
  num("r_max", s.r_max);
  if (const auto* p = std::get_if<sim::PlateauData>(&s.u0)) {
    out << "u0_kind = plateau\n";
    num("u0_radius", p->radius);
    num("u0_height", p->height);
  } else {
    out << "u0_kind = table\n";
    out << "u0_file = " << config.u0_file << "\n";
  }
  out << "snapshot_times =";
  for (std::size_t i = 0; i < s.snapshot_times.size(); ++i)
    out << (i ? "," : " ") << io::format_double(s.snapshot_times[i]);
  out << "\n";
  num("u_tol", s.u_tol);
  num("record_dt", s.record_dt);
  num("hdot_window", s.hdot_window);
  num("warmup", s.warmup);
  num("expected_speed", s.expected_speed);
  num("flux_pressure_floor", s.flux_pressure_floor);
  num("wave_tol", config.wave_tol);
  out << "out_dir = " << config.out_dir << "\n";
  return out.str();
}

}  // namespace pmfront::cli
