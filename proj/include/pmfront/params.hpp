#pragma once

#include <cmath>
#include <stdexcept>

namespace pmfront {

// Model pair (m, alpha): porous-medium exponent and advection coefficient.
// The pressure ceiling q_max = m/(m-1) is always derived, never stored.
struct ModelParams {
  double m;
  double alpha;

  explicit ModelParams(double m_, double alpha_ = 0.0) : m(m_), alpha(alpha_) {
    if (!(std::isfinite(m) && std::isfinite(alpha)))
      throw std::invalid_argument("ModelParams: m and alpha must be finite");
    if (m <= 1.0 + 1e-6)
      throw std::invalid_argument("ModelParams: m must be > 1");
  }

  double q_max() const { return m / (m - 1.0); }

  // F(q) = 1 - (q/q_max)^{1/(m-1)}, the reaction factor in pressure form.
  // Equals 1 - Phi where Phi is the density at pressure level q.
  double reaction_factor(double q) const {
    if (q <= 0.0) return 1.0;
    return 1.0 - std::pow(q / q_max(), 1.0 / (m - 1.0));
  }

  // f(q) = (m-1) q F(q); the logistic source rewritten for the pressure.
  double pressure_reaction(double q) const {
    return (m - 1.0) * q * reaction_factor(q);
  }

  // Phi = (q/q_max)^{1/(m-1)}
  double density_of_pressure(double q) const {
    if (q <= 0.0) return 0.0;
    return std::pow(q / q_max(), 1.0 / (m - 1.0));
  }

  // v = (m/(m-1)) u^{m-1}
  double pressure_of_density(double u) const {
    if (u <= 0.0) return 0.0;
    return q_max() * std::pow(u, m - 1.0);
  }
};

}  // namespace pmfront
