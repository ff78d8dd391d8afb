#pragma once

#include <stdexcept>

namespace pmfront {

// Numeric/solver failures map to CLI exit code 3; invalid inputs use
// std::invalid_argument and map to exit code 2.
struct solver_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct bracket_not_found : solver_error { using solver_error::solver_error; };
struct step_failure : solver_error { using solver_error::solver_error; };
struct tail_not_converged : solver_error { using solver_error::solver_error; };
struct ill_conditioned : solver_error { using solver_error::solver_error; };
struct speed_inversion_failed : solver_error { using solver_error::solver_error; };
struct front_too_close : solver_error { using solver_error::solver_error; };
struct cfl_violation : solver_error { using solver_error::solver_error; };
struct empty_support : solver_error { using solver_error::solver_error; };
struct domain_overflow : solver_error { using solver_error::solver_error; };

}  // namespace pmfront
