#pragma once

#include <cstdint>
#include <vector>

#include "rlnst/gradcheck.hpp"

namespace rlnst {

// Finite-difference checks of every differentiable op and layer, every loss
// and the policy objective, in double precision on inputs of at most
// 1x3x16x16. Checks that only involve smooth functions use step 1e-3.
// Checks routed through ReLU networks use `kinked_step` (1e-6 by default) so
// the stencil does not straddle an activation kink.
std::vector<GradCheckResult> run_oracle_suite(std::uint64_t seed, double kinked_step = 1e-6);

}  // namespace rlnst
