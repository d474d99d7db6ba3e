#pragma once

#include "lbe/oracle.hpp"

namespace lbe {

// Named finite-difference checks of every analytic gradient path
// (encoders, stage losses, logit chain, hash relaxation).
std::vector<CheckResult> run_grad_checks();

// Hypergradient pipeline vs the perturbation oracle on seeded tiny
// instances, FD cross-Hessian products vs exact quadratic/bilinear
// references, the alpha step rule, guards, and oracle self-consistency.
std::vector<CheckResult> run_oracle_checks(int n_instances = 20);

}  // namespace lbe
