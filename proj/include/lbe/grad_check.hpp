#pragma once

#include <functional>

#include "lbe/common.hpp"

namespace lbe {

// Scalar loss with optional analytic gradient output. When `grad` is
// non-null it must be filled with d(loss)/d(params).
using LossFn = std::function<double(const Vec& params, Vec* grad)>;

// Max over coordinates of |analytic - central FD| / max(|analytic|, |FD|, 1e-12).
double grad_check(const LossFn& loss, Vec params, double eps = 1e-5);

}  // namespace lbe
