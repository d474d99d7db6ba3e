#include "lbe/grad_check.hpp"

#include <cmath>

namespace lbe {

double grad_check(const LossFn& loss, Vec params, double eps) {
  Vec analytic(params.size(), 0.0);
  const double base = loss(params, &analytic);
  if (!std::isfinite(base) || !vec_all_finite(analytic))
    throw NumericError("grad_check: non-finite loss or gradient");
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + eps;
    const double lp = loss(params, nullptr);
    params[i] = orig - eps;
    const double lm = loss(params, nullptr);
    params[i] = orig;
    if (!std::isfinite(lp) || !std::isfinite(lm))
      throw NumericError("grad_check: non-finite perturbed loss");
    const double fd = (lp - lm) / (2.0 * eps);
    worst = std::max(worst, rel_err(analytic[i], fd));
  }
  return worst;
}

}  // namespace lbe
