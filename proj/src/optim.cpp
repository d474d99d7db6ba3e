#include "lbe/optim.hpp"

#include <cmath>
#include <numbers>

namespace lbe {

void sgd_momentum_step(Vec& params, const Vec& grads, MomentumState& state, double lr,
                       double momentum, double weight_decay) {
  if (grads.size() != params.size()) throw ShapeError("sgd_momentum_step: grad/param size mismatch");
  if (state.v.empty()) state.v.assign(params.size(), 0.0);
  if (state.v.size() != params.size()) throw ShapeError("sgd_momentum_step: state size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.v[i] = momentum * state.v[i] + (grads[i] + weight_decay * params[i]);
    params[i] -= lr * state.v[i];
  }
}

void adam_step(Vec& params, const Vec& grads, AdamState& state, double lr, double weight_decay,
               double beta1, double beta2, double eps) {
  if (grads.size() != params.size()) throw ShapeError("adam_step: grad/param size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adam_step: state size mismatch");
  if (!vec_all_finite(grads)) throw NumericError("adam_step: non-finite gradient");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + weight_decay * params[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

double cosine_lr(long step, long total_steps, double lr0) {
  if (step < 0 || step > total_steps)
    throw RangeError("cosine_lr: step outside [0, total_steps]");
  return 0.5 * lr0 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                         static_cast<double>(total_steps)));
}

}  // namespace lbe
