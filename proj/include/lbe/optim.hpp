#pragma once

#include "lbe/common.hpp"

namespace lbe {

struct MomentumState {
  Vec v;
};

struct AdamState {
  Vec m, v;
  long step = 0;
};

// v <- momentum*v + (grad + wd*param); param <- param - lr*v
void sgd_momentum_step(Vec& params, const Vec& grads, MomentumState& state, double lr,
                       double momentum, double weight_decay);

// Classic Adam; weight decay enters as an additive L2 gradient term before
// the moment updates.
void adam_step(Vec& params, const Vec& grads, AdamState& state, double lr, double weight_decay,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// 0.5 * lr0 * (1 + cos(pi * step / total_steps))
double cosine_lr(long step, long total_steps, double lr0);

}  // namespace lbe
