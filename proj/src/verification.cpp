#include "lbe/verification.hpp"

#include <cmath>
#include <cstdio>

#include "lbe/grad_check.hpp"
#include "lbe/rng.hpp"

namespace lbe {

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

CheckResult bounded(const std::string& name, double metric, double bound,
                    const std::string& detail = "") {
  CheckResult c;
  c.name = name;
  c.metric = metric;
  c.pass = metric <= bound;
  c.detail = detail.empty() ? "bound " + fmt(bound) : detail;
  return c;
}

}  // namespace

std::vector<CheckResult> run_grad_checks() {
  std::vector<CheckResult> checks;

  {  // exact for quadratics up to roundoff
    Rng rng = Rng::stream(7, "grad-check");
    Vec p(12);
    for (double& v : p) v = rng.normal();
    const double err = grad_check(
        [](const Vec& q, Vec* g) {
          double l = 0.0;
          for (std::size_t i = 0; i < q.size(); ++i) l += 0.5 * q[i] * q[i];
          if (g) *g = q;
          return l;
        },
        p, 1e-5);
    checks.push_back(bounded("quadratic_exact", err, 1e-8));
  }

  {  // raw MLP backward against central differences
    Rng rng = Rng::stream(11, "grad-check");
    const MlpParams net = MlpParams::seeded({4, 8, 5}, rng);
    Matrix2D batch(3, 4), g_out(3, 5);
    for (double& v : batch.data()) v = rng.normal();
    for (double& v : g_out.data()) v = rng.normal();
    const double err = grad_check(
        [&](const Vec& flat, Vec* g) {
          MlpParams p2 = net;
          p2.flat = flat;
          MlpCache cache;
          const Matrix2D out = mlp_forward(p2, batch, &cache);
          double l = 0.0;
          for (std::size_t i = 0; i < out.data().size(); ++i)
            l += out.data()[i] * g_out.data()[i];
          if (g) *g = mlp_backward(p2, cache, g_out).params;
          return l;
        },
        net.flat, 1e-6);
    checks.push_back(bounded("mlp_backward_fd", err, 1e-5));
  }

  const TinyInstance tiny = TinyInstance::seeded(3);
  const TrainRefs ctx = tiny.refs();
  const HashPlan none = HashPlan::none();

  for (const LossMode mode : {LossMode::kBce, LossMode::kLiteral}) {
    const std::string tag = mode == LossMode::kBce ? "bce" : "literal";
    const double err = grad_check(
        [&](const Vec& flat, Vec* g) {
          MlpParams t2 = tiny.t_enc;
          t2.flat = flat;
          const SiameseLoss l =
              loss_siamese(tiny.sim, t2, tiny.tau, tiny.train_x, tiny.pairs, mode, none);
          if (g) *g = l.grad_t;
          return l.loss;
        },
        tiny.t_enc.flat, 1e-5);
    checks.push_back(bounded("stage1_" + tag + "_grad_T", err, 1e-4));
  }

  {  // pairwise loss gradient w.r.t. the similarity logits
    const double err = grad_check(
        [&](const Vec& theta, Vec* g) {
          SimilarityMatrix sim = tiny.sim;
          sim.logits() = theta;
          const SiameseLoss l = loss_siamese(sim, tiny.t_enc, tiny.tau, tiny.train_x,
                                             tiny.pairs, LossMode::kBce, none);
          if (g) *g = sim.chain_to_logits(l.grad_a);
          return l.loss;
        },
        tiny.sim.logits(), 1e-5);
    checks.push_back(bounded("stage1_grad_A_logits", err, 1e-4));
  }

  {
    const double err = grad_check(
        [&](const Vec& flat, Vec* g) {
          MlpParams s2 = tiny.s_enc;
          s2.flat = flat;
          const KernelLoss l = loss_matching(ctx, tiny.t_enc, s2, tiny.batch, none);
          if (g) *g = l.grad_s;
          return l.loss;
        },
        tiny.s_enc.flat, 1e-5);
    checks.push_back(bounded("stage2_grad_S", err, 1e-4));
  }
  {
    const double err = grad_check(
        [&](const Vec& flat, Vec* g) {
          MlpParams t2 = tiny.t_enc;
          t2.flat = flat;
          const KernelLoss l = loss_matching(ctx, t2, tiny.s_enc, tiny.batch, none);
          if (g) *g = l.grad_t;
          return l.loss;
        },
        tiny.t_enc.flat, 1e-5);
    checks.push_back(bounded("stage2_grad_Tprime", err, 1e-4));
  }

  {
    const double err = grad_check(
        [&](const Vec& flat, Vec* g) {
          MlpParams t2 = tiny.t_enc;
          t2.flat = flat;
          const KernelLoss l = loss_validation(ctx, t2, tiny.s_enc, tiny.val_x, tiny.val_y,
                                               tiny.val_rows, none);
          if (g) *g = l.grad_t;
          return l.loss;
        },
        tiny.t_enc.flat, 1e-5);
    checks.push_back(bounded("stage3_grad_Tprime", err, 1e-4));
  }
  {
    const double err = grad_check(
        [&](const Vec& flat, Vec* g) {
          MlpParams s2 = tiny.s_enc;
          s2.flat = flat;
          const KernelLoss l = loss_validation(ctx, tiny.t_enc, s2, tiny.val_x, tiny.val_y,
                                               tiny.val_rows, none);
          if (g) *g = l.grad_s;
          return l.loss;
        },
        tiny.s_enc.flat, 1e-5);
    checks.push_back(bounded("stage3_grad_Sprime", err, 1e-4));
  }

  {  // relaxed binary-code path, fixed logistic noise
    Rng rng = Rng::stream(13, "grad-check");
    const std::size_t bits = 6;
    const MlpParams enc = MlpParams::seeded({2, bits}, rng);
    Matrix2D noise_train(tiny.train_x.rows(), bits), noise_val(tiny.val_x.rows(), bits);
    for (double& v : noise_train.data()) v = rng.logistic();
    for (double& v : noise_val.data()) v = rng.logistic();
    HashPlan plan;
    plan.hash_t = true;
    plan.temp = 0.5;
    plan.t_train = &noise_train;
    plan.t_query = &noise_val;

    const double err1 = grad_check(
        [&](const Vec& flat, Vec* g) {
          MlpParams t2 = enc;
          t2.flat = flat;
          const SiameseLoss l =
              loss_siamese(tiny.sim, t2, tiny.tau, tiny.train_x, tiny.pairs, LossMode::kBce, plan);
          if (g) *g = l.grad_t;
          return l.loss;
        },
        enc.flat, 1e-5);
    checks.push_back(bounded("hash_stage1_grad_T", err1, 1e-4));

    HashPlan plan_s;
    plan_s.hash_s = true;
    plan_s.temp = 0.5;
    plan_s.s_train = &noise_train;
    plan_s.s_query = &noise_val;
    const double err2 = grad_check(
        [&](const Vec& flat, Vec* g) {
          MlpParams s2 = enc;
          s2.flat = flat;
          const KernelLoss l = loss_validation(ctx, tiny.t_enc, s2, tiny.val_x, tiny.val_y,
                                               tiny.val_rows, plan_s);
          if (g) *g = l.grad_s;
          return l.loss;
        },
        enc.flat, 1e-5);
    checks.push_back(bounded("hash_kernel_grad_S", err2, 1e-4));
  }

  return checks;
}

std::vector<CheckResult> run_oracle_checks(int n_instances) {
  std::vector<CheckResult> checks;

  for (int i = 1; i <= n_instances; ++i) {
    const TinyInstance t = TinyInstance::seeded(static_cast<std::uint64_t>(i));
    const Vec oracle = perturbation_hypergrad(t);
    const Vec prod = production_hypergrad_logits(t);
    const double cos = cosine_of(prod, oracle);
    const double rl2 = rel_l2(prod, oracle);
    CheckResult c;
    c.name = "tiny_hypergrad_seed" + std::to_string(i);
    c.metric = cos;
    c.pass = cos >= 0.99 && rl2 <= 1e-2;
    c.detail = "cosine " + fmt(cos) + ", rel_l2 " + fmt(rl2);
    checks.push_back(c);
  }

  {  // FD cross-HVP vs exact quadratic / bilinear products
    Rng rng = Rng::stream(29, "oracle-check");
    double worst = 0.0;
    for (int k = 0; k < 25; ++k) {
      const std::size_t d = 2 + static_cast<std::size_t>(rng.below(11));
      Matrix2D h(d, d);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
          const double v = rng.normal();
          h.at(i, j) = v;
          h.at(j, i) = v;
        }
      Vec x(d), v(d);
      for (double& q : x) q = rng.normal();
      for (double& q : v) q = rng.normal();
      const auto fd = fd_cross_hvp(x, v, d, [&](const Vec& y) {
        Vec g(d);
        for (std::size_t i = 0; i < d; ++i) g[i] = vec_dot(h.row(i), y);
        return g;
      });
      worst = std::max(worst, rel_l2(fd.hvp, exact_hvp_quadratic(h, v)));
    }
    for (int k = 0; k < 25; ++k) {
      const std::size_t dx = 2 + static_cast<std::size_t>(rng.below(9));
      const std::size_t dy = 2 + static_cast<std::size_t>(rng.below(9));
      Vec a(dx), b(dy), y(dy), v(dy);
      for (double& q : a) q = rng.normal();
      for (double& q : b) q = rng.normal();
      for (double& q : y) q = rng.normal();
      for (double& q : v) q = rng.normal();
      // L(x, y) = (a.x)(b.y): grad_x = a * (b.y); cross-HVP = a * (b.v)
      const auto fd = fd_cross_hvp(y, v, dx, [&](const Vec& yy) {
        Vec g(dx);
        const double s = vec_dot(b, yy);
        for (std::size_t i = 0; i < dx; ++i) g[i] = a[i] * s;
        return g;
      });
      Vec exact(dx);
      const double bv = vec_dot(b, v);
      for (std::size_t i = 0; i < dx; ++i) exact[i] = a[i] * bv;
      worst = std::max(worst, rel_l2(fd.hvp, exact));
    }
    checks.push_back(bounded("fd_hvp_quadratic_bilinear_50", worst, 1e-4));
  }

  {  // alpha = 0.01/||direction||, exact at ||v|| = 2
    const Vec point{0.0, 0.0};
    const Vec dir{1.2, 1.6};  // norm 2
    const auto fd =
        fd_cross_hvp(point, dir, 2, [](const Vec& y) { return y; });
    CheckResult c;
    c.name = "alpha_rule_norm2";
    c.metric = fd.alpha;
    c.pass = fd.alpha == 0.005;
    c.detail = "expected exactly 0.005";
    checks.push_back(c);
  }

  {  // zero-direction guard
    const Vec point{1.0, 2.0, 3.0};
    const Vec dir(3, 0.0);
    const auto fd = fd_cross_hvp(point, dir, 3, [](const Vec& y) { return y; });
    CheckResult c;
    c.name = "zero_direction_guard";
    c.metric = vec_norm2(fd.hvp);
    c.pass = fd.zero_direction && c.metric == 0.0;
    c.detail = "flagged and zero";
    checks.push_back(c);
  }

  {  // oracle self-consistency: halving eps shrinks the step-size error
    const TinyInstance t = TinyInstance::seeded(101);
    const double eps = 4e-4;
    const Vec g2 = perturbation_hypergrad(t, 2.0 * eps);
    const Vec g1 = perturbation_hypergrad(t, eps);
    const Vec gh = perturbation_hypergrad(t, 0.5 * eps);
    Vec d21(g1.size()), d1h(g1.size());
    for (std::size_t i = 0; i < g1.size(); ++i) {
      d21[i] = g2[i] - g1[i];
      d1h[i] = g1[i] - gh[i];
    }
    const double coarse = vec_norm2(d21), fine = vec_norm2(d1h);
    CheckResult c;
    c.name = "richardson_consistency";
    c.metric = fine > 0.0 ? coarse / fine : 0.0;
    // central differences are O(eps^2): halving eps should shrink the
    // successive difference by about 4x
    c.pass = fine <= std::max(0.5 * coarse, 1e-10);
    c.detail = "coarse/fine ratio " + fmt(c.metric);
    checks.push_back(c);
  }

  return checks;
}

}  // namespace lbe
