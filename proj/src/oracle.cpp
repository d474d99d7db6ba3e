#include "lbe/oracle.hpp"

#include <cmath>
#include <cstdio>

#include "lbe/rng.hpp"

namespace lbe {

TinyInstance TinyInstance::seeded(std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "oracle");
  TinyInstance t;
  const std::size_t n = 6, m = 4, dim = 2, emb = 3;
  t.train_x = Matrix2D(n, dim);
  t.val_x = Matrix2D(m, dim);
  for (double& v : t.train_x.data()) v = rng.normal();
  for (double& v : t.val_x.data()) v = rng.normal();
  t.train_y = {0, 0, 0, 1, 1, 1};
  t.val_y = {0, 1, 0, 1};
  t.n_classes = 2;
  t.sim = SimilarityMatrix(n);
  for (double& th : t.sim.logits()) th = 0.5 * rng.normal();
  t.t_enc = MlpParams::seeded({dim, emb}, rng);
  t.s_enc = MlpParams::seeded({dim, emb}, rng);
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  t.pairs = all_pairs(ids);
  t.batch = ids;
  t.val_rows = {0, 1, 2, 3};
  return t;
}

TrainRefs TinyInstance::refs() const {
  TrainRefs r;
  r.train_x = &train_x;
  r.train_y = &train_y;
  r.n_classes = n_classes;
  r.tau = tau;
  r.allow_self_match = false;
  r.pmode = PredictMode::kSoft;
  return r;
}

namespace {

// Validation loss after the two one-step updates, as a plain function of
// the similarity logits. The inner gradients are the production analytic
// ones; only the outer derivative is taken numerically.
double pipeline_val_loss(const TinyInstance& t, const SimilarityMatrix& sim) {
  const TrainRefs ctx = t.refs();
  const HashPlan plan = HashPlan::none();
  const SiameseLoss sl =
      loss_siamese(sim, t.t_enc, t.tau, t.train_x, t.pairs, t.mode, plan);
  MlpParams t_prime = t.t_enc;
  t_prime.flat = virtual_step(t.t_enc.flat, sl.grad_t, t.xi_t);
  const KernelLoss ml = loss_matching(ctx, t_prime, t.s_enc, t.batch, plan);
  MlpParams s_prime = t.s_enc;
  s_prime.flat = virtual_step(t.s_enc.flat, ml.grad_s, t.xi_s);
  const KernelLoss vl =
      loss_validation(ctx, t_prime, s_prime, t.val_x, t.val_y, t.val_rows, plan);
  return vl.loss;
}

}  // namespace

Vec perturbation_hypergrad(const TinyInstance& t, double eps) {
  if (eps < 1e-8 || eps > 1e-2)
    throw RangeError("perturbation_hypergrad: eps outside sensible range");
  SimilarityMatrix sim = t.sim;
  Vec grad(sim.pair_count(), 0.0);
  for (std::size_t p = 0; p < sim.pair_count(); ++p) {
    const double orig = sim.logits()[p];
    sim.logits()[p] = orig + eps;
    const double lp = pipeline_val_loss(t, sim);
    sim.logits()[p] = orig - eps;
    const double lm = pipeline_val_loss(t, sim);
    sim.logits()[p] = orig;
    if (!std::isfinite(lp) || !std::isfinite(lm))
      throw NumericError("perturbation_hypergrad: non-finite pipeline loss");
    grad[p] = (lp - lm) / (2.0 * eps);
  }
  return grad;
}

Vec production_hypergrad_logits(const TinyInstance& t) {
  const HypergradReport rep =
      hypergrad_a(t.refs(), t.sim, t.t_enc, t.s_enc, t.pairs, t.batch, t.val_x, t.val_y,
                  t.val_rows, t.xi_t, t.xi_s, t.mode, HashPlan::none());
  return t.sim.chain_to_logits(rep.grad_a);
}

Vec exact_hvp_quadratic(const Matrix2D& h, std::span<const double> v) {
  if (h.rows() != h.cols()) throw ContractError("exact_hvp_quadratic: H must be square");
  if (h.rows() > 50) throw ContractError("exact_hvp_quadratic: dims above 50 not supported");
  if (v.size() != h.cols()) throw ShapeError("exact_hvp_quadratic: vector length mismatch");
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = i + 1; j < h.cols(); ++j)
      if (h.at(i, j) != h.at(j, i))
        throw ContractError("exact_hvp_quadratic: H must be symmetric");
  Vec out(h.rows(), 0.0);
  for (std::size_t i = 0; i < h.rows(); ++i) out[i] = vec_dot(h.row(i), v);
  return out;
}

double cosine_of(const Vec& a, const Vec& b) {
  const double na = vec_norm2(a), nb = vec_norm2(b);
  if (na < 1e-300 || nb < 1e-300) return 0.0;
  return vec_dot(a, b) / (na * nb);
}

double rel_l2(const Vec& approx, const Vec& exact) {
  if (approx.size() != exact.size()) throw ShapeError("rel_l2: size mismatch");
  double num = 0.0;
  for (std::size_t i = 0; i < approx.size(); ++i) {
    const double d = approx[i] - exact[i];
    num += d * d;
  }
  const double den = std::max(vec_norm2(exact), 1e-300);
  return std::sqrt(num) / den;
}

bool OracleReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string OracleReport::text() const {
  std::string out;
  char buf[64];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof buf, "%.6g", c.metric);
    out += c.pass ? "[PASS] " : "[FAIL] ";
    out += c.name;
    out += " metric=";
    out += buf;
    if (!c.detail.empty()) {
      out += " (";
      out += c.detail;
      out += ")";
    }
    out += "\n";
  }
  out += all_pass() ? "all checks passed\n" : "CHECK FAILURES PRESENT\n";
  return out;
}

std::string OracleReport::csv() const {
  std::string out = "check,pass,metric\n";
  char buf[64];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof buf, "%.17g", c.metric);
    out += c.name;
    out += c.pass ? ",1," : ",0,";
    out += buf;
    out += "\n";
  }
  return out;
}

OracleReport make_report(std::vector<CheckResult> checks) {
  if (checks.empty()) throw ContractError("make_report: nothing verified");
  OracleReport r;
  r.checks = std::move(checks);
  return r;
}

}  // namespace lbe
