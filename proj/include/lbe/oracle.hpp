#pragma once

#include <string>

#include "lbe/trilevel.hpp"

namespace lbe {

// A problem small enough to differentiate by brute force: every stored
// similarity logit gets its own central-difference pass through the full
// virtual-update pipeline.
struct TinyInstance {
  Matrix2D train_x;
  std::vector<int> train_y;
  int n_classes = 2;
  Matrix2D val_x;
  std::vector<int> val_y;
  SimilarityMatrix sim{1};
  MlpParams t_enc, s_enc;  // single linear layer each
  double tau = 1.0;
  double xi_t = 0.05, xi_s = 0.05;
  LossMode mode = LossMode::kBce;
  PairList pairs;                             // all train pairs
  std::vector<std::size_t> batch, val_rows;   // full batches

  static TinyInstance seeded(std::uint64_t seed);
  TrainRefs refs() const;
};

// d(val loss)/d(logits) by perturbing each stored logit through
// A -> T' -> S' -> validation loss with exact analytic inner gradients.
// This is the ground truth the production hypergradient must match.
Vec perturbation_hypergrad(const TinyInstance& t, double eps = 1e-5);

// Production composition on the same instance, chained to logit space.
Vec production_hypergrad_logits(const TinyInstance& t);

// Exact H*v for symmetric H (dims <= 50); reference for the FD formulas.
Vec exact_hvp_quadratic(const Matrix2D& h, std::span<const double> v);

double cosine_of(const Vec& a, const Vec& b);
double rel_l2(const Vec& approx, const Vec& exact);

struct CheckResult {
  std::string name;
  bool pass = false;
  double metric = 0.0;
  std::string detail;
};

struct OracleReport {
  std::vector<CheckResult> checks;
  bool all_pass() const;
  std::string text() const;  // one [PASS]/[FAIL] line per check
  std::string csv() const;
};

// Aggregates check results; an empty list means nothing was verified and is
// rejected.
OracleReport make_report(std::vector<CheckResult> checks);

}  // namespace lbe
