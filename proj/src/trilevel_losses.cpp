#include <algorithm>
#include <cmath>

#include "lbe/trilevel.hpp"

namespace lbe {

namespace {

constexpr double kProbLo = 1e-7;
constexpr double kProbHi = 1.0 - 1e-7;
constexpr double kPredFloor = 1e-12;

Matrix2D gather_rows(const Matrix2D& x, const std::vector<std::size_t>& rows) {
  Matrix2D out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

PairList all_pairs(const std::vector<std::size_t>& ids) {
  PairList pairs;
  pairs.reserve(ids.size() * (ids.size() - 1) / 2);
  for (std::size_t a = 0; a < ids.size(); ++a)
    for (std::size_t b = a + 1; b < ids.size(); ++b) {
      const std::size_t i = std::min(ids[a], ids[b]);
      const std::size_t j = std::max(ids[a], ids[b]);
      pairs.push_back({i, j});
    }
  return pairs;
}

Repr encode_repr(const MlpParams& enc, const Matrix2D& rows, bool hashed, double temp,
                 const Matrix2D* noise, const std::vector<std::size_t>* noise_rows) {
  Repr r;
  r.hashed = hashed;
  r.temp = temp;
  Matrix2D raw = mlp_forward(enc, rows, &r.cache);
  if (!raw.all_finite()) throw NumericError("encode_repr: non-finite encoder output");
  if (!hashed) {
    r.rep = std::move(raw);
    return r;
  }
  Matrix2D nz(raw.rows(), raw.cols(), 0.0);
  if (noise) {
    if (noise_rows) {
      if (noise_rows->size() != raw.rows())
        throw ShapeError("encode_repr: noise row selection mismatch");
      for (std::size_t i = 0; i < noise_rows->size(); ++i) {
        const auto src = noise->row((*noise_rows)[i]);
        std::copy(src.begin(), src.end(), nz.row(i).begin());
      }
    } else {
      if (!noise->same_shape(raw)) throw ShapeError("encode_repr: noise shape mismatch");
      nz = *noise;
    }
  }
  r.rep = soft_bits(raw, nz, temp);
  return r;
}

void repr_backward(const MlpParams& enc, const Repr& r, const Matrix2D& grad_rep,
                   Vec& grad_params) {
  if (grad_params.size() != enc.n_params())
    throw ShapeError("repr_backward: gradient accumulator size mismatch");
  Matrix2D graw = grad_rep;
  if (r.hashed) {
    for (std::size_t i = 0; i < graw.data().size(); ++i) {
      const double s = r.rep.data()[i];
      graw.data()[i] *= s * (1.0 - s) / r.temp;
    }
  }
  const MlpGrads g = mlp_backward(enc, r.cache, graw);
  vec_axpy(1.0, g.params, grad_params);
}

double pair_sim(const Repr& ra, std::size_t i, const Repr& rb, std::size_t j) {
  if (ra.hashed != rb.hashed) throw ShapeError("pair_sim: mixed representations");
  return ra.hashed ? hamming_sim_soft(ra.rep.row(i), rb.rep.row(j))
                   : cosine_sim(ra.rep.row(i), rb.rep.row(j));
}

void pair_sim_backward(const Repr& ra, std::size_t i, const Repr& rb, std::size_t j, double g,
                       Matrix2D& grad_a, Matrix2D& grad_b) {
  if (ra.hashed)
    hamming_sim_soft_backward(ra.rep.row(i), rb.rep.row(j), g, grad_a.row(i), grad_b.row(j));
  else
    cosine_sim_backward(ra.rep.row(i), rb.rep.row(j), g, grad_a.row(i), grad_b.row(j));
}

SiameseLoss loss_siamese(const SimilarityMatrix& a, const MlpParams& t_enc, double tau,
                         const Matrix2D& train_x, const PairList& pairs, LossMode mode,
                         const HashPlan& plan) {
  if (tau <= 0.0) throw RangeError("loss_siamese: tau must be positive");
  SiameseLoss out;
  out.grad_t.assign(t_enc.n_params(), 0.0);
  out.grad_a.assign(a.pair_count(), 0.0);
  if (pairs.empty()) return out;

  // encode each touched row once
  std::vector<std::size_t> ids;
  ids.reserve(pairs.size() * 2);
  for (const auto& [i, j] : pairs) {
    if (i == j) throw DiagonalError("loss_siamese: self pair");
    ids.push_back(i);
    ids.push_back(j);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.back() >= train_x.rows() || ids.back() >= a.size())
    throw RangeError("loss_siamese: pair index out of range");
  std::vector<std::size_t> local(train_x.rows(), 0);
  for (std::size_t k = 0; k < ids.size(); ++k) local[ids[k]] = k;

  const Repr rep = encode_repr(t_enc, gather_rows(train_x, ids), plan.hash_t, plan.temp,
                               plan.t_train, &ids);
  Matrix2D grad_rep(ids.size(), rep.rep.cols());

  const double inv = 1.0 / static_cast<double>(pairs.size());
  for (const auto& [i, j] : pairs) {
    const std::size_t li = local[i], lj = local[j];
    const double s = pair_sim(rep, li, rep, lj);
    const double f = sigmoid(s / tau);
    const bool inside = f >= kProbLo && f <= kProbHi;
    const double ft = std::clamp(f, kProbLo, kProbHi);
    if (!inside) ++out.clamped;
    const double aij = a.value(i, j);
    const std::size_t p = a.pair_index(i, j);
    double df = 0.0;
    if (mode == LossMode::kLiteral) {
      out.loss += -aij * std::log(ft) * inv;
      out.grad_a[p] += -std::log(ft) * inv;
      if (inside) df = -aij / ft * inv;
    } else {
      out.loss += -(aij * std::log(ft) + (1.0 - aij) * std::log(1.0 - ft)) * inv;
      out.grad_a[p] += std::log((1.0 - ft) / ft) * inv;
      if (inside) df = (-aij / ft + (1.0 - aij) / (1.0 - ft)) * inv;
    }
    if (df != 0.0) {
      const double ds = df * ft * (1.0 - ft) / tau;
      pair_sim_backward(rep, li, rep, lj, ds, grad_rep, grad_rep);
    }
  }
  repr_backward(t_enc, rep, grad_rep, out.grad_t);
  if (!std::isfinite(out.loss) || !vec_all_finite(out.grad_t))
    throw NumericError("loss_siamese: non-finite result");
  return out;
}

namespace {

// Mean cross-entropy of the normalized f*c label mixture; shared by the
// matching loss (queries are train rows, optional self-exclusion) and the
// validation loss (external queries, no exclusion).
KernelLoss kernel_loss_impl(const TrainRefs& ctx, const MlpParams& t_enc,
                            const MlpParams& s_enc, const Matrix2D* query_x,
                            const std::vector<int>* query_y,
                            const std::vector<std::size_t>& query_rows, bool queries_are_train,
                            const HashPlan& plan) {
  const Matrix2D& train_x = *ctx.train_x;
  const std::vector<int>& train_y = *ctx.train_y;
  const std::size_t n = train_x.rows();
  if (n == 0) throw EmptyCandidatesError("kernel loss: empty training pool");
  if (query_rows.empty()) throw DataError("kernel loss: empty query batch");

  KernelLoss out;
  out.grad_t.assign(t_enc.n_params(), 0.0);
  out.grad_s.assign(s_enc.n_params(), 0.0);

  const Repr t_cand = encode_repr(t_enc, train_x, plan.hash_t, plan.temp, plan.t_train);
  const Repr s_cand = encode_repr(s_enc, train_x, plan.hash_s, plan.temp, plan.s_train);
  Matrix2D g_t_cand(t_cand.rep.rows(), t_cand.rep.cols());
  Matrix2D g_s_cand(s_cand.rep.rows(), s_cand.rep.cols());

  Repr t_qr, s_qr;
  Matrix2D g_t_q, g_s_q;
  if (!queries_are_train) {
    const Matrix2D qx = gather_rows(*query_x, query_rows);
    t_qr = encode_repr(t_enc, qx, plan.hash_t, plan.temp, plan.t_query, &query_rows);
    s_qr = encode_repr(s_enc, qx, plan.hash_s, plan.temp, plan.s_query, &query_rows);
    g_t_q = Matrix2D(t_qr.rep.rows(), t_qr.rep.cols());
    g_s_q = Matrix2D(s_qr.rep.rows(), s_qr.rep.cols());
  }
  const Repr& t_q = queries_are_train ? t_cand : t_qr;
  const Repr& s_q = queries_are_train ? s_cand : s_qr;
  Matrix2D& gt_q = queries_are_train ? g_t_cand : g_t_q;
  Matrix2D& gs_q = queries_are_train ? g_s_cand : g_s_q;

  const double inv = 1.0 / static_cast<double>(query_rows.size());
  std::vector<std::size_t> cand;
  Vec f, c, sims, df, dc;
  std::vector<char> inside;

  for (std::size_t qi = 0; qi < query_rows.size(); ++qi) {
    const std::size_t qrow = queries_are_train ? query_rows[qi] : qi;
    const int yq = queries_are_train ? train_y[query_rows[qi]] : (*query_y)[query_rows[qi]];

    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (queries_are_train && !ctx.allow_self_match && j == query_rows[qi]) continue;
      cand.push_back(j);
    }
    if (cand.empty()) throw EmptyCandidatesError("kernel loss: no candidates after exclusion");
    if (ctx.pmode == PredictMode::kTopK && cand.size() > ctx.topk) {
      const auto selected = retrieve_topk(
          [&](std::size_t j) { return pair_sim(t_q, qrow, t_cand, j); }, cand, ctx.topk);
      cand.assign(selected.begin(), selected.end());
      std::sort(cand.begin(), cand.end());
    }

    const std::size_t m = cand.size();
    f.resize(m);
    sims.resize(m);
    inside.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double s = pair_sim(t_q, qrow, t_cand, cand[k]);
      const double fv = sigmoid(s / ctx.tau);
      inside[k] = fv >= kProbLo && fv <= kProbHi;
      f[k] = std::clamp(fv, kProbLo, kProbHi);
      sims[k] = pair_sim(s_q, qrow, s_cand, cand[k]);
    }
    // stable softmax for the matching kernel
    c.resize(m);
    const double mx = *std::max_element(sims.begin(), sims.end());
    double z_c = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      c[k] = std::exp(sims[k] - mx);
      z_c += c[k];
    }
    for (double& v : c) v /= z_c;

    double z = 0.0, p_same = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double w = f[k] * c[k];
      z += w;
      if (train_y[cand[k]] == yq) p_same += w;
    }
    const double p_label = p_same / z;
    if (p_label < kPredFloor) {
      ++out.clamped;
      out.loss += -std::log(kPredFloor) * inv;
      continue;  // constant region, zero gradient
    }
    out.loss += -std::log(p_label) * inv;

    df.resize(m);
    dc.resize(m);
    double dc_dot_c = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double same = train_y[cand[k]] == yq ? 1.0 : 0.0;
      const double dw = (-same / p_same + 1.0 / z) * inv;
      df[k] = dw * c[k];
      dc[k] = dw * f[k];
      dc_dot_c += dc[k] * c[k];
    }
    for (std::size_t k = 0; k < m; ++k) {
      // matching kernel: softmax backward into the S-side similarity
      const double dsim_s = c[k] * (dc[k] - dc_dot_c);
      if (dsim_s != 0.0)
        pair_sim_backward(s_q, qrow, s_cand, cand[k], dsim_s, gs_q, g_s_cand);
      // retriever: sigmoid backward into the T-side similarity
      if (inside[k] && df[k] != 0.0) {
        const double dsim_t = df[k] * f[k] * (1.0 - f[k]) / ctx.tau;
        pair_sim_backward(t_q, qrow, t_cand, cand[k], dsim_t, gt_q, g_t_cand);
      }
    }
  }

  repr_backward(t_enc, t_cand, g_t_cand, out.grad_t);
  repr_backward(s_enc, s_cand, g_s_cand, out.grad_s);
  if (!queries_are_train) {
    repr_backward(t_enc, t_qr, g_t_q, out.grad_t);
    repr_backward(s_enc, s_qr, g_s_q, out.grad_s);
  }
  if (!std::isfinite(out.loss) || !vec_all_finite(out.grad_t) || !vec_all_finite(out.grad_s))
    throw NumericError("kernel loss: non-finite result");
  return out;
}

}  // namespace

KernelLoss loss_matching(const TrainRefs& ctx, const MlpParams& t_enc, const MlpParams& s_enc,
                         const std::vector<std::size_t>& batch_ids, const HashPlan& plan) {
  return kernel_loss_impl(ctx, t_enc, s_enc, nullptr, nullptr, batch_ids, true, plan);
}

KernelLoss loss_validation(const TrainRefs& ctx, const MlpParams& t_enc, const MlpParams& s_enc,
                           const Matrix2D& val_x, const std::vector<int>& val_y,
                           const std::vector<std::size_t>& val_rows, const HashPlan& plan) {
  return kernel_loss_impl(ctx, t_enc, s_enc, &val_x, &val_y, val_rows, false, plan);
}

Vec virtual_step(const Vec& params, const Vec& grad, double xi) {
  if (params.size() != grad.size()) throw ShapeError("virtual_step: size mismatch");
  if (!(xi > 0.0)) throw RangeError("virtual_step: xi must be positive");
  Vec out = params;
  vec_axpy(-xi, grad, out);
  return out;
}

FdHvpResult fd_cross_hvp(const Vec& point, const Vec& direction, std::size_t out_size,
                         const std::function<Vec(const Vec&)>& grad_at) {
  if (point.size() != direction.size()) throw ShapeError("fd_cross_hvp: size mismatch");
  FdHvpResult r;
  const double nrm = vec_norm2(direction);
  if (nrm < 1e-12) {
    r.hvp.assign(out_size, 0.0);
    r.zero_direction = true;
    return r;
  }
  r.alpha = 0.01 / nrm;
  Vec plus = point, minus = point;
  vec_axpy(r.alpha, direction, plus);
  vec_axpy(-r.alpha, direction, minus);
  const Vec gp = grad_at(plus);
  const Vec gm = grad_at(minus);
  if (gp.size() != out_size || gm.size() != out_size)
    throw ShapeError("fd_cross_hvp: gradient size mismatch");
  r.hvp.resize(out_size);
  const double scale = 1.0 / (2.0 * r.alpha);
  for (std::size_t i = 0; i < out_size; ++i) r.hvp[i] = (gp[i] - gm[i]) * scale;
  return r;
}

FdHvpResult fd_hvp_ts(const TrainRefs& ctx, const MlpParams& t_prime, const MlpParams& s_enc,
                      const std::vector<std::size_t>& batch_ids, const HashPlan& plan,
                      const Vec& direction) {
  if (direction.size() != s_enc.n_params())
    throw ShapeError("fd_hvp_ts: direction must be S-shaped");
  return fd_cross_hvp(s_enc.flat, direction, t_prime.n_params(), [&](const Vec& s_flat) {
    MlpParams s2 = s_enc;
    s2.flat = s_flat;
    return loss_matching(ctx, t_prime, s2, batch_ids, plan).grad_t;
  });
}

FdHvpResult fd_hvp_at(const TrainRefs& ctx, const SimilarityMatrix& a, const MlpParams& t_enc,
                      const PairList& pairs, LossMode mode, const HashPlan& plan,
                      const Vec& direction) {
  if (direction.size() != t_enc.n_params())
    throw ShapeError("fd_hvp_at: direction must be T-shaped");
  return fd_cross_hvp(t_enc.flat, direction, a.pair_count(), [&](const Vec& t_flat) {
    MlpParams t2 = t_enc;
    t2.flat = t_flat;
    return loss_siamese(a, t2, ctx.tau, *ctx.train_x, pairs, mode, plan).grad_a;
  });
}

HypergradReport hypergrad_a(const TrainRefs& ctx, const SimilarityMatrix& a,
                            const MlpParams& t_enc, const MlpParams& s_enc,
                            const PairList& pairs, const std::vector<std::size_t>& batch_ids,
                            const Matrix2D& val_x, const std::vector<int>& val_y,
                            const std::vector<std::size_t>& val_rows, double xi_t, double xi_s,
                            LossMode mode, const HashPlan& plan) {
  HypergradReport rep;

  const SiameseLoss sl = loss_siamese(a, t_enc, ctx.tau, *ctx.train_x, pairs, mode, plan);
  rep.siamese_loss = sl.loss;
  MlpParams t_prime = t_enc;
  t_prime.flat = virtual_step(t_enc.flat, sl.grad_t, xi_t);

  const KernelLoss ml = loss_matching(ctx, t_prime, s_enc, batch_ids, plan);
  rep.match_loss = ml.loss;
  MlpParams s_prime = s_enc;
  s_prime.flat = virtual_step(s_enc.flat, ml.grad_s, xi_s);

  const KernelLoss vl = loss_validation(ctx, t_prime, s_prime, val_x, val_y, val_rows, plan);
  rep.val_loss = vl.loss;
  rep.clamped = sl.clamped + ml.clamped + vl.clamped;
  rep.val_grad_t_norm = vec_norm2(vl.grad_t);
  rep.val_grad_s_norm = vec_norm2(vl.grad_s);

  // second-stage pathway: h = (d/dS grad_{T'} L_match) . v
  const FdHvpResult h = fd_hvp_ts(ctx, t_prime, s_enc, batch_ids, plan, vl.grad_s);
  rep.alpha_s = h.alpha;
  rep.zero_dir_s = h.zero_direction;

  Vec w = vl.grad_t;
  vec_axpy(-xi_s, h.hvp, w);

  const FdHvpResult g = fd_hvp_at(ctx, a, t_enc, pairs, mode, plan, w);
  rep.alpha_t = g.alpha;
  rep.zero_dir_t = g.zero_direction;

  rep.grad_a.assign(a.pair_count(), 0.0);
  vec_axpy(-xi_t, g.hvp, rep.grad_a);
  return rep;
}

std::pair<double, double> intra_inter_means(const SimilarityMatrix& a,
                                            const std::vector<int>& labels) {
  if (labels.size() != a.size()) throw ShapeError("intra_inter_means: label count mismatch");
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const double v = a.value(i, j);
      if (labels[i] == labels[j]) {
        intra += v;
        ++n_intra;
      } else {
        inter += v;
        ++n_inter;
      }
    }
  return {n_intra ? intra / static_cast<double>(n_intra) : 0.0,
          n_inter ? inter / static_cast<double>(n_inter) : 0.0};
}

}  // namespace lbe
