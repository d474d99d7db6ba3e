#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "lbe/rng.hpp"
#include "lbe/trilevel.hpp"

namespace lbe {

TrainRefs LBEState::refs() const {
  TrainRefs r;
  r.train_x = &train_x;
  r.train_y = &train_y;
  r.n_classes = n_classes;
  r.tau = cfg.tau;
  r.allow_self_match = cfg.allow_self_match;
  r.pmode = cfg.predict_mode_enum();
  r.topk = static_cast<std::size_t>(cfg.predict_k);
  return r;
}

LBEState init_state(const RunConfig& cfg, const Dataset& train) {
  cfg.validate();
  train.validate();
  LBEState st;
  st.cfg = cfg;
  st.scaler.fit(train.features);
  st.train_x = st.scaler.apply(train.features);
  st.train_y = train.labels;
  st.train_ids = train.ids;
  st.n_classes = train.n_classes;

  std::vector<std::size_t> base;
  base.push_back(train.dim());
  for (int h : cfg.hidden) {
    if (h < 1) throw ConfigError("config key 'model.hidden': widths must be >= 1");
    base.push_back(static_cast<std::size_t>(h));
  }
  const std::size_t bits = static_cast<std::size_t>(cfg.code_bits);
  const std::size_t embed = static_cast<std::size_t>(cfg.embed_dim);

  Rng init = Rng::stream(cfg.seed, "init");
  st.siamese.tau = cfg.tau;
  if (cfg.tie_weights) {
    // one shared encoder; its width must satisfy whichever side hashes
    auto dims = base;
    dims.push_back(cfg.hash_t() || cfg.hash_s() ? bits : embed);
    st.siamese.encoder = MlpParams::seeded(dims, init);
    st.matching.tied = true;
  } else {
    auto t_dims = base, s_dims = base;
    t_dims.push_back(cfg.hash_t() ? bits : embed);
    s_dims.push_back(cfg.hash_s() ? bits : embed);
    st.siamese.encoder = MlpParams::seeded(t_dims, init);
    st.matching.encoder = MlpParams::seeded(s_dims, init);
  }
  st.sim = cfg.label_informed_init ? SimilarityMatrix::label_informed(train.labels)
                                   : SimilarityMatrix(train.size());
  return st;
}

PoolRepr make_pool_repr(const LBEState& st) {
  PoolRepr p;
  p.hash_t = st.cfg.hash_t();
  p.hash_s = st.cfg.hash_s();
  const CodeMode mode =
      st.cfg.code_mode == "sample" ? CodeMode::kSampled : CodeMode::kThresholded;
  if (p.hash_t)
    p.t_codes = encode_codes(st.siamese.encoder, st.train_x, st.cfg.gumbel_temp,
                             st.cfg.seed ^ 0x7261ull, true, mode);
  else
    p.t_emb = mlp_forward(st.siamese.encoder, st.train_x);
  if (p.hash_s)
    p.s_codes = encode_codes(st.match_enc(), st.train_x, st.cfg.gumbel_temp,
                             st.cfg.seed ^ 0x7262ull, true, mode);
  else
    p.s_emb = mlp_forward(st.match_enc(), st.train_x);
  return p;
}

namespace {

Matrix2D one_row(std::span<const double> v) {
  Matrix2D m(1, v.size());
  std::copy(v.begin(), v.end(), m.row(0).begin());
  return m;
}

}  // namespace

Vec predict(const LBEState& st, const PoolRepr& pool, std::span<const double> query_std,
            PredictMode mode, std::size_t k, std::optional<std::size_t> exclude_id) {
  const std::size_t n = st.train_x.rows();
  const Matrix2D q = one_row(query_std);

  // query representation under the inference path
  Matrix2D q_t_emb, q_s_emb;
  BinaryCodebook q_t_codes, q_s_codes;
  const CodeMode cmode =
      st.cfg.code_mode == "sample" ? CodeMode::kSampled : CodeMode::kThresholded;
  if (pool.hash_t)
    q_t_codes = encode_codes(st.siamese.encoder, q, st.cfg.gumbel_temp,
                             st.cfg.seed ^ 0x7263ull, true, cmode);
  else
    q_t_emb = mlp_forward(st.siamese.encoder, q);
  if (pool.hash_s)
    q_s_codes = encode_codes(st.match_enc(), q, st.cfg.gumbel_temp, st.cfg.seed ^ 0x7264ull,
                             true, cmode);
  else
    q_s_emb = mlp_forward(st.match_enc(), q);

  const auto f_of = [&](std::size_t j) {
    const double s = pool.hash_t
                         ? hamming_sim(q_t_codes.code(0), pool.t_codes.code(j), q_t_codes.bits)
                         : cosine_sim(q_t_emb.row(0), pool.t_emb.row(j));
    return sigmoid(s / st.cfg.tau);
  };
  const auto s_of = [&](std::size_t j) {
    return pool.hash_s ? hamming_sim(q_s_codes.code(0), pool.s_codes.code(j), q_s_codes.bits)
                       : cosine_sim(q_s_emb.row(0), pool.s_emb.row(j));
  };

  std::vector<std::size_t> cand;
  cand.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (exclude_id && st.train_ids[j] == *exclude_id) continue;
    cand.push_back(j);
  }
  if (cand.empty()) throw EmptyCandidatesError("predict: no candidates after exclusion");
  if (mode == PredictMode::kTopK && cand.size() > k) {
    cand = retrieve_topk(f_of, cand, k);
    std::sort(cand.begin(), cand.end());
  }

  Vec sims(cand.size());
  for (std::size_t i = 0; i < cand.size(); ++i) sims[i] = s_of(cand[i]);
  const double mx = *std::max_element(sims.begin(), sims.end());
  double z_c = 0.0;
  for (double& v : sims) {
    v = std::exp(v - mx);
    z_c += v;
  }

  Vec probs(static_cast<std::size_t>(st.n_classes), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const double w = f_of(cand[i]) * (sims[i] / z_c);
    probs[static_cast<std::size_t>(st.train_y[cand[i]])] += w;
    z += w;
  }
  for (double& p : probs) p /= z;
  return probs;
}

Vec predict(const LBEState& st, std::span<const double> query_std, PredictMode mode,
            std::size_t k, std::optional<std::size_t> exclude_id) {
  return predict(st, make_pool_repr(st), query_std, mode, k, exclude_id);
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::string out = kMetricsHeader;
  out += "\n";
  char buf[256];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  m.epoch, m.loss_t, m.loss_s, m.loss_val, m.val_top1, m.alpha_t, m.alpha_s,
                  m.intra_a, m.inter_a);
    out += buf;
  }
  return out;
}

TrainResult train_lbe(const RunConfig& cfg, const Dataset& train, const Dataset& val,
                      const SnapshotHook& hook) {
  val.validate();
  if (val.dim() != train.dim()) throw ShapeError("train_lbe: train/val dims differ");

  TrainResult res;
  res.state = init_state(cfg, train);
  LBEState& st = res.state;
  const TrainRefs ctx = st.refs();
  const LossMode mode = cfg.loss_mode_enum();
  const std::size_t n = st.train_x.rows();
  const std::size_t n_val = val.size();
  const Matrix2D val_x = st.scaler.apply(val.features);
  const std::size_t bits = static_cast<std::size_t>(cfg.code_bits);

  Rng batching = Rng::stream(cfg.seed, "batching");
  Rng gumbel = Rng::stream(cfg.seed, "gumbel");

  if (hook) hook(0, st);

  double best_val = std::numeric_limits<double>::infinity();
  long best_epoch = 0;

  for (long epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr_t = cosine_lr(epoch - 1, cfg.epochs, cfg.t_lr);
    const double lr_s = cosine_lr(epoch - 1, cfg.epochs, cfg.s_lr);
    const double xi_t = cfg.xi_policy == "fixed" ? cfg.xi_t : lr_t;
    const double xi_s = cfg.xi_policy == "fixed" ? cfg.xi_s : lr_s;

    const auto batch = batching.sample_indices(n, static_cast<std::size_t>(cfg.batch_size));
    const auto val_rows =
        batching.sample_indices(n_val, static_cast<std::size_t>(cfg.batch_size));
    const PairList pairs = all_pairs(batch);

    // one logistic-noise draw per iteration, shared by every evaluation
    // inside it (keeps the FD quotients consistent)
    Matrix2D noise_t_train, noise_s_train, noise_t_val, noise_s_val;
    HashPlan plan;
    plan.temp = cfg.gumbel_temp;
    plan.hash_t = cfg.hash_t();
    plan.hash_s = cfg.hash_s();
    if (plan.hash_t) {
      noise_t_train = Matrix2D(n, bits);
      noise_t_val = Matrix2D(n_val, bits);
      for (double& v : noise_t_train.data()) v = gumbel.logistic();
      for (double& v : noise_t_val.data()) v = gumbel.logistic();
      plan.t_train = &noise_t_train;
      plan.t_query = &noise_t_val;
    }
    if (plan.hash_s) {
      noise_s_train = Matrix2D(n, bits);
      noise_s_val = Matrix2D(n_val, bits);
      for (double& v : noise_s_train.data()) v = gumbel.logistic();
      for (double& v : noise_s_val.data()) v = gumbel.logistic();
      plan.s_train = &noise_s_train;
      plan.s_query = &noise_s_val;
    }

    // (1) hypergradient step on A
    const HypergradReport hg =
        hypergrad_a(ctx, st.sim, st.siamese.encoder, st.match_enc(), pairs, batch, val_x,
                    val.labels, val_rows, xi_t, xi_s, mode, plan);
    st.sim.update(hg.grad_a, cfg.a_lr, cfg.a_wd);

    // (2) matching-network step at the refreshed virtual T'
    const SiameseLoss sl = loss_siamese(st.sim, st.siamese.encoder, cfg.tau, st.train_x, pairs,
                                        mode, plan);
    MlpParams t_prime = st.siamese.encoder;
    t_prime.flat = virtual_step(st.siamese.encoder.flat, sl.grad_t, xi_t);
    const KernelLoss ml = loss_matching(ctx, t_prime, st.match_enc(), batch, plan);
    sgd_momentum_step(st.match_enc_mut().flat, ml.grad_s, st.s_moment, lr_s, cfg.s_momentum,
                      cfg.s_wd);

    // (3) retriever step; the stage-1 gradient at the current A was already
    // computed above
    sgd_momentum_step(st.siamese.encoder.flat, sl.grad_t, st.t_moment, lr_t, cfg.t_momentum,
                      cfg.t_wd);

    st.epoch = epoch;

    EpochMetrics m;
    m.epoch = epoch;
    m.loss_t = sl.loss;
    m.loss_s = ml.loss;
    m.loss_val = hg.val_loss;
    m.alpha_t = hg.alpha_t;
    m.alpha_s = hg.alpha_s;
    const EvalResult ev =
        evaluate(st, val, cfg.predict_mode_enum(), static_cast<std::size_t>(cfg.predict_k), true);
    m.val_top1 = ev.top1;
    const auto [intra, inter] = intra_inter_means(st.sim, st.train_y);
    m.intra_a = intra;
    m.inter_a = inter;
    if (!std::isfinite(m.loss_t) || !std::isfinite(m.loss_s) || !std::isfinite(m.loss_val))
      throw NumericError("train_lbe: non-finite loss at epoch " + std::to_string(epoch) +
                         " (loss_T=" + std::to_string(m.loss_t) +
                         ", loss_S=" + std::to_string(m.loss_s) +
                         ", loss_val=" + std::to_string(m.loss_val) + ")");
    res.history.push_back(m);
    if (hook) hook(epoch, st);

    if (cfg.patience > 0) {
      if (hg.val_loss < best_val) {
        best_val = hg.val_loss;
        best_epoch = epoch;
      } else if (epoch - best_epoch >= cfg.patience) {
        break;
      }
    }
  }
  return res;
}

EvalResult evaluate(const LBEState& st, const Dataset& test, PredictMode mode, std::size_t k,
                    bool allow_self_match) {
  test.validate();
  if (test.dim() != st.scaler.mean.size())
    throw ShapeError("evaluate: feature dims do not match the trained state");
  const Matrix2D qx = st.scaler.apply(test.features);
  const PoolRepr pool = make_pool_repr(st);

  EvalResult r;
  std::vector<std::size_t> per_class_hits(static_cast<std::size_t>(st.n_classes), 0);
  std::vector<std::size_t> per_class_n(static_cast<std::size_t>(st.n_classes), 0);
  std::size_t hits = 0, hits5 = 0;
  double loss = 0.0;

  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::optional<std::size_t> excl =
        allow_self_match ? std::nullopt : std::optional<std::size_t>(test.ids[i]);
    const Vec probs = predict(st, pool, qx.row(i), mode, k, excl);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < probs.size(); ++c)
      if (probs[c] > probs[arg]) arg = c;
    const int y = test.labels[i];
    const bool hit = static_cast<int>(arg) == y;
    hits += hit;
    if (y < st.n_classes) {
      per_class_n[static_cast<std::size_t>(y)] += 1;
      per_class_hits[static_cast<std::size_t>(y)] += hit;
    }
    if (st.n_classes > 5) {
      std::vector<std::size_t> order(probs.size());
      for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return a < b;
      });
      for (std::size_t c = 0; c < 5 && c < order.size(); ++c)
        if (static_cast<int>(order[c]) == y) {
          ++hits5;
          break;
        }
    }
    loss += -std::log(std::max(y < static_cast<int>(probs.size()) ? probs[y] : 0.0, 1e-12));
  }

  r.top1 = static_cast<double>(hits) / static_cast<double>(test.size());
  if (st.n_classes > 5) r.top5 = static_cast<double>(hits5) / static_cast<double>(test.size());
  r.mean_loss = loss / static_cast<double>(test.size());
  r.per_class.resize(per_class_n.size(), 0.0);
  for (std::size_t c = 0; c < per_class_n.size(); ++c)
    if (per_class_n[c])
      r.per_class[c] =
          static_cast<double>(per_class_hits[c]) / static_cast<double>(per_class_n[c]);
  return r;
}

double run_episode(const RunConfig& cfg, const Episode& ep) {
  RunConfig c2 = cfg;
  c2.epochs = cfg.ep_epochs;
  c2.patience = 0;
  const TrainResult r = train_lbe(c2, ep.support, ep.query);
  const EvalResult ev = evaluate(r.state, ep.query, c2.predict_mode_enum(),
                                 static_cast<std::size_t>(c2.predict_k), true);
  return ev.top1;
}

}  // namespace lbe
