#pragma once

#include <functional>
#include <optional>

#include "lbe/config.hpp"
#include "lbe/dataset.hpp"
#include "lbe/networks.hpp"
#include "lbe/similarity.hpp"

namespace lbe {

// Unordered train-position pairs, i < j.
using PairList = std::vector<std::pair<std::size_t, std::size_t>>;

PairList all_pairs(const std::vector<std::size_t>& ids);

// Differentiable-representation plan for the training losses. Hashed
// encoders emit soft Bernoulli-bit relaxations built from fixed logistic
// noise; sharing one noise draw across every evaluation inside an outer
// iteration keeps the finite-difference quotients consistent.
struct HashPlan {
  bool hash_t = false, hash_s = false;
  double temp = 0.5;
  const Matrix2D* t_train = nullptr;  // noise rows aligned with the train matrix
  const Matrix2D* s_train = nullptr;
  const Matrix2D* t_query = nullptr;  // noise rows aligned with the validation queries
  const Matrix2D* s_query = nullptr;

  static HashPlan none() { return {}; }
};

// Encoder outputs plus the representation pair similarities consume.
struct Repr {
  MlpCache cache;
  Matrix2D rep;
  bool hashed = false;
  double temp = 1.0;
};

// noise may be null (zero noise). `noise_rows` selects the noise rows when
// the encoded rows are a gather of a larger row set.
Repr encode_repr(const MlpParams& enc, const Matrix2D& rows, bool hashed, double temp,
                 const Matrix2D* noise, const std::vector<std::size_t>* noise_rows = nullptr);
// Chains d(loss)/d(rep) back to flat parameter gradients (accumulated).
void repr_backward(const MlpParams& enc, const Repr& r, const Matrix2D& grad_rep,
                   Vec& grad_params);

double pair_sim(const Repr& r, std::size_t i, std::size_t j);
void pair_sim_backward(const Repr& ra, std::size_t i, const Repr& rb, std::size_t j, double g,
                       Matrix2D& grad_a, Matrix2D& grad_b);

// --- stage losses ------------------------------------------------------

struct SiameseLoss {
  double loss = 0.0;
  Vec grad_t;   // flat encoder params
  Vec grad_a;   // dense over all stored A pairs; only touched pairs nonzero
  std::size_t clamped = 0;
};

// Pairwise similarity-matching loss over the given train pairs. BCE mode
// uses the full binary cross-entropy against A; literal mode keeps only
// the -A*log(f) term (retained for the documented degeneracy experiment).
SiameseLoss loss_siamese(const SimilarityMatrix& a, const MlpParams& t_enc, double tau,
                         const Matrix2D& train_x, const PairList& pairs, LossMode mode,
                         const HashPlan& plan);

struct KernelLoss {
  double loss = 0.0;
  Vec grad_t, grad_s;
  std::size_t clamped = 0;
};

// Shared setup for the matching/validation losses and prediction.
struct TrainRefs {
  const Matrix2D* train_x = nullptr;
  const std::vector<int>* train_y = nullptr;
  int n_classes = 0;
  double tau = 1.0;
  bool allow_self_match = false;
  PredictMode pmode = PredictMode::kSoft;
  std::size_t topk = 16;
};

// Mean cross-entropy of the normalized f*c label mixture over queries that
// are themselves training rows (each excludes itself unless allowed).
KernelLoss loss_matching(const TrainRefs& ctx, const MlpParams& t_enc, const MlpParams& s_enc,
                         const std::vector<std::size_t>& batch_ids, const HashPlan& plan);

// Same functional form with external queries and no self-exclusion.
KernelLoss loss_validation(const TrainRefs& ctx, const MlpParams& t_enc, const MlpParams& s_enc,
                           const Matrix2D& val_x, const std::vector<int>& val_y,
                           const std::vector<std::size_t>& val_rows, const HashPlan& plan);

// --- one-step updates and hypergradient --------------------------------

// Plain (momentum-free) single gradient step on a copy.
Vec virtual_step(const Vec& params, const Vec& grad, double xi);

struct FdHvpResult {
  Vec hvp;
  double alpha = 0.0;
  bool zero_direction = false;
};

// Symmetric finite-difference cross-Hessian-vector product:
// (grad_at(point + a*dir) - grad_at(point - a*dir)) / (2a), a = 0.01/||dir||.
// Directions below 1e-12 in norm short-circuit to zero and are flagged.
FdHvpResult fd_cross_hvp(const Vec& point, const Vec& direction, std::size_t out_size,
                         const std::function<Vec(const Vec&)>& grad_at);

// d/dS of grad_{T'}(matching loss), contracted with `direction`.
FdHvpResult fd_hvp_ts(const TrainRefs& ctx, const MlpParams& t_prime, const MlpParams& s_enc,
                      const std::vector<std::size_t>& batch_ids, const HashPlan& plan,
                      const Vec& direction);

// d/dT of grad_A(siamese loss), contracted with `direction`.
FdHvpResult fd_hvp_at(const TrainRefs& ctx, const SimilarityMatrix& a, const MlpParams& t_enc,
                      const PairList& pairs, LossMode mode, const HashPlan& plan,
                      const Vec& direction);

struct HypergradReport {
  Vec grad_a;  // d(val loss)/d(A entries), dense over stored pairs
  double alpha_t = 0.0, alpha_s = 0.0;
  double val_grad_t_norm = 0.0, val_grad_s_norm = 0.0;
  bool zero_dir_t = false, zero_dir_s = false;
  double siamese_loss = 0.0, match_loss = 0.0, val_loss = 0.0;
  std::size_t clamped = 0;
};

// Full composition: virtual steps of T and S, validation gradients at the
// virtual point, and the two finite-difference cross-Hessian products.
HypergradReport hypergrad_a(const TrainRefs& ctx, const SimilarityMatrix& a,
                            const MlpParams& t_enc, const MlpParams& s_enc,
                            const PairList& pairs, const std::vector<std::size_t>& batch_ids,
                            const Matrix2D& val_x, const std::vector<int>& val_y,
                            const std::vector<std::size_t>& val_rows, double xi_t, double xi_s,
                            LossMode mode, const HashPlan& plan);

// --- state, training loop, evaluation -----------------------------------

struct LBEState {
  RunConfig cfg;
  Standardizer scaler;
  SiameseNet siamese;
  MatchingNet matching;
  SimilarityMatrix sim{1};
  MomentumState t_moment, s_moment;
  long epoch = 0;

  // standardized training pool kept for prediction and state files
  Matrix2D train_x;
  std::vector<int> train_y;
  std::vector<std::size_t> train_ids;
  int n_classes = 0;

  const MlpParams& match_enc() const {
    return matching.tied ? siamese.encoder : matching.encoder;
  }
  MlpParams& match_enc_mut() { return matching.tied ? siamese.encoder : matching.encoder; }
  TrainRefs refs() const;
};

LBEState init_state(const RunConfig& cfg, const Dataset& train);

// Inference-time representation of the training pool (hard codes for the
// hashed variants, embeddings otherwise).
struct PoolRepr {
  Matrix2D t_emb, s_emb;
  BinaryCodebook t_codes, s_codes;
  bool hash_t = false, hash_s = false;
};

PoolRepr make_pool_repr(const LBEState& st);

// Class distribution for one standardized query row. exclude_id removes the
// pool row carrying that global id (stage-2 self-match guard).
Vec predict(const LBEState& st, const PoolRepr& pool, std::span<const double> query_std,
            PredictMode mode, std::size_t k, std::optional<std::size_t> exclude_id);
Vec predict(const LBEState& st, std::span<const double> query_std, PredictMode mode,
            std::size_t k, std::optional<std::size_t> exclude_id);

struct EpochMetrics {
  long epoch = 0;
  double loss_t = 0, loss_s = 0, loss_val = 0, val_top1 = 0;
  double alpha_t = 0, alpha_s = 0;
  double intra_a = 0, inter_a = 0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,loss_T,loss_S,loss_val,val_top1,alpha_T,alpha_S,intra_A_mean,inter_A_mean";

std::string metrics_csv(const std::vector<EpochMetrics>& history);

// Mean A over same-class and different-class train pairs.
std::pair<double, double> intra_inter_means(const SimilarityMatrix& a,
                                            const std::vector<int>& labels);

using SnapshotHook = std::function<void(long epoch, const LBEState&)>;

struct TrainResult {
  LBEState state;
  std::vector<EpochMetrics> history;
};

// The outer loop: per epoch, (1) hypergradient Adam step on A, (2) momentum
// SGD step on S at the refreshed virtual T', (3) momentum SGD step on T.
TrainResult train_lbe(const RunConfig& cfg, const Dataset& train, const Dataset& val,
                      const SnapshotHook& hook = {});

struct EvalResult {
  double top1 = 0.0;
  double top5 = -1.0;  // only emitted when the pool has more than 5 classes
  std::vector<double> per_class;
  double mean_loss = 0.0;
};

// Evaluates `test` against the state's training pool. Exclusion matches
// global ids, so passing the training set itself supports leave-one-out.
EvalResult evaluate(const LBEState& st, const Dataset& test, PredictMode mode, std::size_t k,
                    bool allow_self_match);

// Support set plays the training role, query set the validation role; the
// returned value is final query accuracy under the inference path.
double run_episode(const RunConfig& cfg, const Episode& ep);

}  // namespace lbe
