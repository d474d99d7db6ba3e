#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "lbe/mlp.hpp"

namespace lbe {

// Pair-similarity retriever: f(x_i, x_j) = sigmoid(cos(e_i, e_j) / tau)
// with e = encoder(x). Larger tau flattens f toward 0.5.
struct SiameseNet {
  MlpParams encoder;
  double tau = 1.0;
};

// Kernel network for label matching: softmax over cosine similarities of
// its encoder's embeddings. When `tied` the owning state routes all
// encoder access to the Siamese encoder, so both nets always see identical
// parameter values.
struct MatchingNet {
  MlpParams encoder;
  bool tied = false;
};

// epsilon-guarded cosine; never divides by zero.
double cosine_sim(std::span<const double> a, std::span<const double> b);
// Accumulates d(cos)/da into ga and d(cos)/db into gb, scaled by g.
void cosine_sim_backward(std::span<const double> a, std::span<const double> b, double g,
                         std::span<double> ga, std::span<double> gb);

double siamese_prob(const SiameseNet& net, std::span<const double> xi,
                    std::span<const double> xj);

// Normalized kernel weights over the candidate rows: softmax of cosine
// between the query embedding and each candidate embedding.
Vec match_kernel(const MatchingNet& net, std::span<const double> query,
                 const Matrix2D& candidates);

// --- binary-code fast path -------------------------------------------------

// Soft relaxation of Bernoulli bit sampling: sigmoid((logit + noise)/temp).
// `noise` is standard-logistic per element for sampling, or zero for
// deterministic thresholding. Shares one formula between training losses
// and codebook construction.
Matrix2D soft_bits(const Matrix2D& logits, const Matrix2D& noise, double temp);

// Soft Hamming similarity 1 - mean(a + b - 2ab); equals 1 - hamming/b on
// {0,1} vectors and is differentiable on (0,1) relaxations.
double hamming_sim_soft(std::span<const double> a, std::span<const double> b);
void hamming_sim_soft_backward(std::span<const double> a, std::span<const double> b, double g,
                               std::span<double> ga, std::span<double> gb);

struct BinaryCodebook {
  std::size_t bits = 0;
  std::size_t words_per_code = 0;
  bool hard = true;                  // which view is canonical: packed codes or `soft`
  std::vector<std::uint64_t> words;  // packed, codebook row-major
  Matrix2D soft_probs;               // sigmoid(logits), kept for gradients
  Matrix2D soft;                     // relaxed bits actually sampled

  std::size_t size() const { return bits ? words.size() / words_per_code : 0; }
  std::span<const std::uint64_t> code(std::size_t i) const {
    return {words.data() + i * words_per_code, words_per_code};
  }
  bool bit(std::size_t i, std::size_t k) const {
    return (code(i)[k / 64] >> (k % 64)) & 1u;
  }
};

enum class CodeMode { kSampled, kThresholded };

// Encodes batch rows to `encoder.out_dim()` bits. kSampled draws each bit
// from Bernoulli(sigmoid(logit)) via logistic noise; kThresholded takes
// logit > 0. hard=true stores {0,1} codes whose gradient path is the soft
// relaxation kept in `soft`; hard=false packs round(soft) as well but the
// soft values are the intended output.
BinaryCodebook encode_codes(const MlpParams& encoder, const Matrix2D& batch, double gumbel_temp,
                            std::uint64_t seed, bool hard, CodeMode mode = CodeMode::kSampled);

// 1 - popcount(a xor b)/bits on packed codes.
double hamming_sim(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                   std::size_t bits);

// Ids of the k highest-scoring candidates, descending score, ties broken by
// ascending id. k beyond the candidate count returns everything.
std::vector<std::size_t> retrieve_topk(const std::function<double(std::size_t)>& score,
                                       const std::vector<std::size_t>& candidate_ids,
                                       std::size_t k);

// One line per example: "id,bitstring" with `bits` characters of 0/1.
void export_codebook(const BinaryCodebook& book, const std::vector<std::size_t>& ids,
                     std::ostream& out);

}  // namespace lbe
