#include "lbe/networks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>

#include "lbe/rng.hpp"

namespace lbe {

namespace {
constexpr double kNormGuard = 1e-12;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_sim: length mismatch");
  const double na = std::max(vec_norm2(a), kNormGuard);
  const double nb = std::max(vec_norm2(b), kNormGuard);
  return vec_dot(a, b) / (na * nb);
}

void cosine_sim_backward(std::span<const double> a, std::span<const double> b, double g,
                         std::span<double> ga, std::span<double> gb) {
  const double na = std::max(vec_norm2(a), kNormGuard);
  const double nb = std::max(vec_norm2(b), kNormGuard);
  const double dot = vec_dot(a, b);
  const double inv = 1.0 / (na * nb);
  const double ca = dot / (na * na * na * nb);
  const double cb = dot / (na * nb * nb * nb);
  for (std::size_t k = 0; k < a.size(); ++k) {
    ga[k] += g * (b[k] * inv - a[k] * ca);
    gb[k] += g * (a[k] * inv - b[k] * cb);
  }
}

double siamese_prob(const SiameseNet& net, std::span<const double> xi,
                    std::span<const double> xj) {
  if (xi.size() != xj.size()) throw ShapeError("siamese_prob: feature dims differ");
  if (net.tau <= 0.0) throw RangeError("siamese_prob: tau must be positive");
  Matrix2D batch(2, xi.size());
  std::copy(xi.begin(), xi.end(), batch.row(0).begin());
  std::copy(xj.begin(), xj.end(), batch.row(1).begin());
  const Matrix2D e = mlp_forward(net.encoder, batch);
  return sigmoid(cosine_sim(e.row(0), e.row(1)) / net.tau);
}

Vec match_kernel(const MatchingNet& net, std::span<const double> query,
                 const Matrix2D& candidates) {
  if (candidates.rows() == 0) throw EmptyCandidatesError("match_kernel: no candidates");
  Matrix2D batch(candidates.rows() + 1, query.size());
  std::copy(query.begin(), query.end(), batch.row(0).begin());
  for (std::size_t i = 0; i < candidates.rows(); ++i) {
    const auto src = candidates.row(i);
    std::copy(src.begin(), src.end(), batch.row(i + 1).begin());
  }
  const Matrix2D e = mlp_forward(net.encoder, batch);
  Vec sims(candidates.rows());
  for (std::size_t i = 0; i < candidates.rows(); ++i)
    sims[i] = cosine_sim(e.row(0), e.row(i + 1));
  // stable softmax
  const double mx = *std::max_element(sims.begin(), sims.end());
  double z = 0.0;
  for (double& s : sims) {
    s = std::exp(s - mx);
    z += s;
  }
  for (double& s : sims) s /= z;
  return sims;
}

Matrix2D soft_bits(const Matrix2D& logits, const Matrix2D& noise, double temp) {
  if (!logits.same_shape(noise)) throw ShapeError("soft_bits: noise shape mismatch");
  if (temp <= 0.0) throw RangeError("soft_bits: temperature must be positive");
  Matrix2D out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.data().size(); ++i)
    out.data()[i] = sigmoid((logits.data()[i] + noise.data()[i]) / temp);
  return out;
}

double hamming_sim_soft(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("hamming_sim_soft: length mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] + b[k] - 2.0 * a[k] * b[k];
  return 1.0 - acc / static_cast<double>(a.size());
}

void hamming_sim_soft_backward(std::span<const double> a, std::span<const double> b, double g,
                               std::span<double> ga, std::span<double> gb) {
  const double s = -g / static_cast<double>(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ga[k] += s * (1.0 - 2.0 * b[k]);
    gb[k] += s * (1.0 - 2.0 * a[k]);
  }
}

BinaryCodebook encode_codes(const MlpParams& encoder, const Matrix2D& batch, double gumbel_temp,
                            std::uint64_t seed, bool hard, CodeMode mode) {
  if (gumbel_temp <= 0.0) throw RangeError("encode_codes: gumbel_temp must be positive");
  const Matrix2D logits = mlp_forward(encoder, batch);
  Matrix2D noise(logits.rows(), logits.cols(), 0.0);
  if (mode == CodeMode::kSampled) {
    Rng rng = Rng::stream(seed, "gumbel");
    for (double& v : noise.data()) v = rng.logistic();
  }
  BinaryCodebook book;
  book.bits = logits.cols();
  book.words_per_code = (book.bits + 63) / 64;
  book.soft = soft_bits(logits, noise, gumbel_temp);
  book.soft_probs = Matrix2D(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.data().size(); ++i)
    book.soft_probs.data()[i] = sigmoid(logits.data()[i]);
  book.words.assign(logits.rows() * book.words_per_code, 0u);
  book.hard = hard;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::uint64_t* w = book.words.data() + r * book.words_per_code;
    for (std::size_t k = 0; k < book.bits; ++k)
      if (book.soft.at(r, k) > 0.5) w[k / 64] |= 1ull << (k % 64);
  }
  return book;
}

double hamming_sim(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                   std::size_t bits) {
  if (a.size() != b.size()) throw ShapeError("hamming_sim: code length mismatch");
  if (bits == 0 || (bits + 63) / 64 != a.size())
    throw ShapeError("hamming_sim: bit count does not match code words");
  std::size_t diff = 0;
  for (std::size_t w = 0; w < a.size(); ++w)
    diff += static_cast<std::size_t>(std::popcount(a[w] ^ b[w]));
  return 1.0 - static_cast<double>(diff) / static_cast<double>(bits);
}

std::vector<std::size_t> retrieve_topk(const std::function<double(std::size_t)>& score,
                                       const std::vector<std::size_t>& candidate_ids,
                                       std::size_t k) {
  if (k == 0) throw RangeError("retrieve_topk: k must be >= 1");
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(candidate_ids.size());
  for (std::size_t id : candidate_ids) scored.push_back({score(id), id});
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  if (scored.size() > k) scored.resize(k);
  std::vector<std::size_t> ids;
  ids.reserve(scored.size());
  for (const auto& [s, id] : scored) ids.push_back(id);
  return ids;
}

void export_codebook(const BinaryCodebook& book, const std::vector<std::size_t>& ids,
                     std::ostream& out) {
  if (ids.size() != book.size()) throw ShapeError("export_codebook: id count mismatch");
  for (std::size_t r = 0; r < book.size(); ++r) {
    out << ids[r] << ",";
    for (std::size_t k = 0; k < book.bits; ++k) out << (book.bit(r, k) ? '1' : '0');
    out << "\n";
  }
}

}  // namespace lbe
