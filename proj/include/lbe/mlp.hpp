#pragma once

#include <vector>

#include "lbe/matrix.hpp"
#include "lbe/rng.hpp"

namespace lbe {

// Fully-connected network with tanh hidden layers and a linear output
// layer. Parameters live in one flat vector (per layer: row-major weight
// [out x in], then bias [out]) so optimizer steps, virtual updates and
// finite-difference perturbations are plain vector arithmetic.
struct MlpParams {
  std::vector<std::size_t> dims;  // dims[0] = input, dims.back() = output
  Vec flat;

  static MlpParams zeros(std::vector<std::size_t> dims);
  // Uniform init on +-sqrt(6 / (fan_in + fan_out)), drawn from `rng`.
  static MlpParams seeded(std::vector<std::size_t> dims, Rng& rng);

  std::size_t n_layers() const { return dims.size() - 1; }
  std::size_t in_dim() const { return dims.front(); }
  std::size_t out_dim() const { return dims.back(); }
  std::size_t n_params() const { return flat.size(); }

  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  std::span<const double> weight(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;
};

// Activations kept from a forward pass; acts[0] is the input batch,
// acts[l+1] the (post-activation) output of layer l.
struct MlpCache {
  std::vector<Matrix2D> acts;
  const Matrix2D& output() const { return acts.back(); }
};

// batch is [n x in_dim]; returns [n x out_dim]. Cache is optional.
Matrix2D mlp_forward(const MlpParams& params, const Matrix2D& batch, MlpCache* cache = nullptr);

struct MlpGrads {
  Vec params;       // same layout as MlpParams::flat
  Matrix2D inputs;  // gradient w.r.t. the input batch
};

// Gradients of sum(output .* grad_out) w.r.t. parameters and inputs.
MlpGrads mlp_backward(const MlpParams& params, const MlpCache& cache, const Matrix2D& grad_out);

}  // namespace lbe
