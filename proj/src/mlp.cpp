#include "lbe/mlp.hpp"

#include <cmath>

namespace lbe {

namespace {

std::size_t total_params(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw ShapeError("MlpParams: need at least one layer");
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] == 0 || dims[l + 1] == 0) throw ShapeError("MlpParams: zero layer width");
    n += dims[l + 1] * (dims[l] + 1);
  }
  return n;
}

}  // namespace

MlpParams MlpParams::zeros(std::vector<std::size_t> dims) {
  MlpParams p;
  p.flat.assign(total_params(dims), 0.0);
  p.dims = std::move(dims);
  return p;
}

MlpParams MlpParams::seeded(std::vector<std::size_t> dims, Rng& rng) {
  MlpParams p = zeros(std::move(dims));
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    const std::size_t fan_in = p.dims[l], fan_out = p.dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    double* w = p.flat.data() + p.weight_offset(l);
    for (std::size_t i = 0; i < fan_out * fan_in; ++i)
      w[i] = (2.0 * rng.uniform01() - 1.0) * bound;
    // biases stay zero
  }
  return p;
}

std::size_t MlpParams::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += dims[l + 1] * (dims[l] + 1);
  return off;
}

std::size_t MlpParams::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + dims[layer + 1] * dims[layer];
}

std::span<const double> MlpParams::weight(std::size_t layer) const {
  return {flat.data() + weight_offset(layer), dims[layer + 1] * dims[layer]};
}

std::span<const double> MlpParams::bias(std::size_t layer) const {
  return {flat.data() + bias_offset(layer), dims[layer + 1]};
}

Matrix2D mlp_forward(const MlpParams& params, const Matrix2D& batch, MlpCache* cache) {
  if (batch.cols() != params.in_dim())
    throw ShapeError("mlp_forward: batch width does not match input dim");
  if (params.flat.size() != [&] {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < params.dims.size(); ++l)
          n += params.dims[l + 1] * (params.dims[l] + 1);
        return n;
      }())
    throw ShapeError("mlp_forward: flat parameter size does not match dims");

  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(batch);
  }
  Matrix2D x = batch;
  const std::size_t n = batch.rows();
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    const std::size_t in = params.dims[l], out = params.dims[l + 1];
    const double* w = params.flat.data() + params.weight_offset(l);
    const double* b = params.flat.data() + params.bias_offset(l);
    Matrix2D z(n, out);
    for (std::size_t r = 0; r < n; ++r) {
      const auto xr = x.row(r);
      auto zr = z.row(r);
      for (std::size_t o = 0; o < out; ++o)
        zr[o] = b[o] + vec_dot(xr, {w + o * in, in});
    }
    const bool hidden = l + 1 < params.n_layers();
    if (hidden)
      for (double& v : z.data()) v = std::tanh(v);
    x = std::move(z);
    if (cache) cache->acts.push_back(x);
  }
  return x;
}

MlpGrads mlp_backward(const MlpParams& params, const MlpCache& cache, const Matrix2D& grad_out) {
  if (cache.acts.size() != params.n_layers() + 1)
    throw ShapeError("mlp_backward: cache does not match network depth");
  if (!grad_out.same_shape(cache.acts.back()))
    throw ShapeError("mlp_backward: grad_out shape does not match forward output");

  MlpGrads g;
  g.params.assign(params.flat.size(), 0.0);
  Matrix2D d = grad_out;  // gradient w.r.t. current layer output
  for (std::size_t li = params.n_layers(); li-- > 0;) {
    const std::size_t in = params.dims[li], out = params.dims[li + 1];
    const Matrix2D& x = cache.acts[li];
    const Matrix2D& y = cache.acts[li + 1];
    const bool hidden = li + 1 < params.n_layers();
    Matrix2D dz = std::move(d);
    if (hidden) {  // tanh'(z) = 1 - y^2
      for (std::size_t i = 0; i < dz.data().size(); ++i)
        dz.data()[i] *= 1.0 - y.data()[i] * y.data()[i];
    }
    double* gw = g.params.data() + params.weight_offset(li);
    double* gb = g.params.data() + params.bias_offset(li);
    const double* w = params.flat.data() + params.weight_offset(li);
    Matrix2D dx(x.rows(), in);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto xr = x.row(r);
      const auto dzr = dz.row(r);
      auto dxr = dx.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        const double dzo = dzr[o];
        gb[o] += dzo;
        vec_axpy(dzo, xr, {gw + o * in, in});
        vec_axpy(dzo, {w + o * in, in}, dxr);
      }
    }
    d = std::move(dx);
  }
  g.inputs = std::move(d);
  return g;
}

}  // namespace lbe
