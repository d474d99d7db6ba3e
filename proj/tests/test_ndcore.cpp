#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "lbe/grad_check.hpp"
#include "lbe/mlp.hpp"
#include "lbe/optim.hpp"
#include "lbe/rng.hpp"

using namespace lbe;

namespace {

// Independent forward pass: plain nested loops, no shared code with
// mlp_forward beyond the parameter layout accessors.
Matrix2D naive_forward(const MlpParams& p, const Matrix2D& batch) {
  Matrix2D x = batch;
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    const std::size_t in = p.dims[l], out = p.dims[l + 1];
    Matrix2D z(x.rows(), out);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t o = 0; o < out; ++o) {
        double acc = p.bias(l)[o];
        for (std::size_t i = 0; i < in; ++i) acc += p.weight(l)[o * in + i] * x.at(r, i);
        z.at(r, o) = l + 1 < p.n_layers() ? std::tanh(acc) : acc;
      }
    x = z;
  }
  return x;
}

}  // namespace

TEST_CASE("matrix basics and shape errors") {
  Matrix2D a = Matrix2D::from_rows({{1, 2}, {3, 4}, {5, 6}});
  Matrix2D b = Matrix2D::from_rows({{1, 0, 1}, {0, 1, 1}});
  const Matrix2D c = matmul(a, b);
  CHECK(c.rows() == 3);
  CHECK(c.cols() == 3);
  CHECK(c.at(0, 2) == doctest::Approx(3.0));
  CHECK_THROWS_AS(matmul(b, b), ShapeError);
  CHECK_THROWS_AS(a.at(3, 0), RangeError);

  const Matrix2D bt = transpose(b);
  const Matrix2D c2 = matmul_transb(a, bt);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(c2.at(i, j) == doctest::Approx(matmul(a, b).at(i, j)));
}

TEST_CASE("mlp forward: zero weights give the output bias") {
  MlpParams p = MlpParams::zeros({3, 4, 2});
  p.flat[p.bias_offset(1) + 0] = 0.25;
  p.flat[p.bias_offset(1) + 1] = -1.5;
  Matrix2D batch(5, 3);
  Rng rng(1);
  for (double& v : batch.data()) v = rng.normal();
  const Matrix2D out = mlp_forward(p, batch);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(out.at(r, 0) == doctest::Approx(0.25));
    CHECK(out.at(r, 1) == doctest::Approx(-1.5));
  }
}

TEST_CASE("mlp forward: identity single layer returns the batch") {
  MlpParams p = MlpParams::zeros({3, 3});
  for (std::size_t i = 0; i < 3; ++i) p.flat[p.weight_offset(0) + i * 3 + i] = 1.0;
  Matrix2D batch = Matrix2D::from_rows({{1, 2, 3}, {-4, 0, 2.5}});
  const Matrix2D out = mlp_forward(p, batch);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(out.at(r, c) == batch.at(r, c));
}

TEST_CASE("mlp forward matches an independent re-evaluation") {
  Rng rng(42);
  const MlpParams p = MlpParams::seeded({4, 6, 3}, rng);
  Matrix2D batch(3, 4);
  for (double& v : batch.data()) v = rng.normal();
  const Matrix2D got = mlp_forward(p, batch);
  const Matrix2D want = naive_forward(p, batch);
  REQUIRE(got.same_shape(want));
  for (std::size_t i = 0; i < got.data().size(); ++i)
    CHECK(got.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
}

TEST_CASE("mlp forward rejects bad batch width") {
  Rng rng(1);
  const MlpParams p = MlpParams::seeded({4, 2}, rng);
  CHECK_THROWS_AS(mlp_forward(p, Matrix2D(2, 3)), ShapeError);
}

TEST_CASE("mlp backward: zero grad_out gives zero gradients") {
  Rng rng(5);
  const MlpParams p = MlpParams::seeded({3, 5, 2}, rng);
  Matrix2D batch(4, 3);
  for (double& v : batch.data()) v = rng.normal();
  MlpCache cache;
  mlp_forward(p, batch, &cache);
  const MlpGrads g = mlp_backward(p, cache, Matrix2D(4, 2, 0.0));
  for (double v : g.params) CHECK(v == 0.0);
  for (double v : g.inputs.data()) CHECK(v == 0.0);
}

TEST_CASE("mlp backward: single linear layer weight grad is G^T X") {
  Rng rng(6);
  const MlpParams p = MlpParams::seeded({3, 2}, rng);
  Matrix2D batch(4, 3), g_out(4, 2);
  for (double& v : batch.data()) v = rng.normal();
  for (double& v : g_out.data()) v = rng.normal();
  MlpCache cache;
  mlp_forward(p, batch, &cache);
  const MlpGrads g = mlp_backward(p, cache, g_out);
  const Matrix2D want = matmul(transpose(g_out), batch);  // [out x in]
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(g.params[p.weight_offset(0) + o * 3 + i] ==
            doctest::Approx(want.at(o, i)).epsilon(1e-12));
}

TEST_CASE("mlp backward passes a central finite-difference check") {
  Rng rng(7);
  const MlpParams net = MlpParams::seeded({3, 6, 4}, rng);
  Matrix2D batch(3, 3), g_out(3, 4);
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
  CHECK(err < 1e-5);
}

TEST_CASE("mlp input gradients pass finite differences") {
  Rng rng(8);
  const MlpParams net = MlpParams::seeded({3, 5, 2}, rng);
  Matrix2D batch(2, 3), g_out(2, 2);
  for (double& v : batch.data()) v = rng.normal();
  for (double& v : g_out.data()) v = rng.normal();
  const double err = grad_check(
      [&](const Vec& flat_in, Vec* g) {
        Matrix2D b2(2, 3);
        b2.data() = flat_in;
        MlpCache cache;
        const Matrix2D out = mlp_forward(net, b2, &cache);
        double l = 0.0;
        for (std::size_t i = 0; i < out.data().size(); ++i)
          l += out.data()[i] * g_out.data()[i];
        if (g) *g = mlp_backward(net, cache, g_out).inputs.data();
        return l;
      },
      batch.data(), 1e-6);
  CHECK(err < 1e-5);
}

TEST_CASE("forward/backward stay finite on random nets") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const MlpParams p = MlpParams::seeded({5, 9, 7, 3}, rng);
    Matrix2D batch(6, 5), g_out(6, 3);
    for (double& v : batch.data()) v = 3.0 * rng.normal();
    for (double& v : g_out.data()) v = rng.normal();
    MlpCache cache;
    const Matrix2D out = mlp_forward(p, batch, &cache);
    CHECK(out.all_finite());
    const MlpGrads g = mlp_backward(p, cache, g_out);
    CHECK(vec_all_finite(g.params));
    CHECK(g.inputs.all_finite());
  }
}

TEST_CASE("sgd momentum: no-op and plain-step cases") {
  Vec p{1.0};
  MomentumState st;
  sgd_momentum_step(p, Vec{0.0}, st, 0.1, 0.9, 0.0);
  CHECK(p[0] == 1.0);

  Vec p2{1.0};
  MomentumState st2;
  sgd_momentum_step(p2, Vec{2.0}, st2, 0.1, 0.0, 0.0);
  CHECK(p2[0] == doctest::Approx(0.8));
}

TEST_CASE("sgd momentum matches a hand-unrolled recurrence") {
  // p0=1, constant grad 2, lr 0.1, momentum 0.9:
  //   v1 = 2, p1 = 0.8; v2 = 0.9*2 + 2 = 3.8, p2 = 0.8 - 0.38 = 0.42
  Vec p{1.0};
  MomentumState st;
  sgd_momentum_step(p, Vec{2.0}, st, 0.1, 0.9, 0.0);
  CHECK(p[0] == doctest::Approx(0.8).epsilon(1e-15));
  sgd_momentum_step(p, Vec{2.0}, st, 0.1, 0.9, 0.0);
  CHECK(p[0] == doctest::Approx(0.42).epsilon(1e-15));
}

TEST_CASE("sgd momentum: weight decay enters the velocity") {
  Vec p{2.0};
  MomentumState st;
  sgd_momentum_step(p, Vec{0.0}, st, 0.1, 0.9, 0.5);
  // v = 0 + (0 + 0.5*2) = 1; p = 2 - 0.1
  CHECK(p[0] == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("adam: zero grad with fresh state leaves params unchanged") {
  Vec p{1.5, -2.0};
  AdamState st;
  adam_step(p, Vec{0.0, 0.0}, st, 1e-3, 0.0);
  CHECK(p[0] == 1.5);
  CHECK(p[1] == -2.0);
  CHECK(st.step == 1);
}

TEST_CASE("adam first step matches the scalar recurrence") {
  // m=0.1, v=1e-3, mhat=1, vhat=1 -> p = -lr/(1+eps)
  Vec p{0.0};
  AdamState st;
  adam_step(p, Vec{1.0}, st, 1e-3, 0.0);
  const double expect = -1e-3 * (1.0 / (1.0 + 1e-8));
  CHECK(p[0] == doctest::Approx(expect).epsilon(1e-12));

  // independent scalar recurrence for three more steps
  double m = 0.1, v = 1e-3, q = expect;
  for (int t = 2; t <= 4; ++t) {
    m = 0.9 * m + 0.1 * 1.0;
    v = 0.999 * v + 0.001 * 1.0;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    q -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
    adam_step(p, Vec{1.0}, st, 1e-3, 0.0);
    CHECK(p[0] == doctest::Approx(q).epsilon(1e-12));
  }
}

TEST_CASE("optimizer steps are bit-deterministic") {
  Rng rng(9);
  Vec p(16), g(16);
  for (double& v : p) v = rng.normal();
  for (double& v : g) v = rng.normal();

  Vec p1 = p, p2 = p;
  AdamState a1, a2;
  MomentumState m1, m2;
  for (int i = 0; i < 5; ++i) {
    adam_step(p1, g, a1, 1e-3, 1e-3);
    adam_step(p2, g, a2, 1e-3, 1e-3);
    sgd_momentum_step(p1, g, m1, 0.01, 0.9, 3e-4);
    sgd_momentum_step(p2, g, m2, 0.01, 0.9, 3e-4);
  }
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p1[i] == p2[i]);
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(cosine_lr(0, 100, 0.01) == doctest::Approx(0.01));
  CHECK(cosine_lr(100, 100, 0.01) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_lr(50, 100, 0.01) == doctest::Approx(0.005));
  CHECK_THROWS_AS(cosine_lr(101, 100, 0.01), RangeError);
}

TEST_CASE("grad_check is exact for quadratics and flags bad gradients") {
  Rng rng(10);
  Vec p(8);
  for (double& v : p) v = rng.normal();
  const LossFn quad = [](const Vec& q, Vec* g) {
    double l = 0.0;
    for (double v : q) l += 0.5 * v * v;
    if (g) *g = q;
    return l;
  };
  CHECK(grad_check(quad, p, 1e-5) < 1e-8);

  // mutation: a sign error in one coordinate must be caught
  const LossFn broken = [](const Vec& q, Vec* g) {
    double l = 0.0;
    for (double v : q) l += 0.5 * v * v;
    if (g) {
      *g = q;
      (*g)[0] = -(*g)[0];
    }
    return l;
  };
  CHECK(grad_check(broken, p, 1e-5) > 0.1);
}

TEST_CASE("grad_check rejects non-finite losses") {
  CHECK_THROWS_AS(grad_check([](const Vec&, Vec* g) {
                    if (g) g->assign(1, 0.0);
                    return std::numeric_limits<double>::quiet_NaN();
                  },
                  Vec{1.0}, 1e-5),
                  NumericError);
}
