// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <functional>

#include "mdps/nn/layers.hpp"
#include "mdps/nn/optim.hpp"
#include "test_support.hpp"

using namespace mdps;
using nn::Tensor;

namespace {

// Scalar probe loss L = sum(w . f(...)) with fixed random w; FD on a sampled
// subset of coordinates against the analytic gradient.
void check_grad_subset(std::vector<float>& storage, const std::vector<float>& analytic,
                       const std::function<double()>& loss, Rng& rng, int probes,
                       double tol = 0.03, double h = 1e-2) {
  REQUIRE(storage.size() == analytic.size());
  for (int p = 0; p < probes; ++p) {
    const std::size_t i =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(storage.size()) - 1));
    const float keep = storage[i];
    storage[i] = keep + static_cast<float>(h);
    const double up = loss();
    storage[i] = keep - static_cast<float>(h);
    const double dn = loss();
    storage[i] = keep;
    const double fd = (up - dn) / (2.0 * h);
    const double an = analytic[i];
    const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
    INFO("coordinate ", i, " fd=", fd, " analytic=", an);
    CHECK(err < tol);
  }
}

double weighted_sum(const ImageTensor& y, const ImageTensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y.data[i]) * w.data[i];
  return s;
}

}  // namespace

TEST_CASE("Conv2d forward matches direct convolution") {
  Rng rng(1);
  nn::Conv2d conv(2, 3, 3, 1);
  conv.init_he(rng);
  for (auto& b : conv.b.v) b = rng.normal_f() * 0.1f;
  ImageTensor x = test::random_image(rng, 2, 5, 6);
  ImageTensor y = conv.forward(x);
  REQUIRE(y.channels == 3);
  REQUIRE(y.height == 5);
  REQUIRE(y.width == 6);
  // direct evaluation at a few positions
  for (auto [oc, oy, ox] : {std::tuple{0, 0, 0}, std::tuple{2, 4, 5}, std::tuple{1, 2, 3}}) {
    double acc = conv.b.v[static_cast<std::size_t>(oc)];
    for (int ic = 0; ic < 2; ++ic) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int iy = oy - 1 + ky, ix = ox - 1 + kx;
          if (iy < 0 || iy >= 5 || ix < 0 || ix >= 6) continue;
          acc += static_cast<double>(
                     conv.w.v[((static_cast<std::size_t>(oc) * 2 + ic) * 3 + ky) * 3 + kx]) *
                 x.at(ic, iy, ix);
        }
      }
    }
    CHECK(y.at(oc, oy, ox) == doctest::Approx(acc).epsilon(1e-4));
  }
}

TEST_CASE("Conv2d backward: input and parameter gradients match FD") {
  for (int stride : {1, 2}) {
    CAPTURE(stride);
    Rng rng(2 + stride);
    nn::Conv2d conv(3, 4, 3, stride);
    conv.init_he(rng);
    ImageTensor x = test::random_image(rng, 3, 8, 8);
    ImageTensor w = test::random_image(rng, 4, conv.out_h(8), conv.out_w(8));

    auto loss = [&]() { return weighted_sum(conv.forward(x), w); };

    Tensor dw = Tensor::zeros_like(conv.w);
    Tensor db = Tensor::zeros_like(conv.b);
    ImageTensor dx = conv.backward(x, w, &dw, &db, true);

    check_grad_subset(x.data, dx.data, loss, rng, 20);
    check_grad_subset(conv.w.v, dw.v, loss, rng, 20);
    check_grad_subset(conv.b.v, db.v, loss, rng, 4);
  }
}

TEST_CASE("Linear backward matches FD") {
  Rng rng(5);
  nn::Linear fc(6, 4);
  fc.init_he(rng);
  std::vector<float> x(6), w(4);
  for (auto& v : x) v = rng.normal_f();
  for (auto& v : w) v = rng.normal_f();

  auto loss = [&]() {
    auto y = fc.forward(x);
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += static_cast<double>(y[static_cast<std::size_t>(i)]) * w[static_cast<std::size_t>(i)];
    return s;
  };
  Tensor dw = Tensor::zeros_like(fc.w);
  Tensor db = Tensor::zeros_like(fc.b);
  std::vector<float> dx = fc.backward(x, w, &dw, &db, true);
  check_grad_subset(x, dx, loss, rng, 6);
  check_grad_subset(fc.w.v, dw.v, loss, rng, 12);
  check_grad_subset(fc.b.v, db.v, loss, rng, 4);
}

TEST_CASE("GroupNorm forward normalizes and backward matches FD") {
  Rng rng(6);
  nn::GroupNorm gn(8, 4);
  for (auto& g : gn.gamma.v) g = 1.0f + 0.3f * rng.normal_f();
  for (auto& b : gn.beta.v) b = 0.2f * rng.normal_f();
  ImageTensor x = test::random_image(rng, 8, 4, 4, 2.0f);
  ImageTensor w = test::random_image(rng, 8, 4, 4);

  auto loss = [&]() { return weighted_sum(gn.forward(x), w); };
  Tensor dg = Tensor::zeros_like(gn.gamma);
  Tensor db = Tensor::zeros_like(gn.beta);
  ImageTensor dx = gn.backward(x, w, &dg, &db);
  check_grad_subset(x.data, dx.data, loss, rng, 20, 0.03, 1e-2);
  check_grad_subset(gn.gamma.v, dg.v, loss, rng, 8);
  check_grad_subset(gn.beta.v, db.v, loss, rng, 8);

  // per-group unit statistics with identity affine
  nn::GroupNorm plain(8, 4);
  ImageTensor n = plain.forward(x);
  const std::size_t group_elems = 2 * 16;
  for (int g = 0; g < 4; ++g) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < group_elems; ++i) {
      const float v = n.data[static_cast<std::size_t>(g) * group_elems + i];
      sum += v;
      sq += static_cast<double>(v) * v;
    }
    CHECK(sum / group_elems == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(sq / group_elems == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("SiLU backward matches FD") {
  Rng rng(7);
  ImageTensor x = test::random_image(rng, 2, 4, 4, 2.0f);
  ImageTensor w = test::random_image(rng, 2, 4, 4);
  auto loss = [&]() { return weighted_sum(nn::silu(x), w); };
  ImageTensor dx = nn::silu_backward(x, w);
  check_grad_subset(x.data, dx.data, loss, rng, 16, 0.02, 1e-3);
}

TEST_CASE("upsample_nearest2x backward sums the 2x2 blocks") {
  Rng rng(8);
  ImageTensor x = test::random_image(rng, 2, 3, 3);
  ImageTensor y = nn::upsample_nearest2x(x);
  REQUIRE(y.height == 6);
  CHECK(y.at(1, 5, 5) == x.at(1, 2, 2));
  ImageTensor dy = test::random_image(rng, 2, 6, 6);
  ImageTensor dx = nn::upsample_nearest2x_backward(dy);
  double expect = dy.at(0, 2, 2) + dy.at(0, 2, 3) + dy.at(0, 3, 2) + dy.at(0, 3, 3);
  CHECK(dx.at(0, 1, 1) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("sinusoidal embedding is bounded and distinguishes timesteps") {
  auto e1 = nn::sinusoidal_embedding(1, 64);
  auto e2 = nn::sinusoidal_embedding(999, 64);
  REQUIRE(e1.size() == 64);
  double diff = 0.0;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    CHECK(std::abs(e1[i]) <= 1.0f + 1e-6f);
    diff += std::abs(e1[i] - e2[i]);
  }
  CHECK(diff > 1.0);
  CHECK_THROWS_AS(nn::sinusoidal_embedding(1, 63), std::invalid_argument);
}

TEST_CASE("SelfAttention2d backward matches FD") {
  Rng rng(9);
  nn::SelfAttention2d attn(4);
  attn.init(rng);
  // non-zero proj so the gradient actually flows
  for (auto& v : attn.proj.w.v) v = 0.3f * rng.normal_f();
  ImageTensor x = test::random_image(rng, 4, 3, 3);
  ImageTensor w = test::random_image(rng, 4, 3, 3);

  auto loss = [&]() {
    nn::SelfAttention2d::Ctx ctx;
    return weighted_sum(attn.forward(x, &ctx), w);
  };

  nn::SelfAttention2d::Ctx ctx;
  attn.forward(x, &ctx);
  nn::SelfAttention2d::Grads g;
  g.init(attn);
  ImageTensor dx = attn.backward(w, ctx, &g);

  check_grad_subset(x.data, dx.data, loss, rng, 16, 0.04);
  check_grad_subset(attn.q.w.v, g.q_w.v, loss, rng, 8, 0.04);
  check_grad_subset(attn.v.w.v, g.v_w.v, loss, rng, 8, 0.04);
  check_grad_subset(attn.norm.gamma.v, g.norm_gamma.v, loss, rng, 4, 0.04);
}

TEST_CASE("AdamW with zero lr leaves parameters unchanged") {
  Rng rng(10);
  nn::Linear fc(4, 4);
  fc.init_he(rng);
  const std::vector<float> before = fc.w.v;

  std::vector<ParamRef> params = {{"w", &fc.w}, {"b", &fc.b}};
  GradBuffer gb;
  gb.init(params);
  for (auto& g : gb.grads) {
    for (auto& v : g.v) v = rng.normal_f();
  }
  nn::AdamW opt;
  opt.lr = 0.0;
  opt.weight_decay = 0.05;
  opt.init(params);
  opt.step(params, gb);
  CHECK(fc.w.v == before);
}

TEST_CASE("AdamW descends a quadratic") {
  // minimize ||w - target||^2 by gradient steps
  nn::Tensor w({8}, 0.0f);
  std::vector<float> target(8);
  Rng rng(11);
  for (auto& t : target) t = rng.normal_f();

  std::vector<ParamRef> params = {{"w", &w}};
  nn::AdamW opt;
  opt.lr = 0.05;
  opt.weight_decay = 0.0;
  opt.init(params);
  GradBuffer gb;
  gb.init(params);
  for (int it = 0; it < 400; ++it) {
    for (std::size_t i = 0; i < 8; ++i) gb.grads[0].v[i] = 2.0f * (w.v[i] - target[i]);
    opt.step(params, gb);
  }
  for (std::size_t i = 0; i < 8; ++i) CHECK(w.v[i] == doctest::Approx(target[i]).epsilon(0.02));
}
