// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "mdps/schedule.hpp"
#include "test_support.hpp"

using namespace mdps;

TEST_CASE("ImageTensor validation") {
  ImageTensor img(3, 4, 5, ValueRange::Unit, 0.5f);
  CHECK_NOTHROW(img.validate());

  img.data[7] = 1.5f;
  CHECK_THROWS_AS(img.validate(), std::invalid_argument);

  img.data[7] = 0.5f;
  img.data[3] = std::nanf("");
  CHECK_THROWS_AS(img.validate(), std::invalid_argument);

  CHECK_THROWS_AS(ImageTensor(0, 4, 4), std::invalid_argument);

  // range slack: 1e-6 over the bound is tolerated
  ImageTensor edge(1, 1, 1, ValueRange::Unit, 1.0f + 5e-7f);
  CHECK_NOTHROW(edge.validate());

  // free-range tensors skip the bound check
  ImageTensor latent(1, 2, 2, ValueRange::Free, 7.5f);
  CHECK_NOTHROW(latent.validate());
}

TEST_CASE("range conversions invert each other") {
  Rng rng(11);
  ImageTensor unit = test::random_unit_image(rng, 3, 6, 6);
  ImageTensor model = to_model_range(unit);
  CHECK(model.range == ValueRange::Model);
  CHECK_NOTHROW(model.validate());
  ImageTensor back = to_unit_range(model);
  CHECK(test::max_abs_diff(unit, back) < 1e-6);
}

TEST_CASE("MaskImage entries must be binary") {
  MaskImage m(3, 3, 1);
  CHECK_NOTHROW(m.validate());
  m.data[4] = 2;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  CHECK(MaskImage::ones(2, 2).count_ones() == 4);
  CHECK(MaskImage::zeros(2, 2).count_ones() == 0);
}

TEST_CASE("build_schedule basic values") {
  // single-factor product
  NoiseSchedule one = build_schedule(1, 0.5, 0.5);
  CHECK(one.alpha_bar(1) == doctest::Approx(0.5).epsilon(1e-12));
  // empty-product convention
  CHECK(one.alpha_bar(0) == 1.0);
  // hand product 0.5 * 0.5
  NoiseSchedule two = build_schedule(2, 0.5, 0.5);
  CHECK(two.alpha_bar(2) == doctest::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(build_schedule(10, 0.0, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(build_schedule(10, 0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_schedule(10, 0.3, 0.2), std::invalid_argument);
}

TEST_CASE("schedule monotonicity and recurrence over random parameters") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    int t_max = 1 + static_cast<int>(rng.uniform_int(0, 499));
    double b0 = 1e-5 + 0.01 * rng.uniform();
    double b1 = b0 + 0.05 * rng.uniform();
    NoiseSchedule s = build_schedule(t_max, b0, b1);
    CHECK_NOTHROW(s.validate());
    for (int t = 1; t <= t_max; ++t) {
      CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
      CHECK(s.alpha_bar(t) > 0.0);
    }
  }
}

TEST_CASE("sigma_t formula and guards") {
  // hand-built alpha_bars to pin the exact values of the example
  NoiseSchedule s;
  s.t_max = 2;
  s.betas = {0.1, 0.444444444444444};  // unused by sigma_t
  s.alpha_bars = {1.0, 0.9, 0.5};

  // s=0: alpha_bar = 1 -> zero first factor
  CHECK(sigma_t(s, 0, 1) == 0.0);
  // direct formula evaluation: sqrt(0.1/0.5) * sqrt(1 - 0.5/0.9)
  CHECK(sigma_t(s, 1, 2) == doctest::Approx(0.2981423970).epsilon(1e-9));

  // degenerate equal alpha_bars are guarded to 0
  NoiseSchedule d;
  d.t_max = 2;
  d.betas = {0.5, 0.5};
  d.alpha_bars = {1.0, 0.5, 0.5};
  CHECK(sigma_t(d, 1, 2) == 0.0);

  CHECK_THROWS_AS(sigma_t(s, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(sigma_t(s, 2, 1), std::invalid_argument);
}

TEST_CASE("forward_noise identity at t=0 and fixed-noise values") {
  NoiseSchedule s = build_schedule(10, 0.05, 0.1);
  Rng rng(3);
  ImageTensor x0 = test::random_image(rng, 2, 5, 5, 0.5f);

  auto [xt0, eps0] = forward_noise(x0, 0, s, rng);
  CHECK(test::max_abs_diff(xt0, x0) == 0.0);

  // fixed eps of all-ones at alpha_bar = 0.5: every entry sqrt(0.5)
  ImageTensor zeros(1, 3, 3, ValueRange::Free, 0.0f);
  ImageTensor ones(1, 3, 3, ValueRange::Free, 1.0f);
  ImageTensor xt = combine_forward(zeros, ones, 0.5);
  for (float v : xt.data) CHECK(v == doctest::Approx(0.70710678f).epsilon(1e-6));

  // zero-noise case
  ImageTensor noiseless = combine_forward(x0, ImageTensor(2, 5, 5, ValueRange::Free, 0.0f), 0.36);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    CHECK(noiseless.data[i] == doctest::Approx(std::sqrt(0.36) * x0.data[i]).epsilon(1e-6));
  }

  CHECK_THROWS_AS(forward_noise(x0, 11, s, rng), std::invalid_argument);
}

TEST_CASE("forward_noise round-trips through the returned eps") {
  NoiseSchedule s = build_schedule(100, 1e-4, 0.02);
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    ImageTensor x0 = test::random_image(rng, 3, 8, 8, 0.8f);
    int t = 1 + static_cast<int>(rng.uniform_int(0, 99));
    auto [xt, eps] = forward_noise(x0, t, s, rng);
    const double a = s.alpha_bar(t);
    double worst = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      const double rec = (xt.data[i] - std::sqrt(1.0 - a) * eps.data[i]) / std::sqrt(a);
      worst = std::max(worst, std::abs(rec - x0.data[i]));
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("Rng determinism and splitting") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.normal() == b.normal());  // bit-identical sequences
  }

  // splits are independent of parent consumption
  Rng c(42);
  (void)c.normal();
  (void)c.uniform();
  Rng child_after = c.split(3);
  Rng child_fresh = Rng(42).split(3);
  for (int i = 0; i < 10; ++i) CHECK(child_after.normal() == child_fresh.normal());

  // distinct indexes give distinct streams
  Rng s0 = Rng(42).split(0);
  Rng s1 = Rng(42).split(1);
  bool differs = false;
  for (int i = 0; i < 8; ++i) differs = differs || (s0.next_u64() != s1.next_u64());
  CHECK(differs);
}

TEST_CASE("Rng uniform_int bounds and rough uniformity") {
  Rng rng(5);
  int counts[6] = {0, 0, 0, 0, 0, 0};
  for (int i = 0; i < 6000; ++i) {
    auto v = rng.uniform_int(1, 6);
    REQUIRE(v >= 1);
    REQUIRE(v <= 6);
    counts[v - 1]++;
  }
  for (int c : counts) CHECK(c > 800);
  CHECK_THROWS_AS(rng.uniform_int(3, 2), std::invalid_argument);
}

TEST_CASE("resize_bilinear identity and shape") {
  ScoreMap m(4, 4);
  Rng rng(9);
  for (auto& v : m.data) v = static_cast<float>(rng.uniform());
  ScoreMap same = resize_bilinear(m, 4, 4);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(same.data[i] == m.data[i]);
  ScoreMap up = resize_bilinear(m, 8, 8);
  CHECK(up.height == 8);
  CHECK(up.width == 8);
}
