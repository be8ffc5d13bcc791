// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>

#include "optm/cells.hpp"
#include "optm/error.hpp"

using namespace optm;

namespace {

LstmWeights random_lstm(std::size_t u, std::size_t d, Rng& rng, double scale) {
  LstmWeights w = LstmWeights::zeros(u, d);
  for (auto& [name, m] : w.tensors())
    for (auto& x : m->flat()) x = rng.uniform(-scale, scale);
  return w;
}

Vec random_vec(std::size_t n, Rng& rng, double scale) {
  Vec v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

}  // namespace

TEST_CASE("lstm_forward with zero weights") {
  const auto w = LstmWeights::zeros(3, 2);
  const auto s = lstm_forward(w, Vec{4, -9}, Vec(3, 0.0), Vec(3, 0.0));
  CHECK(s.f == Vec(3, 0.5));
  CHECK(s.i == Vec(3, 0.5));
  CHECK(s.o == Vec(3, 0.5));
  CHECK(s.c_tilde == Vec(3, 0.0));
  CHECK(s.c == Vec(3, 0.0));
  CHECK(s.h == Vec(3, 0.0));
  CHECK(s.x == Vec{4, -9});
}

TEST_CASE("lstm_forward carries the cell state") {
  const auto w = LstmWeights::zeros(1, 1);
  const auto s = lstm_forward(w, Vec{0.3}, Vec{0.0}, Vec{1.0});
  CHECK(s.c[0] == 0.5);
  CHECK(s.h[0] == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-15));
  CHECK(s.h[0] == doctest::Approx(0.2310585786));
}

TEST_CASE("lstm_forward shape errors") {
  const auto w = LstmWeights::zeros(2, 3);
  CHECK_THROWS_AS(lstm_forward(w, Vec{1, 2}, Vec(2, 0.0), Vec(2, 0.0)), ShapeError);
  CHECK_THROWS_AS(lstm_forward(w, Vec{1, 2, 3}, Vec(3, 0.0), Vec(2, 0.0)), ShapeError);
}

TEST_CASE("lstm_forward ranges for random weights") {
  Rng rng(21);
  for (int t = 0; t < 1000; ++t) {
    const auto w = random_lstm(4, 40, rng, 1.0);
    const auto s = lstm_forward(w, random_vec(40, rng, 3), random_vec(4, rng, 1), random_vec(4, rng, 2));
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK((s.f[k] > 0 && s.f[k] < 1 && s.i[k] > 0 && s.i[k] < 1 && s.o[k] > 0 && s.o[k] < 1));
      CHECK(std::abs(s.c_tilde[k]) < 1);
      CHECK(std::abs(s.h[k]) < 1);
    }
  }
}

TEST_CASE("gru_forward") {
  const auto zero = GruWeights::zeros(3, 2);
  CHECK(gru_forward(zero, Vec{1, 2}, Vec(3, 0.0)).h == Vec(3, 0.0));

  Rng rng(4);
  auto w = GruWeights::glorot(3, 2, rng);
  w.b_z.fill(50.0);
  const Vec h_prev{0.3, -0.7, 0.1};
  const auto s = gru_forward(w, Vec{1, -1}, h_prev);
  for (std::size_t k = 0; k < 3; ++k) CHECK(s.h[k] == doctest::Approx(h_prev[k]).epsilon(1e-12));

  for (int t = 0; t < 1000; ++t) {
    GruWeights r = GruWeights::zeros(4, 5);
    for (auto& [name, m] : r.tensors())
      for (auto& x : m->flat()) x = rng.uniform(-2, 2);
    const auto g = gru_forward(r, random_vec(5, rng, 3), random_vec(4, rng, 0.999));
    for (double v : g.h) CHECK(std::abs(v) < 1);
  }
}

TEST_CASE("online_gd hand trace") {
  CHECK(online_gd(Vec{1}, 2, Vec{0}, 0.25, 1) == Vec{1.0});
  CHECK(online_gd(Vec{1}, 2, Vec{0}, 0.25, 2) == Vec{1.5});
}

TEST_CASE("online_gd fixed point") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const Vec r{0.5, -0.25, 2.0};
    const Vec th{1.0, 4.0, -0.5};
    const double y = dot(r, th);
    CHECK(online_gd(r, y, th, rng.uniform(0.001, 1.0), 5) == th);
  }
}

TEST_CASE("online_gd matches the least-squares oracle") {
  // Minimum-distance solution of r·θ = y from θ0 (normal equations of the
  // underdetermined system): θ* = θ0 + rᵀ (y - r·θ0) / (r·rᵀ).
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    const Vec r = random_vec(24, rng, 1.0);
    const Vec th0 = random_vec(24, rng, 0.5);
    const double y = rng.uniform(-3, 3);
    double rr = 0.0, rt = 0.0;
    for (std::size_t j = 0; j < 24; ++j) {
      rr += r[j] * r[j];
      rt += r[j] * th0[j];
    }
    Vec oracle = th0;
    for (std::size_t j = 0; j < 24; ++j) oracle[j] += r[j] * (y - rt) / rr;

    const Vec th = online_gd(r, y, th0, 0.4 / rr, 1000);
    double pred = 0.0, pred_oracle = 0.0;
    for (std::size_t j = 0; j < 24; ++j) {
      pred += r[j] * th[j];
      pred_oracle += r[j] * oracle[j];
      CHECK(std::abs(th[j] - oracle[j]) < 1e-6);
    }
    CHECK(std::abs(pred - y) < 1e-8);
    CHECK(std::abs(pred - pred_oracle) < 1e-6);
  }
}

TEST_CASE("online_gd error magnitude never increases for small alpha") {
  Rng rng(8);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 30));
    const Vec r = random_vec(n, rng, 2.0);
    const double rr = squared_norm(r);
    if (rr == 0.0) continue;
    const double alpha = rng.uniform(0.0, 1.0) / rr;
    const double y = rng.uniform(-5, 5);
    Vec th = random_vec(n, rng, 1.0);
    double prev = std::abs(dot(r, th) - y);
    for (int it = 0; it < 20; ++it) {
      th = online_gd(r, y, th, alpha, 1);
      const double e = std::abs(dot(r, th) - y);
      double mag = std::abs(y);
      for (std::size_t j = 0; j < n; ++j) mag += std::abs(r[j] * th[j]);
      CHECK(e <= prev + 4.0 * static_cast<double>(n + 1) * std::numeric_limits<double>::epsilon() * mag);
      prev = e;
    }
  }
}

TEST_CASE("online_gd divergence names the iteration") {
  try {
    online_gd(Vec{1e200}, 1.0, Vec{1.0}, 1.0, 5);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("average_importance examples") {
  const Vec t1{1, -2, 3.5, 0, 7, -1};
  const auto a1 = average_importance(t1, 1);
  for (std::size_t k = 0; k < 6; ++k) CHECK(a1[k] == t1[k]);

  const Vec t2{1, 3, 2, 2, 0, 0, 5, 1, -1, -1, 4, 4};
  const auto a2 = average_importance(t2, 2);
  CHECK(a2 == std::array<double, 6>{2, 2, 0, 3, -1, 4});
  CHECK(select_component(a2) == Component::hidden);

  const auto abs2 = average_importance(t2, 2, ImportanceMode::absolute_mean);
  CHECK(abs2 == std::array<double, 6>{2, 2, 0, 3, 1, 4});

  CHECK_THROWS_AS(average_importance(Vec(7, 1.0), 1), ShapeError);
  CHECK_THROWS_AS(average_importance(Vec(12, 1.0), 3), ShapeError);
}

TEST_CASE("average_importance scales linearly and selection is scale invariant") {
  Rng rng(14);
  for (int t = 0; t < 500; ++t) {
    const std::size_t u = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const Vec th = random_vec(6 * u, rng, 2.0);
    const double k = std::ldexp(1.0, static_cast<int>(rng.uniform_int(-4, 4)));
    Vec scaled = th;
    for (auto& x : scaled) x *= k;
    const auto a = average_importance(th, u);
    const auto b = average_importance(scaled, u);
    for (std::size_t c = 0; c < 6; ++c) CHECK(b[c] == a[c] * k);
    CHECK(select_component(a) == select_component(b));

    std::array<double, 6> mono{};
    for (std::size_t c = 0; c < 6; ++c) mono[c] = std::exp(a[c]) + 3.0;
    CHECK(select_component(mono) == select_component(a));
  }
}

TEST_CASE("ties go to the lowest component") {
  CHECK(select_component({0, 0, 0, 0, 0, 0}) == Component::forget);
  CHECK(select_component({1, 3, 3, 0, 3, 2}) == Component::input);
  CHECK(select_component({-1, -1, -1, -1, -1, -0.5}) == Component::hidden);
}

TEST_CASE("repo concatenation order") {
  Rng rng(12);
  const auto w = random_lstm(3, 2, rng, 1.0);
  const auto s = lstm_forward(w, Vec{0.2, -0.4}, Vec{0.1, 0.2, 0.3}, Vec{0.5, -0.5, 0.25});
  const Vec r = concat_repo(s);
  REQUIRE(r.size() == 18);
  const Vec* blocks[] = {&s.f, &s.i, &s.c_tilde, &s.o, &s.c, &s.h};
  for (int c = 0; c < 6; ++c) {
    CHECK(Vec(r.begin() + 3 * c, r.begin() + 3 * c + 3) == *blocks[c]);
    CHECK(component_vector(s, static_cast<Component>(c + 1)) == *blocks[c]);
  }
}

TEST_CASE("no learning selects the forget gate") {
  Rng rng(2);
  const auto w = random_lstm(3, 4, rng, 1.0);
  RepoConfig cfg;
  cfg.alpha = 0.0;
  cfg.iters = 1;
  cfg.theta_init = ThetaInit::zero;
  const auto step = optm_forward(w, random_vec(4, rng, 1), Vec(3, 0.0), Vec(3, 0.0), 0.7, cfg, Vec(18, 0.0));
  CHECK(step.repo.ai == std::array<double, 6>{});
  CHECK(step.repo.selected == Component::forget);
  CHECK(step.repo.h_new == step.cell.f);
}

TEST_CASE("the only predictive component wins after warm-up") {
  // With zero weights f = i = o = 0.5 and c~ = 0, so c = 0.5·c_prev. Driving
  // c_prev externally and labelling y = 2c makes the cell state the one exact
  // linear predictor in the repo; h = 0.5·tanh(c) is the nearest competitor.
  const auto w = LstmWeights::zeros(1, 1);
  RepoConfig cfg;
  cfg.alpha = 0.1;
  cfg.iters = 10;
  Rng rng(77);
  Vec theta(6, 0.0);
  Component last = Component::forget;
  for (int t = 0; t < 500; ++t) {
    const double v = rng.uniform(-1, 1);
    const auto step = optm_forward(w, Vec{rng.normal(0, 1)}, Vec{0.0}, Vec{v}, v, cfg, theta);
    CHECK(step.cell.c[0] == 0.5 * v);
    theta = step.theta_next;
    last = step.repo.selected;
  }
  CHECK(last == Component::cell);
}

TEST_CASE("optm_forward outputs are stored vectors") {
  Rng rng(101);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t u = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const auto w = random_lstm(u, 5, rng, 1.5);
    RepoConfig cfg;
    cfg.alpha = rng.uniform(0, 0.2);
    cfg.iters = static_cast<int>(rng.uniform_int(1, 10));
    cfg.theta_init = rng.coin() ? ThetaInit::warm : ThetaInit::zero;
    cfg.importance = rng.coin() ? ImportanceMode::signed_mean : ImportanceMode::absolute_mean;
    const Vec x = random_vec(5, rng, 2), h = random_vec(u, rng, 1), c = random_vec(u, rng, 2);
    const auto step = optm_forward(w, x, h, c, rng.normal(0, 1), cfg, random_vec(6 * u, rng, 1));
    CHECK(step.repo.h_new == component_vector(step.cell, step.repo.selected));
    CHECK(step.c_next == lstm_forward(w, x, h, c).c);
    CHECK(step.theta_next == step.repo.theta);
    CHECK(step.repo.selected == select_component(average_importance(step.repo.theta, u, cfg.importance)));
  }
}

TEST_CASE("zero theta init ignores the carry") {
  Rng rng(5);
  const auto w = random_lstm(2, 3, rng, 1.0);
  RepoConfig cfg;
  cfg.theta_init = ThetaInit::zero;
  const Vec x{0.1, 0.2, 0.3}, h{0, 0}, c{0, 0};
  const auto a = optm_forward(w, x, h, c, 0.5, cfg, Vec(12, 9.0));
  const auto b = optm_forward(w, x, h, c, 0.5, cfg, Vec(12, 0.0));
  CHECK(a.repo.theta == b.repo.theta);
}

TEST_CASE("repo config validation") {
  RepoConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.iters = 1;
  cfg.alpha = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
