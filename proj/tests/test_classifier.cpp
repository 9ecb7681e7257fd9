#include <algorithm>
#include <cmath>

#include "cda/classifier.hpp"
#include "doctest.h"
#include "fd_probes.hpp"

using namespace cda;

TEST_CASE("forward_hidden") {
  auto rng = make_rng(5, 0);
  ad::ParamStore ps;
  HiddenLayer l = HiddenLayer::create(ps, 4, 4, rng);

  SUBCASE("zero weights and bias give the zero vector") {
    std::fill(ps[l.w].value.v.begin(), ps[l.w].value.v.end(), 0.0);
    std::fill(ps[l.b].value.v.begin(), ps[l.b].value.v.end(), 0.0);
    ad::Tape t(&ps);
    auto out = t.value_vec(l.forward(t, t.constant({1.0, -2.0, 3.0, 0.5})));
    for (double x : out) CHECK(x == 0.0);
  }

  SUBCASE("identity weights, zero bias, nonnegative input scales by the selu constant") {
    std::fill(ps[l.w].value.v.begin(), ps[l.w].value.v.end(), 0.0);
    for (std::size_t i = 0; i < 4; ++i) ps[l.w].value.at(i, i) = 1.0;
    std::fill(ps[l.b].value.v.begin(), ps[l.b].value.v.end(), 0.0);
    ad::Tape t(&ps);
    auto out = t.value_vec(l.forward(t, t.constant({0.5, 1.0, 0.0, 2.0})));
    CHECK(out[0] == doctest::Approx(ad::kSeluScale * 0.5).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(ad::kSeluScale * 1.0).epsilon(1e-12));
    CHECK(out[2] == 0.0);
    CHECK(out[3] == doctest::Approx(ad::kSeluScale * 2.0).epsilon(1e-12));
  }

  SUBCASE("weight gradient matches finite differences") {
    ad::Tape t(&ps);
    int out = l.forward(t, t.constant({0.7, -0.4, 1.2, 0.3}));
    int loss = t.dot(out, out);
    if (t.min_kink_distance() > 1e-3) {
      double err = ad::finite_difference_check(t, loss, ps, {l.w, l.b}, 1e-5);
      CHECK(err < 1e-4);
    }
  }

  SUBCASE("size mismatch is rejected") {
    ad::Tape t(&ps);
    CHECK_THROWS_AS(l.forward(t, t.constant({1.0, 2.0})), std::invalid_argument);
  }
}

TEST_CASE("predict_scores") {
  auto rng = make_rng(6, 0);
  ad::ParamStore ps;
  PredictionLayer l = PredictionLayer::create(ps, 2, 2, rng);
  ps[l.rows[0]].value.v = {6.0, 8.0};  // parallel to h below, norm 10
  ps[l.rows[1]].value.v = {4.0, 3.0};

  ad::Tape t(&ps);
  auto cos_scores = t.value_vec(l.scores(t, t.constant({3.0, 4.0}), ScoreMode::Cosine));
  CHECK(cos_scores[0] == doctest::Approx(1.0).epsilon(1e-12));   // parallel regardless of norm
  CHECK(cos_scores[1] == doctest::Approx(0.96).epsilon(1e-12));  // (12+12)/(5*5)

  SUBCASE("linear scores scale with the row, cosine scores do not") {
    t.clear();
    auto lin_before = t.value_vec(l.scores(t, t.constant({3.0, 4.0}), ScoreMode::LinearDot));
    for (auto& x : ps[l.rows[1]].value.v) x *= 10.0;
    t.clear();
    auto lin_after = t.value_vec(l.scores(t, t.constant({3.0, 4.0}), ScoreMode::LinearDot));
    t.clear();
    auto cos_after = t.value_vec(l.scores(t, t.constant({3.0, 4.0}), ScoreMode::Cosine));
    CHECK(lin_after[1] == doctest::Approx(10.0 * lin_before[1]).epsilon(1e-12));
    CHECK(cos_after[1] == doctest::Approx(0.96).epsilon(1e-12));
  }

  SUBCASE("linear mode rewards norm growth whenever the dot is positive") {
    auto prng = make_rng(62, 1);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> h(3), w(3);
      for (auto& x : h) x = uniform(prng, -2.0, 2.0);
      for (auto& x : w) x = uniform(prng, -2.0, 2.0);
      double base = dot(h, w);
      if (base <= 0.0) continue;
      double c = uniform(prng, 1.01, 4.0);
      std::vector<double> w2 = w;
      for (auto& x : w2) x *= c;
      CHECK(dot(h, w2) > base);
    }
  }
}

TEST_CASE("expand_prediction_row") {
  auto rng = make_rng(7, 0);
  ad::ParamStore ps;
  PredictionLayer l = PredictionLayer::create(ps, 3, 4, rng);
  auto r0 = ps[l.rows[0]].value, r1 = ps[l.rows[1]].value, r2 = ps[l.rows[2]].value;
  l.expand(ps, rng);
  CHECK(l.rows.size() == 4);
  CHECK(l.frozen_prefix == 3);
  CHECK(ps[l.rows[0]].value.same_bytes(r0));
  CHECK(ps[l.rows[1]].value.same_bytes(r1));
  CHECK(ps[l.rows[2]].value.same_bytes(r2));
  CHECK(ps[l.rows[3]].trainable);
}

TEST_CASE("argmax_predict") {
  CHECK(argmax_predict(std::vector<double>{0.1, 0.9, 0.3}) == 1);
  CHECK(argmax_predict(std::vector<double>{0.5, 0.5}) == 0);  // tie toward lowest index
  CHECK_THROWS_AS(argmax_predict(std::vector<double>{}), std::invalid_argument);

  SUBCASE("permutation covariance and cosine scale invariance") {
    auto rng = make_rng(8, 0);
    ad::ParamStore ps;
    PredictionLayer l = PredictionLayer::create(ps, 5, 4, rng);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<double> h(4);
      for (auto& x : h) x = uniform(rng, -2.0, 2.0);
      ad::Tape t(&ps);
      auto scores = t.value_vec(l.scores(t, t.constant(h), ScoreMode::Cosine));
      std::size_t base = argmax_predict(scores);

      // positive per-row rescaling leaves every cosine score's argmax alone
      ad::ParamStore ps2 = ps;
      PredictionLayer l2 = l;
      for (int pid : l2.rows) {
        const double c = uniform(rng, 0.1, 10.0);
        for (auto& x : ps2[pid].value.v) x *= c;
      }
      ad::Tape t2(&ps2);
      auto scores2 = t2.value_vec(l2.scores(t2, t2.constant(h), ScoreMode::Cosine));
      CHECK(argmax_predict(scores2) == base);

      // permuting rows permutes the argmax
      std::vector<double> rotated(scores.begin() + 1, scores.end());
      rotated.push_back(scores[0]);
      std::size_t rot = argmax_predict(rotated);
      CHECK((rot + 1) % scores.size() == base);
    }
  }
}
