#include <cmath>

#include "cda/losses.hpp"
#include "doctest.h"
#include "fd_probes.hpp"

using namespace cda;

namespace {

double hinge_value(const std::vector<double>& scores, std::size_t truth,
                   const HingeThresholds& th) {
  ad::ParamStore ps;
  ad::Tape t(&ps);
  return t.scalar(hinge_loss_node(t, t.constant(scores), truth, th));
}

}  // namespace

TEST_CASE("hinge loss values") {
  HingeThresholds th{0.5, 0.3};
  CHECK(hinge_value({0.6, 0.1}, 0, th) == doctest::Approx(0.0));
  CHECK(hinge_value({0.4, 0.1}, 0, th) == doctest::Approx(0.1));
  CHECK(hinge_value({0.6, 0.5}, 0, th) == doctest::Approx(0.2));
}

TEST_CASE("hinge loss invariants") {
  HingeThresholds th{0.5, 0.3};
  auto rng = make_rng(40, 1);
  for (int rep = 0; rep < 300; ++rep) {
    std::size_t n = 2 + uniform_index(rng, 5);
    std::vector<double> o(n);
    for (auto& x : o) x = uniform(rng, -1.0, 1.0);
    std::size_t truth = uniform_index(rng, n);
    double base = hinge_value(o, truth, th);
    CHECK(base >= 0.0);

    // zero iff all margins are met
    bool met = o[truth] >= th.delta_pos;
    for (std::size_t i = 0; i < n; ++i)
      if (i != truth && o[i] > th.delta_neg) met = false;
    CHECK((base == 0.0) == met);

    // raising the true score never raises the loss
    std::vector<double> up = o;
    up[truth] += uniform(rng, 0.0, 0.5);
    CHECK(hinge_value(up, truth, th) <= base + 1e-12);

    // raising a false score never lowers it
    std::size_t other = (truth + 1) % n;
    std::vector<double> up2 = o;
    up2[other] += uniform(rng, 0.0, 0.5);
    CHECK(hinge_value(up2, truth, th) >= base - 1e-12);
  }
}

TEST_CASE("hinge thresholds validate") {
  CHECK_NOTHROW((HingeThresholds{0.5, 0.3}).validate());
  CHECK_THROWS_AS((HingeThresholds{0.0, 0.3}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((HingeThresholds{1.2, 0.3}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((HingeThresholds{0.5, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((HingeThresholds{0.3, 0.5}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((HingeThresholds{0.3, 0.3}).validate(), std::invalid_argument);
}

TEST_CASE("mean representation") {
  CHECK(mean_representation({{1.0, 2.0}}) == std::vector<double>{1.0, 2.0});
  CHECK(mean_representation({{1.0, -2.0}, {-1.0, 2.0}}) == std::vector<double>{0.0, 0.0});
  auto m = mean_representation({{1.0, 2.0}, {3.0, 4.0}, {5.0, 9.0}});
  CHECK(m[0] == doctest::Approx(3.0));
  CHECK(m[1] == doctest::Approx(5.0));
  CHECK_THROWS_AS(mean_representation({}), std::invalid_argument);
}

TEST_CASE("similarity weights") {
  std::vector<double> h{0.5, -1.0, 2.0};
  std::vector<double> neg{-0.5, 1.0, -2.0};
  std::vector<double> orth{2.0, 1.0, 0.0};  // dot = 0
  auto lam = similarity_weights(h, {h, neg, orth}, 5.0);
  CHECK(lam[0] == doctest::Approx(5.0));
  CHECK(lam[1] == doctest::Approx(0.0));
  CHECK(lam[2] == doctest::Approx(0.0));

  auto rng = make_rng(41, 2);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(4), b(4);
    for (auto& x : a) x = uniform(rng, -3.0, 3.0);
    for (auto& x : b) x = uniform(rng, -3.0, 3.0);
    auto l = similarity_weights(a, {b}, 5.0);
    CHECK(l[0] >= 0.0);
    CHECK(l[0] <= 5.0);
  }
}

TEST_CASE("domain embedding regularizer") {
  auto rng = make_rng(42, 3);

  auto make_table = [&](std::vector<std::vector<double>> rows, ad::ParamStore& ps) {
    DomainTable t = DomainTable::create(ps, rows.size(), rows[0].size(), rng);
    for (std::size_t i = 0; i < rows.size(); ++i) ps[t.rows[i]].value.v = rows[i];
    t.frozen_prefix = rows.size() - 1;
    return t;
  };

  SUBCASE("orthogonal new embedding pays the full margin") {
    ad::ParamStore ps;
    DomainTable t = make_table({{1.0, 0.0}, {0.0, 1.0}}, ps);
    DerConfig cfg{0.1, 1.0, 0.0, {1.0}};
    ad::Tape tape(&ps);
    CHECK(tape.scalar(der_loss_node(tape, t, cfg)) == doctest::Approx(0.1));
  }
  SUBCASE("identical unit embedding pays only the norm penalty") {
    ad::ParamStore ps;
    DomainTable t = make_table({{1.0, 0.0}, {1.0, 0.0}}, ps);
    DerConfig cfg{0.1, 1.0, 0.4, {1.0}};
    ad::Tape tape(&ps);
    CHECK(tape.scalar(der_loss_node(tape, t, cfg)) == doctest::Approx(0.2));
  }
  SUBCASE("all weights zero gives exactly zero") {
    ad::ParamStore ps;
    DomainTable t = make_table({{1.0, 0.0}, {0.4, 0.3}}, ps);
    DerConfig cfg{0.1, 0.0, 0.0, {0.0}};
    ad::Tape tape(&ps);
    CHECK(tape.scalar(der_loss_node(tape, t, cfg)) == 0.0);
  }
  SUBCASE("inactive similarity terms leave the pure norm gradient") {
    ad::ParamStore ps;
    // new embedding opposite to the known one: cos = -1, margin inactive
    DomainTable t = make_table({{1.0, 0.0}, {-0.6, 0.0}}, ps);
    DerConfig cfg{0.1, 1.0, 0.4, {1.0}};
    ad::Tape tape(&ps);
    int loss = der_loss_node(tape, t, cfg);
    ad::GradientStore g;
    tape.backward(loss, g);
    const Tensor* gt = g.find(t.rows.back());
    REQUIRE(gt != nullptr);
    CHECK(gt->v[0] == doctest::Approx(0.4 * -0.6).epsilon(1e-9));
    CHECK(gt->v[1] == doctest::Approx(0.0));
  }
  SUBCASE("always nonnegative on random instances") {
    for (int rep = 0; rep < 100; ++rep) {
      ad::ParamStore ps;
      std::vector<std::vector<double>> rows;
      for (int i = 0; i < 4; ++i) {
        std::vector<double> r(3);
        for (auto& x : r) x = uniform(rng, -2.0, 2.0);
        rows.push_back(r);
      }
      DomainTable t = make_table(rows, ps);
      DerConfig cfg{uniform(rng, 0.0, 0.5), 5.0, uniform(rng, 0.0, 1.0), {}};
      cfg.lambda = {uniform(rng, 0.0, 5.0), uniform(rng, 0.0, 5.0), uniform(rng, 0.0, 5.0)};
      ad::Tape tape(&ps);
      CHECK(tape.scalar(der_loss_node(tape, t, cfg)) >= 0.0);
    }
  }
  SUBCASE("lambda length must match the frozen prefix") {
    ad::ParamStore ps;
    DomainTable t = make_table({{1.0, 0.0}, {0.0, 1.0}}, ps);
    DerConfig cfg{0.1, 1.0, 0.0, {1.0, 2.0}};
    ad::Tape tape(&ps);
    CHECK_THROWS_AS(der_loss_node(tape, t, cfg), std::invalid_argument);
  }
}

TEST_CASE("batch mean") {
  ad::ParamStore ps;
  ad::Tape t(&ps);
  std::vector<int> parts{t.scalar_const(1.0), t.scalar_const(2.0), t.scalar_const(6.0)};
  CHECK(t.scalar(batch_mean(t, parts)) == doctest::Approx(3.0));
  CHECK_THROWS_AS(batch_mean(t, {}), std::invalid_argument);
}
