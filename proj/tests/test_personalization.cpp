#include <algorithm>
#include <cmath>

#include "cda/optimizer.hpp"
#include "cda/personalization.hpp"
#include "doctest.h"
#include "fd_probes.hpp"

using namespace cda;

namespace {

// Table with fixed rows for value-level checks.
DomainTable fixed_table(ad::ParamStore& ps, const std::vector<std::vector<double>>& rows) {
  auto rng = make_rng(1, 1);
  DomainTable t = DomainTable::create(ps, rows.size(), rows[0].size(), rng);
  for (std::size_t i = 0; i < rows.size(); ++i) ps[t.rows[i]].value.v = rows[i];
  return t;
}

}  // namespace

TEST_CASE("summarize_enabled values") {
  SUBCASE("single enabled domain returns its embedding exactly") {
    ad::ParamStore ps;
    DomainTable t = fixed_table(ps, {{0.3, -0.7}, {1.5, 2.5}});
    ad::Tape tape(&ps);
    int h = tape.constant({0.4, 0.9});
    auto out = tape.value_vec(t.summarize(tape, h, {1}));
    CHECK(out == std::vector<double>{1.5, 2.5});
  }
  SUBCASE("two identical embeddings average to themselves with equal weights") {
    ad::ParamStore ps;
    DomainTable t = fixed_table(ps, {{0.2, 0.8}, {0.2, 0.8}});
    ad::Tape tape(&ps);
    int h = tape.constant({1.0, -1.0});
    auto w = t.attention_weights(tape, h, {0, 1});
    CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-12));
    tape.clear();
    h = tape.constant({1.0, -1.0});
    auto out = tape.value_vec(t.summarize(tape, h, {0, 1}));
    CHECK(out[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("softmax arithmetic: scores ln1 and ln3 weight rows 1:3") {
    ad::ParamStore ps;
    DomainTable t = fixed_table(ps, {{1.0, 0.0}, {0.0, 1.0}});
    ad::Tape tape(&ps);
    int h = tape.constant({0.0, std::log(3.0)});  // dots: ln1, ln3
    auto out = tape.value_vec(t.summarize(tape, h, {0, 1}));
    CHECK(out[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("empty enabled set gives the zero vector") {
    ad::ParamStore ps;
    DomainTable t = fixed_table(ps, {{1.0, 2.0}});
    ad::Tape tape(&ps);
    int h = tape.constant({1.0, 1.0});
    auto out = tape.value_vec(t.summarize(tape, h, {}));
    CHECK(out == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("out of range id is rejected") {
    ad::ParamStore ps;
    DomainTable t = fixed_table(ps, {{1.0, 2.0}});
    ad::Tape tape(&ps);
    int h = tape.constant({1.0, 1.0});
    CHECK_THROWS_AS(t.summarize(tape, h, {3}), std::invalid_argument);
  }
}

TEST_CASE("attention weights are positive, sum to 1, and ignore enabled order") {
  auto rng = make_rng(17, 2);
  for (int rep = 0; rep < 50; ++rep) {
    ad::ParamStore ps;
    DomainTable t = DomainTable::create(ps, 6, 4, rng);
    std::vector<int> enabled{0, 2, 3, 5};
    ad::Tape tape(&ps);
    std::vector<double> hv(4);
    for (auto& x : hv) x = uniform(rng, -2.0, 2.0);

    auto w = t.attention_weights(tape, tape.constant(hv), enabled);
    double sum = 0.0;
    for (double x : w) {
      CHECK(x > 0.0);
      sum += x;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    tape.clear();
    auto s1 = tape.value_vec(t.summarize(tape, tape.constant(hv), enabled));
    std::vector<int> shuffled = {3, 0, 5, 2};
    tape.clear();
    auto s2 = tape.value_vec(t.summarize(tape, tape.constant(hv), shuffled));
    for (std::size_t i = 0; i < s1.size(); ++i)
      CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-12));
  }
}

TEST_CASE("scaling the dominant embedding raises its attention weight") {
  // The dominance mechanism the regularizer exists to suppress: when a row
  // already holds the (positive) maximum dot product, growing its norm
  // strictly grows its weight.
  auto rng = make_rng(23, 5);
  int checked = 0;
  while (checked < 30) {
    ad::ParamStore ps;
    DomainTable t = DomainTable::create(ps, 4, 4, rng);
    std::vector<double> hv(4);
    for (auto& x : hv) x = uniform(rng, -2.0, 2.0);
    std::vector<int> enabled{0, 1, 2, 3};

    ad::Tape tape(&ps);
    std::vector<double> dots(4);
    std::size_t best = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      dots[i] = dot(ps[t.rows[i]].value.v, hv);
      if (dots[i] > dots[best]) best = i;
    }
    if (dots[best] <= 0.05) continue;  // need a positive maximum

    auto before = t.attention_weights(tape, tape.constant(hv), enabled);
    for (auto& x : ps[t.rows[best]].value.v) x *= 2.5;
    tape.clear();
    auto after = t.attention_weights(tape, tape.constant(hv), enabled);
    CHECK(after[best] > before[best]);
    ++checked;
  }
}

TEST_CASE("expand_domain_embedding") {
  auto rng = make_rng(31, 0);
  ad::ParamStore ps;
  DomainTable t = DomainTable::create(ps, 3, 4, rng);
  auto r0 = ps[t.rows[0]].value, r1 = ps[t.rows[1]].value, r2 = ps[t.rows[2]].value;

  t.expand(ps, rng);
  CHECK(t.rows.size() == 4);
  CHECK(t.frozen_prefix == 3);
  CHECK(ps[t.rows[0]].value.same_bytes(r0));
  CHECK(ps[t.rows[1]].value.same_bytes(r1));
  CHECK(ps[t.rows[2]].value.same_bytes(r2));
  CHECK(ps[t.rows[3]].trainable);
  for (int i = 0; i < 3; ++i) CHECK_FALSE(ps[t.rows[i]].trainable);

  t.expand(ps, rng);
  CHECK(t.rows.size() == 5);
  CHECK(t.frozen_prefix == 4);

  SUBCASE("a training step moves only the new row") {
    ad::Tape tape(&ps);
    ad::GradientStore g;
    std::vector<double> hv{0.5, -0.2, 0.8, 0.1};
    int summary = t.summarize(tape, tape.constant(hv), {0, 1, 2, 3, 4});
    int loss = tape.dot(summary, summary);
    tape.backward(loss, g);
    auto frozen_before = ps[t.rows[0]].value;
    auto new_before = ps[t.rows[4]].value;
    Adam opt(AdamConfig{0.05, 0.9, 0.999, 1e-8});
    opt.step(ps, g);
    CHECK(ps[t.rows[0]].value.same_bytes(frozen_before));
    CHECK_FALSE(ps[t.rows[4]].value.same_bytes(new_before));
  }
}
