#include <cmath>
#include <unordered_map>

#include "cda/encoder.hpp"
#include "cda/engine.hpp"
#include "cda/model.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cda;

namespace {

Model blank_model(std::size_t vocab_words, std::uint64_t seed = 3) {
  Vocabulary v;
  for (std::size_t i = 0; i < vocab_words; ++i) v.add("tok" + std::to_string(i));
  return Model::create(std::move(v), {"a", "b"}, testutil::tiny_dims(), ScoreMode::Cosine, seed);
}

}  // namespace

TEST_CASE("tokenize_and_lookup") {
  Vocabulary v;
  int get = v.add("get");
  int ride = v.add("ride");

  CHECK(tokenize_and_lookup({"get", "ride"}, v) == std::vector<int>{get, ride});
  CHECK(tokenize_and_lookup({"zxqv"}, v) == std::vector<int>{Vocabulary::kUnkIndex});
  CHECK(tokenize_and_lookup({"get", "zxqv", "ride"}, v) ==
        std::vector<int>{get, Vocabulary::kUnkIndex, ride});
  CHECK_THROWS_AS(tokenize_and_lookup({}, v), std::invalid_argument);
}

TEST_CASE("vocabulary indices are dense and injective") {
  Vocabulary v;
  v.add("x");
  v.add("y");
  v.add("x");
  CHECK(v.size() == 3);  // unk + 2
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.index.at(v.tokens[i]) == static_cast<int>(i));
}

TEST_CASE("encode_utterance") {
  Model m = blank_model(6);

  SUBCASE("zero weights give the zero vector") {
    for (int pid : m.enc.param_ids())
      std::fill(m.params[pid].value.v.begin(), m.params[pid].value.v.end(), 0.0);
    ad::Tape t(&m.params);
    auto out = t.value_vec(m.enc.encode(t, {1, 2, 3}));
    CHECK(out.size() == m.enc.utterance_dim());
    for (double x : out) CHECK(x == 0.0);
  }

  SUBCASE("single token yields a vector of the contract size") {
    ad::Tape t(&m.params);
    CHECK(t.value_len(m.enc.encode(t, {4})) == m.enc.utterance_dim());
  }

  SUBCASE("matches an independent step-by-step recurrence") {
    ad::Tape t(&m.params);
    for (auto ids : {std::vector<int>{2}, std::vector<int>{1, 4, 0, 3, 3, 5}}) {
      t.clear();
      auto got = t.value_vec(m.enc.encode(t, ids));
      auto want = testutil::naive_bilstm(m, ids);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(std::abs(got[i] - want[i]) < 1e-10);
    }
  }

  SUBCASE("output length holds for every input length") {
    ad::Tape t(&m.params);
    std::vector<int> ids;
    for (int len = 1; len <= 12; ++len) {
      ids.push_back(len % 6);
      t.clear();
      CHECK(t.value_len(m.enc.encode(t, ids)) == m.enc.utterance_dim());
    }
  }

  SUBCASE("out of range index is rejected") {
    ad::Tape t(&m.params);
    CHECK_THROWS_AS(m.enc.encode(t, {999}), std::invalid_argument);
  }

  SUBCASE("permutation changes the encoding, repetition does not") {
    ad::Tape t(&m.params);
    auto a = t.value_vec(m.enc.encode(t, {1, 2, 3, 4}));
    t.clear();
    auto b = t.value_vec(m.enc.encode(t, {4, 3, 2, 1}));
    t.clear();
    auto a2 = t.value_vec(m.enc.encode(t, {1, 2, 3, 4}));
    CHECK(a == a2);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
    CHECK(diff > 1e-8);
  }
}

TEST_CASE("freeze_encoder") {
  Model m = blank_model(6);
  m.enc.freeze(m.params);
  CHECK(m.enc.frozen(m.params));
  m.enc.freeze(m.params);  // idempotent
  CHECK(m.enc.frozen(m.params));

  // Optimizer steps with nonzero gradients leave frozen tensors bit-identical.
  auto before = m.params[m.enc.embed].value;
  ad::Tape t(&m.params);
  int u = m.enc.encode(t, {1, 2});
  int loss = t.dot(u, u);
  ad::GradientStore g;
  t.backward(loss, g);
  CHECK(g.find(m.enc.embed) != nullptr);  // computed...
  Adam opt(AdamConfig{0.05, 0.9, 0.999, 1e-8});
  opt.step(m.params, g);
  CHECK(m.params[m.enc.embed].value.same_bytes(before));  // ...but not applied

  SUBCASE("gradient check still passes on frozen params") {
    t.clear();
    int u2 = m.enc.encode(t, {1, 2, 3});
    int l2 = t.dot(u2, u2);
    double err = ad::finite_difference_check(t, l2, m.params, m.enc.param_ids(), 1e-5);
    CHECK(err < 1e-4);
  }
}
