#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "cda/corpus.hpp"
#include "cda/serialize.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cda;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/cda_test_") + name;
}

}  // namespace

TEST_CASE("split_8_1_1 proportions") {
  auto make = [](std::size_t n) {
    std::vector<Sample> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i].tokens = {"t" + std::to_string(i)};
      v[i].domain = 0;
    }
    return v;
  };

  SUBCASE("exact ratio at 100") {
    Rng rng = make_rng(1, 0);
    DomainData d;
    split_8_1_1(make(100), rng, d);
    CHECK(d.train.size() == 80);
    CHECK(d.dev.size() == 10);
    CHECK(d.test.size() == 10);
  }
  SUBCASE("101 samples stay within one of proportional") {
    Rng rng = make_rng(1, 0);
    DomainData d;
    split_8_1_1(make(101), rng, d);
    CHECK(d.total() == 101);
    CHECK(std::abs(static_cast<double>(d.train.size()) - 80.8) <= 1.0);
    CHECK(std::abs(static_cast<double>(d.dev.size()) - 10.1) <= 1.0);
    CHECK(std::abs(static_cast<double>(d.test.size()) - 10.1) <= 1.0);
  }
  SUBCASE("deterministic under the seed, disjoint and exhaustive") {
    Rng r1 = make_rng(7, 0), r2 = make_rng(7, 0);
    DomainData a, b;
    split_8_1_1(make(57), r1, a);
    split_8_1_1(make(57), r2, b);
    CHECK(a == b);

    std::set<std::string> seen;
    for (const auto* part : {&a.train, &a.dev, &a.test})
      for (const auto& s : *part) CHECK(seen.insert(s.tokens[0]).second);
    CHECK(seen.size() == 57);
  }
  SUBCASE("fewer than 10 samples rejected") {
    Rng rng = make_rng(1, 0);
    DomainData d;
    CHECK_THROWS_AS(split_8_1_1(make(9), rng, d), std::invalid_argument);
  }
}

TEST_CASE("generate_corpus") {
  GeneratorConfig cfg = testutil::tiny_gen(4);

  SUBCASE("same seed, identical bytes") {
    Corpus a = generate_corpus(cfg);
    Corpus b = generate_corpus(cfg);
    CHECK(a == b);
    write_corpus(a, temp_path("gen_a.jsonl"));
    write_corpus(b, temp_path("gen_b.jsonl"));
    CHECK(io::read_file(temp_path("gen_a.jsonl")) == io::read_file(temp_path("gen_b.jsonl")));
  }

  SUBCASE("two disjoint-topic domains are separable by a bag-of-words oracle") {
    GeneratorConfig g = testutil::tiny_gen(2);
    g.similar_pair_fraction = 0.0;
    Corpus c = generate_corpus(g);
    auto oracle = testutil::BagOfWordsOracle::fit(c, {0, 1});
    CHECK(oracle.test_accuracy(c, {0, 1}) >= 0.95);
  }

  SUBCASE("enabled sets are valid and hit the truth at the configured rate") {
    GeneratorConfig g = testutil::tiny_gen(6);
    g.utterances_per_domain = 200;
    Corpus c = generate_corpus(g);
    std::size_t with_truth = 0, total = 0;
    for (const auto& d : c.domains)
      for (const auto* part : {&d.train, &d.dev, &d.test})
        for (const auto& s : *part) {
          for (int e : s.enabled) {
            CHECK(e >= 0);
            CHECK(static_cast<std::size_t>(e) < g.domain_count);
          }
          std::set<int> uniq(s.enabled.begin(), s.enabled.end());
          CHECK(uniq.size() == s.enabled.size());
          if (uniq.count(s.domain)) ++with_truth;
          ++total;
        }
    double frac = static_cast<double>(with_truth) / static_cast<double>(total);
    double sigma = std::sqrt(0.9 * 0.1 / static_cast<double>(total));
    CHECK(std::abs(frac - 0.9) <= 3.0 * sigma);
  }

  SUBCASE("per-domain splits are disjoint and cover everything") {
    Corpus c = generate_corpus(cfg);
    for (const auto& d : c.domains) {
      CHECK(d.total() >= 10);
      for (const auto& s : d.train) CHECK(s.domain == c.domain_id(d.name));
    }
  }

  SUBCASE("vocabulary too small is rejected") {
    GeneratorConfig g = testutil::tiny_gen(4);
    g.vocab_size = g.domain_count * g.topic_words_per_domain;  // no background room
    CHECK_THROWS_AS(generate_corpus(g), std::invalid_argument);
  }

  SUBCASE("similar pairs share topic words") {
    GeneratorConfig g = testutil::tiny_gen(12, 21);
    g.similar_pair_fraction = 0.6;
    Corpus c = generate_corpus(g);
    CHECK_FALSE(c.similar_pairs.empty());
  }
}

TEST_CASE("corpus file round trip") {
  Corpus c = generate_corpus(testutil::tiny_gen(3));
  const std::string path = temp_path("roundtrip.jsonl");
  write_corpus(c, path);
  Corpus back = read_corpus(path);
  CHECK(back == c);

  SUBCASE("second write is byte-identical") {
    const std::string path2 = temp_path("roundtrip2.jsonl");
    write_corpus(back, path2);
    CHECK(io::read_file(path) == io::read_file(path2));
  }

  SUBCASE("missing field errors name the line") {
    const std::string bad = temp_path("bad.jsonl");
    std::ofstream out(bad);
    out << R"({"tokens":["a"],"domain":"d0","enabled":[],"split":"train"})" << "\n";
    out << R"({"tokens":["a"],"enabled":[],"split":"train"})" << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(read_corpus(bad), doctest::Contains("line 2"), std::runtime_error);
  }

  SUBCASE("unknown domain against a fixed catalog is rejected") {
    CHECK_THROWS_WITH_AS(read_corpus(path, {"nope"}), doctest::Contains("unknown domain"),
                         std::runtime_error);
    CHECK_NOTHROW(read_corpus(path, c.names()));
  }

  SUBCASE("malformed json is rejected with the line number") {
    const std::string bad = temp_path("badjson.jsonl");
    std::ofstream out(bad);
    out << "{not json}\n";
    out.close();
    CHECK_THROWS_WITH_AS(read_corpus(bad), doctest::Contains("line 1"), std::runtime_error);
  }
}
