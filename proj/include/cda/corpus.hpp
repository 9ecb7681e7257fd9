#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cda/rng.hpp"

namespace cda {

enum class Split { Train, Dev, Test };

const char* split_name(Split s);

// One labeled utterance: tokens, ground-truth domain and the user's enabled
// domains. Ids index the owning corpus's domain list.
struct Sample {
  std::vector<std::string> tokens;
  int domain = -1;
  std::vector<int> enabled;

  bool operator==(const Sample&) const = default;
};

struct DomainData {
  std::string name;
  std::vector<Sample> train;
  std::vector<Sample> dev;
  std::vector<Sample> test;

  const std::vector<Sample>& split(Split s) const;
  std::size_t total() const { return train.size() + dev.size() + test.size(); }

  bool operator==(const DomainData&) const = default;
};

struct GeneratorConfig {
  std::size_t domain_count = 45;
  std::size_t vocab_size = 500;
  std::size_t topic_words_per_domain = 8;
  std::size_t utterances_per_domain = 250;
  double utterance_count_jitter = 0.2;  // +/- fraction applied per domain
  std::size_t min_utterance_len = 4;
  std::size_t max_utterance_len = 10;
  double topic_word_prob = 0.8;
  double similar_pair_fraction = 0.5;
  double p_enable_truth = 0.9;
  double distractor_rate = 3.0;  // expected extra enabled domains per sample
  std::uint64_t seed = 1;

  void validate() const;
};

struct Corpus {
  std::vector<DomainData> domains;
  // Domains built to share topic words with an earlier one (generator
  // metadata, not persisted).
  std::vector<std::pair<int, int>> similar_pairs;

  int domain_id(const std::string& name) const;
  std::vector<std::string> names() const;

  bool operator==(const Corpus& o) const { return domains == o.domains; }
};

// Bag-of-words topic corpus: every domain draws most tokens from its own
// topic words and the rest uniformly from the shared vocabulary, so initial
// training sees every word that later domains will use. Enabled sets are
// drawn over the full configured catalog; consumers narrow them to the
// domains known at the time of use.
Corpus generate_corpus(const GeneratorConfig& cfg);

struct SplitSizes {
  std::size_t train, dev, test;
};

// Seeded shuffle then an 8:1:1 cut; sizes land within one sample of the
// exact proportions. Requires at least 10 samples.
void split_8_1_1(std::vector<Sample> samples, Rng& rng, DomainData& out);

// Line-delimited records, one sample per line with tokens, domain name,
// enabled names and split tag. Writing then reading reproduces the corpus.
void write_corpus(const Corpus& corpus, const std::string& path);
Corpus read_corpus(const std::string& path);
// Validating read against a fixed catalog: unknown domain names are errors.
Corpus read_corpus(const std::string& path, const std::vector<std::string>& catalog);

}  // namespace cda
