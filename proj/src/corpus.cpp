#include "cda/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cda {

using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

const std::vector<Sample>& DomainData::split(Split s) const {
  switch (s) {
    case Split::Train: return train;
    case Split::Dev: return dev;
    case Split::Test: return test;
  }
  return train;
}

void GeneratorConfig::validate() const {
  if (domain_count < 1 || vocab_size < 1 || topic_words_per_domain < 1 ||
      utterances_per_domain < 1)
    throw std::invalid_argument("generator config: counts must be at least 1");
  if (min_utterance_len < 1 || max_utterance_len < min_utterance_len)
    throw std::invalid_argument("generator config: bad utterance length range");
  for (double p : {topic_word_prob, similar_pair_fraction, p_enable_truth})
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("generator config: probabilities must be in [0, 1]");
  if (distractor_rate < 0.0 || utterance_count_jitter < 0.0 || utterance_count_jitter >= 1.0)
    throw std::invalid_argument("generator config: bad rate");
  if (vocab_size < domain_count * topic_words_per_domain + 10)
    throw std::invalid_argument(
        "generator config: vocabulary too small for the requested topic words (need at least " +
        std::to_string(domain_count * topic_words_per_domain + 10) + ")");
}

int Corpus::domain_id(const std::string& name) const {
  for (std::size_t i = 0; i < domains.size(); ++i)
    if (domains[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> Corpus::names() const {
  std::vector<std::string> out;
  out.reserve(domains.size());
  for (const auto& d : domains) out.push_back(d.name);
  return out;
}

namespace {

std::string word_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "w%04zu", i);
  return buf;
}

std::string domain_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "dom%03zu", i);
  return buf;
}

}  // namespace

void split_8_1_1(std::vector<Sample> samples, Rng& rng, DomainData& out) {
  const std::size_t n = samples.size();
  if (n < 10) throw std::invalid_argument("split_8_1_1: need at least 10 samples, got " +
                                          std::to_string(n));
  std::shuffle(samples.begin(), samples.end(), rng);
  const auto tenth = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 0.1));
  const std::size_t n_test = tenth, n_dev = tenth;
  const std::size_t n_train = n - n_dev - n_test;
  out.train.assign(samples.begin(), samples.begin() + n_train);
  out.dev.assign(samples.begin() + n_train, samples.begin() + n_train + n_dev);
  out.test.assign(samples.begin() + n_train + n_dev, samples.end());
}

Corpus generate_corpus(const GeneratorConfig& cfg) {
  cfg.validate();
  Corpus corpus;

  // Topic word assignment. A similar domain copies half of an earlier
  // domain's topic words; everyone else gets fresh words.
  Rng topic_rng = make_rng(cfg.seed, 0x10);
  std::vector<std::vector<std::size_t>> topics(cfg.domain_count);
  std::size_t next_word = 0;
  for (std::size_t d = 0; d < cfg.domain_count; ++d) {
    const std::size_t want = cfg.topic_words_per_domain;
    if (d > 0 && uniform(topic_rng, 0.0, 1.0) < cfg.similar_pair_fraction) {
      const std::size_t partner = uniform_index(topic_rng, d);
      corpus.similar_pairs.emplace_back(static_cast<int>(d), static_cast<int>(partner));
      std::vector<std::size_t> pool = topics[partner];
      std::shuffle(pool.begin(), pool.end(), topic_rng);
      const std::size_t shared = want / 2;
      topics[d].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(shared));
      for (std::size_t i = shared; i < want; ++i) topics[d].push_back(next_word++);
    } else {
      for (std::size_t i = 0; i < want; ++i) topics[d].push_back(next_word++);
    }
  }

  Rng size_rng = make_rng(cfg.seed, 0x11);
  corpus.domains.resize(cfg.domain_count);
  for (std::size_t d = 0; d < cfg.domain_count; ++d) {
    const double jitter = cfg.utterance_count_jitter == 0.0
                              ? 0.0
                              : uniform(size_rng, -cfg.utterance_count_jitter,
                                        cfg.utterance_count_jitter);
    const auto count = std::max<std::size_t>(
        10, static_cast<std::size_t>(
                std::llround(static_cast<double>(cfg.utterances_per_domain) * (1.0 + jitter))));

    Rng rng = make_rng(cfg.seed, 0x1000 + d);
    std::vector<Sample> samples;
    samples.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
      Sample smp;
      smp.domain = static_cast<int>(d);
      const std::size_t len =
          cfg.min_utterance_len +
          uniform_index(rng, cfg.max_utterance_len - cfg.min_utterance_len + 1);
      for (std::size_t i = 0; i < len; ++i) {
        if (uniform(rng, 0.0, 1.0) < cfg.topic_word_prob)
          smp.tokens.push_back(word_name(topics[d][uniform_index(rng, topics[d].size())]));
        else
          smp.tokens.push_back(word_name(uniform_index(rng, cfg.vocab_size)));
      }
      std::set<int> enabled;
      if (uniform(rng, 0.0, 1.0) < cfg.p_enable_truth) enabled.insert(smp.domain);
      auto extra = static_cast<std::size_t>(cfg.distractor_rate);
      if (uniform(rng, 0.0, 1.0) < cfg.distractor_rate - std::floor(cfg.distractor_rate)) ++extra;
      for (std::size_t i = 0; i < extra && cfg.domain_count > 1; ++i) {
        std::size_t pick = uniform_index(rng, cfg.domain_count - 1);
        if (pick >= static_cast<std::size_t>(smp.domain)) ++pick;  // skip the truth
        enabled.insert(static_cast<int>(pick));
      }
      smp.enabled.assign(enabled.begin(), enabled.end());
      samples.push_back(std::move(smp));
    }

    corpus.domains[d].name = domain_name(d);
    Rng split_rng = make_rng(cfg.seed, 0x2000 + d);
    split_8_1_1(std::move(samples), split_rng, corpus.domains[d]);
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

namespace {

json sample_to_json(const Sample& s, const Corpus& c, Split split) {
  json j;
  j["tokens"] = s.tokens;
  j["domain"] = c.domains[static_cast<std::size_t>(s.domain)].name;
  json en = json::array();
  for (int e : s.enabled) en.push_back(c.domains[static_cast<std::size_t>(e)].name);
  j["enabled"] = en;
  j["split"] = split_name(split);
  return j;
}

struct RawRecord {
  std::vector<std::string> tokens;
  std::string domain;
  std::vector<std::string> enabled;
  std::string split;
  std::size_t line_no = 0;
};

RawRecord parse_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + e.what());
  }
  RawRecord r;
  try {
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.domain = j.at("domain").get<std::string>();
    r.enabled = j.at("enabled").get<std::vector<std::string>>();
    r.split = j.at("split").get<std::string>();
  } catch (const json::exception& e) {
    throw std::runtime_error("corpus line " + std::to_string(line_no) + ": missing field: " +
                             e.what());
  }
  if (r.tokens.empty())
    throw std::runtime_error("corpus line " + std::to_string(line_no) + ": empty token list");
  if (r.split != "train" && r.split != "dev" && r.split != "test")
    throw std::runtime_error("corpus line " + std::to_string(line_no) + ": bad split tag '" +
                             r.split + "'");
  return r;
}

Corpus read_corpus_impl(const std::string& path, const std::vector<std::string>* catalog) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);

  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    RawRecord r = parse_line(line, line_no);
    r.line_no = line_no;
    records.push_back(std::move(r));
  }

  Corpus corpus;
  std::vector<std::string> order;
  if (catalog) {
    order = *catalog;
  } else {
    for (const auto& r : records)
      if (std::find(order.begin(), order.end(), r.domain) == order.end()) order.push_back(r.domain);
  }
  corpus.domains.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) corpus.domains[i].name = order[i];

  auto id_of = [&](const std::string& name, std::size_t ln) {
    int id = corpus.domain_id(name);
    if (id < 0)
      throw std::runtime_error("corpus line " + std::to_string(ln) + ": unknown domain '" + name +
                               "'");
    return id;
  };

  for (const auto& r : records) {
    Sample s;
    s.tokens = r.tokens;
    s.domain = id_of(r.domain, r.line_no);
    std::set<int> en;
    for (const auto& e : r.enabled) en.insert(id_of(e, r.line_no));
    s.enabled.assign(en.begin(), en.end());
    auto& dd = corpus.domains[static_cast<std::size_t>(s.domain)];
    if (r.split == "train")
      dd.train.push_back(std::move(s));
    else if (r.split == "dev")
      dd.dev.push_back(std::move(s));
    else
      dd.test.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace

void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& d : corpus.domains) {
    for (const auto& s : d.train) out << sample_to_json(s, corpus, Split::Train).dump() << '\n';
    for (const auto& s : d.dev) out << sample_to_json(s, corpus, Split::Dev).dump() << '\n';
    for (const auto& s : d.test) out << sample_to_json(s, corpus, Split::Test).dump() << '\n';
  }
  if (!out) throw std::runtime_error("short write to corpus file: " + path);
}

Corpus read_corpus(const std::string& path) { return read_corpus_impl(path, nullptr); }

Corpus read_corpus(const std::string& path, const std::vector<std::string>& catalog) {
  return read_corpus_impl(path, &catalog);
}

}  // namespace cda
