#pragma once

// Shared fixtures: desk-size model dims and corpora small enough for
// unit-test turnaround.

#include <vector>

#include "cda/corpus.hpp"
#include "cda/engine.hpp"
#include "cda/model.hpp"

namespace testutil {

inline cda::EncoderDims tiny_dims() {
  cda::EncoderDims d;
  d.word_dim = 4;
  d.lstm_hidden = 4;  // utterance vector 8
  d.summary_dim = 8;
  d.hidden_dim = 8;
  return d;
}

inline cda::GeneratorConfig tiny_gen(std::size_t domains, std::uint64_t seed = 5) {
  cda::GeneratorConfig g;
  g.domain_count = domains;
  g.vocab_size = domains * 6 + 40;
  g.topic_words_per_domain = 6;
  g.utterances_per_domain = 60;
  g.utterance_count_jitter = 0.0;
  g.similar_pair_fraction = 0.0;
  g.seed = seed;
  return g;
}

inline cda::AdaptationConfig tiny_cfg(std::uint64_t seed = 9) {
  cda::AdaptationConfig c;
  c.initial_epochs = 15;
  c.initial_lr = 0.01;  // few batches per epoch at this scale
  c.initial_batch = 16;
  c.adapt_epochs = 6;
  c.adapt_batch = 8;
  c.exemplar_budget = 5;
  c.seed = seed;
  return c;
}

// Independent step-by-step recurrence over the encoder tensors; reimplements
// the gate math with plain loops so the tape has something to disagree with.
inline std::vector<double> naive_bilstm(const cda::Model& m, const std::vector<int>& ids) {
  const auto& ps = m.params;
  const cda::Tensor& embed = ps[m.enc.embed].value;
  const std::size_t H = m.enc.hidden;
  const std::size_t D = m.enc.word_dim;

  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

  auto run = [&](int w_id, int b_id, bool reversed) {
    const cda::Tensor& W = ps[w_id].value;
    const cda::Tensor& B = ps[b_id].value;
    std::vector<double> h(H, 0.0), c(H, 0.0);
    for (std::size_t step = 0; step < ids.size(); ++step) {
      const std::size_t pos = reversed ? ids.size() - 1 - step : step;
      std::vector<double> z(D + H);
      for (std::size_t i = 0; i < D; ++i)
        z[i] = embed.at(static_cast<std::size_t>(ids[pos]), i);
      for (std::size_t i = 0; i < H; ++i) z[D + i] = h[i];
      std::vector<double> pre(4 * H);
      for (std::size_t r = 0; r < 4 * H; ++r) {
        double s = B.v[r];
        for (std::size_t cidx = 0; cidx < D + H; ++cidx) s += W.at(r, cidx) * z[cidx];
        pre[r] = s;
      }
      for (std::size_t j = 0; j < H; ++j) {
        double ig = sigmoid(pre[j]);
        double fg = sigmoid(pre[H + j]);
        double gg = std::tanh(pre[2 * H + j]);
        double og = sigmoid(pre[3 * H + j]);
        c[j] = fg * c[j] + ig * gg;
        h[j] = og * std::tanh(c[j]);
      }
    }
    return h;
  };

  std::vector<double> fwd = run(m.enc.w_fwd, m.enc.b_fwd, false);
  std::vector<double> bwd = run(m.enc.w_bwd, m.enc.b_bwd, true);
  fwd.insert(fwd.end(), bwd.begin(), bwd.end());
  return fwd;
}

// Plurality-by-word-count classifier trained on the train split; the
// separability oracle for generated corpora.
struct BagOfWordsOracle {
  std::unordered_map<std::string, std::vector<double>> counts;
  std::size_t domains = 0;

  static BagOfWordsOracle fit(const cda::Corpus& corpus, const std::vector<int>& domain_ids) {
    BagOfWordsOracle o;
    o.domains = corpus.domains.size();
    for (int d : domain_ids)
      for (const auto& s : corpus.domains[static_cast<std::size_t>(d)].train)
        for (const auto& tok : s.tokens) {
          auto& row = o.counts[tok];
          if (row.empty()) row.assign(o.domains, 0.0);
          row[static_cast<std::size_t>(d)] += 1.0;
        }
    return o;
  }

  int predict(const cda::Sample& s) const {
    std::vector<double> score(domains, 0.0);
    for (const auto& tok : s.tokens) {
      auto it = counts.find(tok);
      if (it == counts.end()) continue;
      for (std::size_t d = 0; d < domains; ++d) score[d] += it->second[d];
    }
    int best = 0;
    for (std::size_t d = 1; d < domains; ++d)
      if (score[d] > score[static_cast<std::size_t>(best)]) best = static_cast<int>(d);
    return best;
  }

  double test_accuracy(const cda::Corpus& corpus, const std::vector<int>& domain_ids) const {
    std::size_t correct = 0, total = 0;
    for (int d : domain_ids)
      for (const auto& s : corpus.domains[static_cast<std::size_t>(d)].test) {
        if (predict(s) == s.domain) ++correct;
        ++total;
      }
    return static_cast<double>(correct) / static_cast<double>(total);
  }
};

}  // namespace testutil
