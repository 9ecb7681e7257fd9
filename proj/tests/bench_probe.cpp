// Ad-hoc timing probe, not part of the test suites.
#include <chrono>
#include <cstdio>

#include "cda/engine.hpp"

using namespace cda;

int main() {
  GeneratorConfig g;
  g.domain_count = 45;
  g.seed = 1;
  auto t0 = std::chrono::steady_clock::now();
  Corpus corpus = generate_corpus(g);
  auto t1 = std::chrono::steady_clock::now();
  std::printf("generate: %.2fs\n", std::chrono::duration<double>(t1 - t0).count());

  AdaptationConfig cfg;
  cfg.initial_epochs = 2;  // probe
  std::vector<int> init_ids;
  for (int i = 0; i < 30; ++i) init_ids.push_back(i);

  std::size_t n_train = 0;
  for (int d : init_ids) n_train += corpus.domains[d].train.size();

  t0 = std::chrono::steady_clock::now();
  Model m = train_initial(corpus, init_ids, EncoderDims{}, ScoreMode::Cosine, cfg);
  t1 = std::chrono::steady_clock::now();
  double secs = std::chrono::duration<double>(t1 - t0).count();
  std::printf("2 epochs over %zu samples: %.2fs  (%.1f us/sample-step incl dev eval)\n", n_train,
              secs, 1e6 * secs / (2.0 * n_train));

  EncodingCache cache(corpus);
  t0 = std::chrono::steady_clock::now();
  double acc = evaluate(m, corpus, init_ids, Split::Test, cache);
  t1 = std::chrono::steady_clock::now();
  std::printf("test acc after 2 epochs: %.3f, eval(750 fresh encodes): %.2fs\n", acc,
              std::chrono::duration<double>(t1 - t0).count());

  ExemplarStore store;
  t0 = std::chrono::steady_clock::now();
  MetricsRecord r = adapt_domain(m, corpus, 30, &store, cfg, cache, 1, 30);
  t1 = std::chrono::steady_clock::now();
  std::printf("adapt episode total: %.2fs (train %.2fs), new acc %.3f all acc %.3f\n",
              std::chrono::duration<double>(t1 - t0).count(), r.train_seconds, r.new_domain_acc,
              r.all_domain_acc);
  return 0;
}
