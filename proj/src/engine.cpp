#include "cda/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cda/serialize.hpp"

namespace cda {

void AdaptationConfig::validate() const {
  if (initial_epochs < 1 || adapt_epochs < 1)
    throw std::invalid_argument("config: epochs must be at least 1");
  if (initial_lr <= 0.0 || adapt_lr <= 0.0)
    throw std::invalid_argument("config: learning rates must be positive");
  if (initial_batch < 1 || adapt_batch < 1)
    throw std::invalid_argument("config: batch sizes must be at least 1");
  if (exemplar_budget < 1) throw std::invalid_argument("config: exemplar budget must be >= 1");
  if (lambda_dsl < 0.0 || lambda_norm < 0.0 || delta_der < 0.0 || delta_der >= 1.0)
    throw std::invalid_argument("config: bad regularizer values");
  if (full_update && (use_der || use_exemplars))
    throw std::invalid_argument("config: full update is a bare baseline, no der/exemplars");
  hinge.validate();
}

// ---------------------------------------------------------------------------
// Forward / EncodingCache
// ---------------------------------------------------------------------------

std::vector<double> Forward::encode(const std::vector<int>& token_ids) {
  tape_.clear();
  return tape_.value_vec(model_->utterance_node(tape_, token_ids));
}

std::vector<double> Forward::scores(const std::vector<double>& utterance,
                                    const std::vector<int>& enabled) {
  tape_.clear();
  return model_->score_values(tape_, utterance, enabled);
}

std::size_t Forward::predict(const std::vector<double>& utterance,
                             const std::vector<int>& enabled) {
  auto s = scores(utterance, enabled);
  return argmax_predict(s);
}

EncodingCache::EncodingCache(const Corpus& corpus) : corpus_(&corpus) {
  for (int s = 0; s < 3; ++s) {
    enc_[s].resize(corpus.domains.size());
    for (std::size_t d = 0; d < corpus.domains.size(); ++d)
      enc_[s][d].resize(corpus.domains[d].split(static_cast<Split>(s)).size());
  }
}

const std::vector<double>& EncodingCache::get(Forward& fwd, const Model& m, int domain,
                                              Split split, std::size_t index) {
  auto& slot = enc_[static_cast<int>(split)][static_cast<std::size_t>(domain)][index];
  if (slot.empty()) {
    const Sample& s = corpus_->domains[static_cast<std::size_t>(domain)].split(split)[index];
    slot = fwd.encode(tokenize_and_lookup(s.tokens, m.vocab));
  }
  return slot;
}

void EncodingCache::invalidate() {
  for (auto& by_split : enc_)
    for (auto& by_domain : by_split)
      for (auto& e : by_domain) e.clear();
}

// ---------------------------------------------------------------------------
// Corpus to model translation
// ---------------------------------------------------------------------------

std::vector<int> corpus_to_model_ids(const Model& m, const Corpus& corpus) {
  std::vector<int> map(corpus.domains.size(), -1);
  for (std::size_t d = 0; d < corpus.domains.size(); ++d)
    map[d] = m.domain_id(corpus.domains[d].name);
  return map;
}

ModelInput to_model_input(const Model& m, const Sample& s, const std::vector<int>& id_map) {
  ModelInput in;
  in.tokens = tokenize_and_lookup(s.tokens, m.vocab);
  in.truth = id_map[static_cast<std::size_t>(s.domain)];
  for (int e : s.enabled) {
    int mapped = id_map[static_cast<std::size_t>(e)];
    if (mapped >= 0) in.enabled.push_back(mapped);
  }
  return in;
}

double evaluate(const Model& m, const Corpus& corpus, const std::vector<int>& corpus_domains,
                Split split, EncodingCache& cache) {
  auto id_map = corpus_to_model_ids(m, corpus);
  Forward fwd(m);
  std::size_t correct = 0, total = 0;
  for (int d : corpus_domains) {
    if (d < 0 || static_cast<std::size_t>(d) >= corpus.domains.size() || id_map[d] < 0)
      throw std::invalid_argument("evaluate: domain not in the model catalog: " +
                                  (d >= 0 && static_cast<std::size_t>(d) < corpus.domains.size()
                                       ? corpus.domains[static_cast<std::size_t>(d)].name
                                       : std::to_string(d)));
    const auto& samples = corpus.domains[static_cast<std::size_t>(d)].split(split);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      ModelInput in = to_model_input(m, samples[i], id_map);
      const auto& u = cache.get(fwd, m, d, split, i);
      if (fwd.predict(u, in.enabled) == static_cast<std::size_t>(in.truth)) ++correct;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("evaluate: empty evaluation set");
  return static_cast<double>(correct) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Training phases
// ---------------------------------------------------------------------------

namespace {

struct TrainItem {
  ModelInput input;
  const std::vector<double>* cached = nullptr;  // frozen-encoder fast path
};

double dev_accuracy(Forward& fwd, const std::vector<TrainItem>& dev_items) {
  std::size_t correct = 0;
  for (const auto& it : dev_items) {
    std::vector<double> u =
        it.cached ? *it.cached : fwd.encode(it.input.tokens);
    if (fwd.predict(u, it.input.enabled) == static_cast<std::size_t>(it.input.truth)) ++correct;
  }
  return dev_items.empty() ? 0.0 : static_cast<double>(correct) / dev_items.size();
}

void run_phase(Model& m, std::vector<TrainItem>& items, const std::vector<TrainItem>& dev_items,
               std::size_t epochs, double lr, std::size_t batch_size, const AdaptationConfig& cfg,
               const DerConfig* der, Rng& rng) {
  Adam adam(AdamConfig{lr, cfg.beta1, cfg.beta2, cfg.adam_eps});
  ad::Tape tape(&m.params);
  ad::GradientStore grads;
  Forward dev_fwd(m);

  double best_acc = -1.0;
  ad::ParamStore best_params;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(items.begin(), items.end(), rng);
    for (std::size_t start = 0; start < items.size(); start += batch_size) {
      const std::size_t end = std::min(start + batch_size, items.size());
      tape.clear();
      std::vector<int> losses;
      losses.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const TrainItem& it = items[i];
        int u = it.cached ? tape.constant(*it.cached) : m.utterance_node(tape, it.input.tokens);
        int scores = m.scores_from_utterance(tape, u, it.input.enabled);
        int l = m.mode == ScoreMode::Cosine
                    ? hinge_loss_node(tape, scores, static_cast<std::size_t>(it.input.truth),
                                      cfg.hinge)
                    : log_sigmoid_loss_node(tape, scores,
                                            static_cast<std::size_t>(it.input.truth));
        losses.push_back(l);
      }
      int loss = batch_mean(tape, losses);
      if (der) loss = tape.add(loss, der_loss_node(tape, m.table, *der));
      if (!std::isfinite(tape.scalar(loss)))
        throw std::runtime_error("training diverged: non-finite loss");
      grads.clear();
      tape.backward(loss, grads);
      adam.step(m.params, grads);
    }
    if (!dev_items.empty()) {
      double acc = dev_accuracy(dev_fwd, dev_items);
      if (acc > best_acc) {
        best_acc = acc;
        best_params = m.params;
      }
    }
  }
  if (best_acc >= 0.0) m.params = best_params;
}

std::vector<double> domain_mean(const Model& m, const Corpus& corpus, int corpus_domain,
                                EncodingCache& cache, Forward& fwd) {
  const auto& train = corpus.domains[static_cast<std::size_t>(corpus_domain)].train;
  if (train.empty())
    throw std::invalid_argument("domain mean: no training data for " +
                                corpus.domains[static_cast<std::size_t>(corpus_domain)].name);
  std::vector<std::vector<double>> encs;
  encs.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    encs.push_back(cache.get(fwd, m, corpus_domain, Split::Train, i));
  return mean_representation(encs);
}

}  // namespace

Model train_initial(const Corpus& corpus, const std::vector<int>& initial_domains,
                    const EncoderDims& dims, ScoreMode mode, const AdaptationConfig& cfg) {
  cfg.validate();
  if (initial_domains.size() < 2)
    throw std::invalid_argument("train_initial: need at least 2 domains");

  Vocabulary vocab;
  std::vector<std::string> names;
  for (int d : initial_domains) {
    const auto& dd = corpus.domains.at(static_cast<std::size_t>(d));
    if (dd.train.empty() || dd.dev.empty() || dd.test.empty())
      throw std::invalid_argument("train_initial: empty split for domain " + dd.name);
    names.push_back(dd.name);
    for (const auto& s : dd.train)
      for (const auto& tok : s.tokens) vocab.add(tok);
  }

  Model m = Model::create(std::move(vocab), std::move(names), dims, mode,
                          mix_seed(cfg.seed, 0xA110));
  auto id_map = corpus_to_model_ids(m, corpus);

  std::vector<TrainItem> items, dev_items;
  for (int d : initial_domains) {
    for (const auto& s : corpus.domains[static_cast<std::size_t>(d)].train)
      items.push_back({to_model_input(m, s, id_map), nullptr});
    for (const auto& s : corpus.domains[static_cast<std::size_t>(d)].dev)
      dev_items.push_back({to_model_input(m, s, id_map), nullptr});
  }

  Rng rng = make_rng(cfg.seed, 0xA111);
  run_phase(m, items, dev_items, cfg.initial_epochs, cfg.initial_lr, cfg.initial_batch, cfg,
            nullptr, rng);
  m.freeze_base();
  return m;
}

Model retrain_full(const Corpus& corpus, const std::vector<int>& domains_so_far,
                   const EncoderDims& dims, ScoreMode mode, const AdaptationConfig& cfg,
                   std::uint64_t step_tag) {
  AdaptationConfig c = cfg;
  c.seed = mix_seed(cfg.seed, 0xBE00 + step_tag);
  return train_initial(corpus, domains_so_far, dims, mode, c);
}

// ---------------------------------------------------------------------------
// Exemplars
// ---------------------------------------------------------------------------

std::size_t ExemplarStore::total() const {
  std::size_t n = 0;
  for (const auto& l : per_domain) n += l.size();
  return n;
}

std::pair<std::vector<StoredExemplar>, std::vector<double>> select_exemplars(
    const Model& m, const Corpus& corpus, int corpus_domain, std::size_t n, EncodingCache& cache,
    Rng& rng) {
  if (n < 1) throw std::invalid_argument("select_exemplars: budget must be >= 1");
  const auto& dd = corpus.domains.at(static_cast<std::size_t>(corpus_domain));
  if (dd.train.empty())
    throw std::invalid_argument("select_exemplars: no data for domain " + dd.name);

  Forward fwd(m);
  std::vector<std::vector<double>> encs;
  encs.reserve(dd.train.size());
  for (std::size_t i = 0; i < dd.train.size(); ++i)
    encs.push_back(cache.get(fwd, m, corpus_domain, Split::Train, i));
  std::vector<double> mean = mean_representation(encs);

  // Cosine against the mean; equal scores are ordered by a seeded shuffle,
  // so tied candidates are picked at random but reproducibly.
  std::vector<std::size_t> order(dd.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> cos(dd.train.size());
  for (std::size_t i = 0; i < dd.train.size(); ++i) cos[i] = guarded_cosine(encs[i], mean);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cos[a] > cos[b]; });

  auto id_map = corpus_to_model_ids(m, corpus);
  const int model_id = id_map[static_cast<std::size_t>(corpus_domain)];
  if (model_id < 0)
    throw std::invalid_argument("select_exemplars: domain not in catalog: " + dd.name);

  std::vector<StoredExemplar> picked;
  const std::size_t take = std::min(n, dd.train.size());
  picked.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const Sample& s = dd.train[order[i]];
    StoredExemplar ex;
    ex.tokens = s.tokens;
    ex.domain = model_id;
    for (int e : s.enabled)
      ex.enabled_names.push_back(corpus.domains[static_cast<std::size_t>(e)].name);
    ex.encoding = encs[order[i]];
    picked.push_back(std::move(ex));
  }
  return {std::move(picked), std::move(mean)};
}

std::vector<std::size_t> downsample_indices(std::size_t pool_size, std::size_t target, Rng& rng) {
  std::vector<std::size_t> idx(pool_size);
  std::iota(idx.begin(), idx.end(), 0);
  if (pool_size <= target) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(target);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void init_exemplar_store(ExemplarStore& store, const Model& m, const Corpus& corpus,
                         EncodingCache& cache, const AdaptationConfig& cfg) {
  store.budget = cfg.exemplar_budget;
  store.per_domain.clear();
  store.means.clear();
  for (std::size_t i = 0; i < m.catalog.size(); ++i) {
    int cd = corpus.domain_id(m.catalog[i]);
    if (cd < 0)
      throw std::invalid_argument("exemplar store: catalog domain missing from corpus: " +
                                  m.catalog[i]);
    Rng rng = make_rng(cfg.seed, 0xEE00 + i);
    auto [exemplars, mean] = select_exemplars(m, corpus, cd, cfg.exemplar_budget, cache, rng);
    store.per_domain.push_back(std::move(exemplars));
    store.means.push_back(std::move(mean));
  }
}

// ---------------------------------------------------------------------------
// Adaptation episode
// ---------------------------------------------------------------------------

MetricsRecord adapt_domain(Model& m, const Corpus& corpus, int new_domain, ExemplarStore* store,
                           const AdaptationConfig& cfg, EncodingCache& cache, std::size_t step,
                           std::size_t initial_domain_count) {
  cfg.validate();
  const auto& dd = corpus.domains.at(static_cast<std::size_t>(new_domain));
  if (dd.train.empty() || dd.dev.empty() || dd.test.empty())
    throw std::invalid_argument("adapt_domain: empty split for domain " + dd.name);

  const std::size_t k_before = m.domain_count();

  // Exemplar lists for all currently known domains, built once.
  if (store && store->per_domain.empty()) init_exemplar_store(*store, m, corpus, cache, cfg);

  Rng expand_rng = make_rng(cfg.seed, 0xADD0 + step);
  m.expand_for_domain(dd.name, expand_rng);
  if (cfg.full_update)
    for (std::size_t i = 0; i < m.params.size(); ++i) m.params.set_trainable(static_cast<int>(i), true);

  auto id_map = corpus_to_model_ids(m, corpus);
  Forward fwd(m);

  // Similarity weights for the embedding regularizer, from mean utterance
  // representations of the training splits.
  std::optional<DerConfig> der;
  if (cfg.use_der) {
    DerConfig d;
    d.delta_der = cfg.delta_der;
    d.lambda_dsl = cfg.lambda_dsl;
    d.lambda_norm = cfg.lambda_norm;
    if (cfg.plain_lambda) {
      d.lambda.assign(k_before, cfg.lambda_dsl);
    } else {
      std::vector<double> h_new = domain_mean(m, corpus, new_domain, cache, fwd);
      std::vector<std::vector<double>> h_known;
      h_known.reserve(k_before);
      for (std::size_t i = 0; i < k_before; ++i) {
        if (store && i < store->means.size() && !store->means[i].empty()) {
          h_known.push_back(store->means[i]);
        } else {
          int cd = corpus.domain_id(m.catalog[i]);
          if (cd < 0)
            throw std::invalid_argument("adapt_domain: catalog domain missing from corpus: " +
                                        m.catalog[i]);
          h_known.push_back(domain_mean(m, corpus, cd, cache, fwd));
        }
      }
      d.lambda = similarity_weights(h_new, h_known, cfg.lambda_dsl);
    }
    der = std::move(d);
  }

  // Training set: the new domain's train split plus (down-sampled) rehearsal
  // exemplars with their original labels and stored enabled sets.
  const bool cache_ok = cfg.use_encoding_cache && !cfg.full_update;
  std::vector<TrainItem> items;
  for (std::size_t i = 0; i < dd.train.size(); ++i) {
    TrainItem it{to_model_input(m, dd.train[i], id_map), nullptr};
    if (cache_ok) it.cached = &cache.get(fwd, m, new_domain, Split::Train, i);
    items.push_back(std::move(it));
  }
  if (store && cfg.use_exemplars) {
    std::vector<StoredExemplar*> pool;
    for (auto& list : store->per_domain)
      for (auto& ex : list) pool.push_back(&ex);
    std::vector<std::size_t> chosen(pool.size());
    std::iota(chosen.begin(), chosen.end(), 0);
    if (cfg.downsample_exemplars) {
      Rng ds_rng = make_rng(cfg.seed, 0xD500 + step);
      chosen = downsample_indices(pool.size(), dd.train.size(), ds_rng);
    }
    for (std::size_t ci : chosen) {
      StoredExemplar* ex = pool[ci];
      if (ex->encoding.empty()) ex->encoding = fwd.encode(tokenize_and_lookup(ex->tokens, m.vocab));
      TrainItem it;
      it.input.tokens = tokenize_and_lookup(ex->tokens, m.vocab);
      it.input.truth = ex->domain;
      for (const auto& name : ex->enabled_names) {
        int mapped = m.domain_id(name);
        if (mapped >= 0) it.input.enabled.push_back(mapped);
      }
      it.cached = cache_ok ? &ex->encoding : nullptr;
      items.push_back(std::move(it));
    }
  }

  std::vector<TrainItem> dev_items;
  for (std::size_t i = 0; i < dd.dev.size(); ++i) {
    TrainItem it{to_model_input(m, dd.dev[i], id_map), nullptr};
    if (cache_ok) it.cached = &cache.get(fwd, m, new_domain, Split::Dev, i);
    dev_items.push_back(std::move(it));
  }

  Rng train_rng = make_rng(cfg.seed, 0xAD00 + step);
  const auto t0 = std::chrono::steady_clock::now();
  run_phase(m, items, dev_items, cfg.adapt_epochs, cfg.adapt_lr, cfg.adapt_batch, cfg,
            der ? &*der : nullptr, train_rng);
  const auto t1 = std::chrono::steady_clock::now();

  if (cfg.full_update) cache.invalidate();

  // Exemplars for the newly added domain join the pool for later episodes.
  if (store) {
    Rng ex_rng = make_rng(cfg.seed, 0xEE00 + (k_before + step) * 7919);
    auto [exemplars, mean] =
        select_exemplars(m, corpus, new_domain, cfg.exemplar_budget, cache, ex_rng);
    store->per_domain.push_back(std::move(exemplars));
    store->means.push_back(std::move(mean));
  }

  MetricsRecord rec;
  rec.step = step;
  rec.domain = dd.name;
  rec.train_seconds = std::chrono::duration<double>(t1 - t0).count();
  rec.new_domain_acc = evaluate(m, corpus, {new_domain}, Split::Test, cache);
  std::vector<int> added, all;
  for (std::size_t i = 0; i < m.catalog.size(); ++i) {
    int cd = corpus.domain_id(m.catalog[i]);
    all.push_back(cd);
    if (i >= initial_domain_count) added.push_back(cd);
  }
  rec.accumulated_new_acc = evaluate(m, corpus, added, Split::Test, cache);
  rec.all_domain_acc = evaluate(m, corpus, all, Split::Test, cache);
  return rec;
}

// ---------------------------------------------------------------------------
// Exemplar store file
// ---------------------------------------------------------------------------

namespace {
constexpr char kStoreMagic[9] = "CDASTOR1";
}

std::string ExemplarStore::serialize() const {
  std::string out;
  out.append(kStoreMagic, 8);
  io::put_u64(out, 1);
  io::put_u64(out, budget);
  io::put_u64(out, per_domain.size());
  for (std::size_t d = 0; d < per_domain.size(); ++d) {
    const auto& mean = means.at(d);
    io::put_u64(out, mean.size());
    for (double x : mean) io::put_f64(out, x);
    io::put_u64(out, per_domain[d].size());
    for (const auto& ex : per_domain[d]) {
      io::put_u64(out, ex.tokens.size());
      for (const auto& t : ex.tokens) io::put_str(out, t);
      io::put_u64(out, static_cast<std::uint64_t>(ex.domain));
      io::put_u64(out, ex.enabled_names.size());
      for (const auto& e : ex.enabled_names) io::put_str(out, e);
    }
  }
  return out;
}

ExemplarStore ExemplarStore::deserialize(const std::string& bytes) {
  io::Reader r{bytes};
  r.need(8);
  if (bytes.compare(0, 8, kStoreMagic, 8) != 0)
    throw std::runtime_error("not an exemplar store file (bad magic)");
  r.pos = 8;
  if (r.u64() != 1) throw std::runtime_error("unsupported exemplar store version");
  ExemplarStore s;
  s.budget = r.u64();
  std::uint64_t nd = r.u64();
  for (std::uint64_t d = 0; d < nd; ++d) {
    std::vector<double> mean(r.u64());
    for (auto& x : mean) x = r.f64();
    s.means.push_back(std::move(mean));
    std::vector<StoredExemplar> list(r.u64());
    for (auto& ex : list) {
      ex.tokens.resize(r.u64());
      for (auto& t : ex.tokens) t = r.str();
      ex.domain = static_cast<int>(r.u64());
      ex.enabled_names.resize(r.u64());
      for (auto& e : ex.enabled_names) e = r.str();
    }
    s.per_domain.push_back(std::move(list));
  }
  if (!r.done()) throw std::runtime_error("trailing bytes after exemplar store");
  return s;
}

void ExemplarStore::save(const std::string& path) const { io::write_file(path, serialize()); }

ExemplarStore ExemplarStore::load(const std::string& path) {
  return deserialize(io::read_file(path));
}

}  // namespace cda
