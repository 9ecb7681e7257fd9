#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cda/corpus.hpp"
#include "cda/losses.hpp"
#include "cda/model.hpp"
#include "cda/optimizer.hpp"

namespace cda {

// Every knob a training run needs. Initial-phase values follow the large
// scale recipe (20 epochs, lr 1e-3), adaptation runs 10 epochs at lr 1e-2;
// batch sizes are scaled down to the synthetic corpus.
struct AdaptationConfig {
  std::size_t initial_epochs = 20;
  double initial_lr = 1e-3;
  std::size_t initial_batch = 64;

  std::size_t adapt_epochs = 25;
  double adapt_lr = 1e-2;
  std::size_t adapt_batch = 32;

  HingeThresholds hinge;
  double delta_der = 0.1;
  double lambda_dsl = 1.0;
  double lambda_norm = 0.4;
  bool plain_lambda = false;  // lambda_i = lambda_dsl, skipping the similarity weighting

  std::size_t exemplar_budget = 20;  // per-domain exemplar list size N
  bool use_exemplars = true;
  bool downsample_exemplars = true;
  bool use_der = true;
  bool full_update = false;  // adapt every parameter (the unfrozen baseline)

  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;

  // Feed frozen-encoder utterance vectors to the adaptation graph as
  // constants instead of re-recording the recurrence. Bit-identical results
  // either way; off is only useful for checking that claim.
  bool use_encoding_cache = true;

  void validate() const;
};

struct MetricsRecord {
  std::size_t step = 0;  // 1-based adaptation step
  std::string domain;
  double new_domain_acc = 0.0;
  double accumulated_new_acc = 0.0;
  double all_domain_acc = 0.0;
  double train_seconds = 0.0;  // training time only, evaluation excluded
};

// One rehearsal sample: original ground truth plus the full generated
// enabled-domain names. At rehearsal time the names are narrowed to the
// model's current catalog, so exemplars see the same enabled-set
// distribution the evaluation does (newly added domains appear as
// distractors in both).
struct StoredExemplar {
  std::vector<std::string> tokens;
  int domain = -1;
  std::vector<std::string> enabled_names;
  std::vector<double> encoding;  // cached, rebuilt after load
};

struct ExemplarStore {
  std::size_t budget = 20;
  std::vector<std::vector<StoredExemplar>> per_domain;
  std::vector<std::vector<double>> means;  // mean utterance representation per domain

  std::size_t domain_count() const { return per_domain.size(); }
  std::size_t total() const;

  std::string serialize() const;
  static ExemplarStore deserialize(const std::string& bytes);
  void save(const std::string& path) const;
  static ExemplarStore load(const std::string& path);
};

// Records one sample's forward pass; reused across calls so the tape arena
// stays warm.
class Forward {
 public:
  explicit Forward(const Model& m) : model_(&m), tape_(&m.params) {}

  std::vector<double> encode(const std::vector<int>& token_ids);
  std::vector<double> scores(const std::vector<double>& utterance,
                             const std::vector<int>& enabled);
  std::size_t predict(const std::vector<double>& utterance, const std::vector<int>& enabled);

  ad::Tape& tape() { return tape_; }

 private:
  const Model* model_;
  ad::Tape tape_;
};

// Lazy utterance-encoding cache over one corpus. Valid while the encoder is
// frozen; invalidate() after any update that can touch encoder weights.
class EncodingCache {
 public:
  explicit EncodingCache(const Corpus& corpus);
  const std::vector<double>& get(Forward& fwd, const Model& m, int domain, Split split,
                                 std::size_t index);
  void invalidate();

 private:
  const Corpus* corpus_;
  std::vector<std::vector<std::vector<double>>> enc_[3];
};

// Corpus-to-model domain id translation; unknown domains map to -1 and are
// dropped from enabled sets (they are not part of the catalog yet).
std::vector<int> corpus_to_model_ids(const Model& m, const Corpus& corpus);

ModelInput to_model_input(const Model& m, const Sample& s, const std::vector<int>& id_map);

// Fraction of test samples whose argmax prediction matches the ground truth.
// Rejects domains missing from the model's catalog.
double evaluate(const Model& m, const Corpus& corpus, const std::vector<int>& corpus_domains,
                Split split, EncodingCache& cache);

// Joint training on the given domains (arrival order): vocabulary built from
// their train splits, dev picks the best epoch, then the whole model is
// frozen as the base for adaptation.
Model train_initial(const Corpus& corpus, const std::vector<int>& initial_domains,
                    const EncoderDims& dims, ScoreMode mode, const AdaptationConfig& cfg);

// Full retrain on all domains seen so far: the reference ceiling.
Model retrain_full(const Corpus& corpus, const std::vector<int>& domains_so_far,
                   const EncoderDims& dims, ScoreMode mode, const AdaptationConfig& cfg,
                   std::uint64_t step_tag);

// Top-N utterances of the domain's train split by cosine against the mean
// representation, ties broken by a seeded shuffle. Returns the exemplars
// (with enabled sets snapshot against the current catalog) and the mean.
std::pair<std::vector<StoredExemplar>, std::vector<double>> select_exemplars(
    const Model& m, const Corpus& corpus, int corpus_domain, std::size_t n, EncodingCache& cache,
    Rng& rng);

// Uniform subset of size target (everything if the pool is small), seeded.
std::vector<std::size_t> downsample_indices(std::size_t pool_size, std::size_t target, Rng& rng);

// Populates one exemplar list per catalog domain (used before the first
// adaptation).
void init_exemplar_store(ExemplarStore& store, const Model& m, const Corpus& corpus,
                         EncodingCache& cache, const AdaptationConfig& cfg);

// One online adaptation episode: expand the catalog by the new domain,
// compute the similarity weights, train the two new rows on the new data
// plus rehearsal exemplars, pick the best epoch on the new domain's dev
// split, then append the new domain's exemplars to the store.
MetricsRecord adapt_domain(Model& m, const Corpus& corpus, int new_domain, ExemplarStore* store,
                           const AdaptationConfig& cfg, EncodingCache& cache, std::size_t step,
                           std::size_t initial_domain_count);

}  // namespace cda
