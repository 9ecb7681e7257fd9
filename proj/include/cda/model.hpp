#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cda/classifier.hpp"
#include "cda/encoder.hpp"
#include "cda/personalization.hpp"
#include "cda/tape.hpp"

namespace cda {

// One classification input in model space: token ids, ground-truth domain id
// and the enabled-domain ids, all resolved against the model's catalog.
struct ModelInput {
  std::vector<int> tokens;
  int truth = -1;
  std::vector<int> enabled;
};

// The full classifier: encoder, personalized domain summarization and the
// two-layer head, together with the vocabulary and the ordered domain
// catalog. Copying a Model snapshots every parameter.
struct Model {
  ad::ParamStore params;
  Vocabulary vocab;
  std::vector<std::string> catalog;
  EncoderDims dims;
  ScoreMode mode = ScoreMode::Cosine;
  std::uint64_t config_hash = 0;

  Encoder enc;
  DomainTable table;
  HiddenLayer hidden;
  PredictionLayer pred;

  static Model create(Vocabulary vocab, std::vector<std::string> domains, const EncoderDims& dims,
                      ScoreMode mode, std::uint64_t seed);

  std::size_t domain_count() const { return catalog.size(); }
  int domain_id(const std::string& name) const;

  // --- graph builders ---
  int utterance_node(ad::Tape& tape, const std::vector<int>& tokens) const;
  int scores_from_utterance(ad::Tape& tape, int utterance, const std::vector<int>& enabled) const;

  // --- plain evaluation ---
  std::vector<double> score_values(ad::Tape& tape, const std::vector<double>& utterance,
                                   const std::vector<int>& enabled) const;
  std::size_t predict_cached(ad::Tape& tape, const std::vector<double>& utterance,
                             const std::vector<int>& enabled) const;

  // Freezes the encoder, hidden layer and every current table row; the model
  // is then ready for row-by-row expansion.
  void freeze_base();

  // Appends one domain: freezes current rows of both expandable tables and
  // adds a trainable embedding row and prediction row. Rejects names already
  // in the catalog.
  void expand_for_domain(const std::string& name, Rng& rng);

  // Parameter ids trainable right now.
  std::vector<int> trainable_ids() const;

  // --- checkpoint ---
  std::string serialize() const;
  static Model deserialize(const std::string& bytes);
  void save(const std::string& path) const;
  static Model load(const std::string& path);
};

}  // namespace cda
