#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "cda/rng.hpp"
#include "cda/tape.hpp"

namespace cda {

// Token to index map with a reserved unknown slot at index 0. New words seen
// after initial training always map to the unknown index.
struct Vocabulary {
  static constexpr const char* kUnkToken = "<unk>";
  static constexpr int kUnkIndex = 0;

  std::vector<std::string> tokens{kUnkToken};
  std::unordered_map<std::string, int> index{{kUnkToken, kUnkIndex}};

  int add(const std::string& tok);
  int lookup(const std::string& tok) const;
  std::size_t size() const { return tokens.size(); }
};

std::vector<int> tokenize_and_lookup(const std::vector<std::string>& utterance,
                                     const Vocabulary& vocab);

struct EncoderDims {
  std::size_t word_dim = 16;
  std::size_t lstm_hidden = 16;  // per direction; utterance vector is twice this
  std::size_t summary_dim = 64;
  std::size_t hidden_dim = 64;

  std::size_t utterance_dim() const { return 2 * lstm_hidden; }
};

// Word embeddings plus a single-layer bidirectional LSTM. The utterance
// vector is the concatenation of the two directions' final hidden states.
// Gate blocks in the fused preactivation are ordered [input, forget,
// candidate, output]. When the domain summary dimension differs from the
// utterance dimension, a linear projection into scoring space is learned
// alongside and frozen with the rest.
struct Encoder {
  std::size_t word_dim = 0;
  std::size_t hidden = 0;
  int embed = -1;
  int w_fwd = -1, b_fwd = -1;
  int w_bwd = -1, b_bwd = -1;
  int proj = -1;  // -1 when scoring space equals utterance space

  static Encoder create(ad::ParamStore& ps, std::size_t vocab_size, const EncoderDims& dims,
                        Rng& rng);

  std::size_t utterance_dim() const { return 2 * hidden; }

  // Records the full recurrence on the tape; returns the utterance node.
  int encode(ad::Tape& tape, const std::vector<int>& token_ids) const;

  // Projects an utterance node into domain-scoring space (identity when no
  // projection is configured).
  int to_scoring_space(ad::Tape& tape, int utterance_node) const;

  std::vector<int> param_ids() const;
  void freeze(ad::ParamStore& ps) const;
  bool frozen(const ad::ParamStore& ps) const;
};

}  // namespace cda
