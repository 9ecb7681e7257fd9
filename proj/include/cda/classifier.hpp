#pragma once

#include <span>
#include <vector>

#include "cda/rng.hpp"
#include "cda/tape.hpp"

namespace cda {

enum class ScoreMode { Cosine, LinearDot };

const char* score_mode_name(ScoreMode m);
ScoreMode score_mode_from_name(const std::string& s);

// First classifier layer: fully connected over the concatenated utterance
// and summary vectors, SELU activation.
struct HiddenLayer {
  int w = -1;
  int b = -1;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;

  static HiddenLayer create(ad::ParamStore& ps, std::size_t in_dim, std::size_t out_dim, Rng& rng);
  int forward(ad::Tape& tape, int input_node) const;
  void freeze(ad::ParamStore& ps) const;
};

// Prediction layer: one weight row per domain. Cosine mode scores each
// domain by the cosine of the hidden vector against its row, so scores live
// in [-1, 1] and row norms cannot buy score. LinearDot is the plain dot
// product baseline.
struct PredictionLayer {
  std::vector<int> rows;  // param ids
  std::size_t frozen_prefix = 0;
  std::size_t dim = 0;

  static PredictionLayer create(ad::ParamStore& ps, std::size_t domain_count, std::size_t dim,
                                Rng& rng);

  std::size_t size() const { return rows.size(); }

  int scores(ad::Tape& tape, int hidden_node, ScoreMode mode) const;

  // Freezes every current row and appends one trainable row.
  void expand(ad::ParamStore& ps, Rng& rng);
};

// Index of the maximum score; ties break toward the lowest index.
std::size_t argmax_predict(std::span<const double> scores);

}  // namespace cda
