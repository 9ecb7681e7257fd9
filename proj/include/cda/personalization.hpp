#pragma once

#include <vector>

#include "cda/rng.hpp"
#include "cda/tape.hpp"

namespace cda {

// Expandable domain embedding table. Rows are individual parameters so that
// freezing and checkpoint diffing work per row; rows below frozen_prefix are
// immutable for the rest of the model's life.
struct DomainTable {
  std::vector<int> rows;  // param ids
  std::size_t frozen_prefix = 0;
  std::size_t dim = 0;

  static DomainTable create(ad::ParamStore& ps, std::size_t domain_count, std::size_t dim,
                            Rng& rng);

  std::size_t size() const { return rows.size(); }

  // Freezes every current row and appends one trainable row.
  void expand(ad::ParamStore& ps, Rng& rng);

  // Attention-weighted summary of the enabled domains: scores are dot
  // products of the scoring-space utterance vector against each enabled
  // embedding, weights are their softmax. Empty enabled set yields a zero
  // vector so downstream shapes are unchanged.
  int summarize(ad::Tape& tape, int scoring_node, const std::vector<int>& enabled) const;

  // Softmax attention weights over the enabled set (diagnostic surface).
  std::vector<double> attention_weights(ad::Tape& tape, int scoring_node,
                                        const std::vector<int>& enabled) const;
};

}  // namespace cda
