#include "cda/personalization.hpp"

#include <stdexcept>
#include <string>

namespace cda {

namespace {

Tensor uniform_row(Rng& rng, std::size_t dim, double range = 0.1) {
  Tensor t = Tensor::vec(dim);
  for (auto& x : t.v) x = uniform(rng, -range, range);
  return t;
}

}  // namespace

DomainTable DomainTable::create(ad::ParamStore& ps, std::size_t domain_count, std::size_t dim,
                                Rng& rng) {
  DomainTable t;
  t.dim = dim;
  t.rows.reserve(domain_count);
  for (std::size_t i = 0; i < domain_count; ++i)
    t.rows.push_back(ps.add("domain_embed_" + std::to_string(i), uniform_row(rng, dim)));
  return t;
}

void DomainTable::expand(ad::ParamStore& ps, Rng& rng) {
  for (int id : rows) ps.set_trainable(id, false);
  frozen_prefix = rows.size();
  rows.push_back(ps.add("domain_embed_" + std::to_string(rows.size()), uniform_row(rng, dim)));
}

int DomainTable::summarize(ad::Tape& tape, int scoring_node,
                           const std::vector<int>& enabled) const {
  if (enabled.empty()) {
    std::vector<double> zeros(dim, 0.0);
    return tape.constant(zeros);
  }
  std::vector<int> row_params;
  row_params.reserve(enabled.size());
  for (int e : enabled) {
    if (e < 0 || static_cast<std::size_t>(e) >= rows.size())
      throw std::invalid_argument("summarize_enabled: domain id " + std::to_string(e) +
                                  " out of range for " + std::to_string(rows.size()) + " domains");
    row_params.push_back(rows[static_cast<std::size_t>(e)]);
  }
  int rs = tape.rowset(std::move(row_params));
  int scores = tape.score_rows(scoring_node, rs, /*cosine_mode=*/false);
  int weights = tape.softmax(scores);
  return tape.rows_weighted_sum(weights, rs);
}

std::vector<double> DomainTable::attention_weights(ad::Tape& tape, int scoring_node,
                                                   const std::vector<int>& enabled) const {
  if (enabled.empty()) return {};
  std::vector<int> row_params;
  for (int e : enabled) row_params.push_back(rows.at(static_cast<std::size_t>(e)));
  int rs = tape.rowset(std::move(row_params));
  int scores = tape.score_rows(scoring_node, rs, false);
  return tape.value_vec(tape.softmax(scores));
}

}  // namespace cda
