#include "cda/classifier.hpp"

#include <stdexcept>
#include <string>

namespace cda {

const char* score_mode_name(ScoreMode m) {
  return m == ScoreMode::Cosine ? "cosine" : "linear";
}

ScoreMode score_mode_from_name(const std::string& s) {
  if (s == "cosine") return ScoreMode::Cosine;
  if (s == "linear") return ScoreMode::LinearDot;
  throw std::invalid_argument("unknown score mode: " + s);
}

namespace {

Tensor uniform_tensor(Rng& rng, std::vector<std::size_t> shape, double range = 0.1) {
  Tensor t;
  t.shape = std::move(shape);
  std::size_t n = 1;
  for (auto d : t.shape) n *= d;
  t.v.resize(n);
  for (auto& x : t.v) x = uniform(rng, -range, range);
  return t;
}

}  // namespace

HiddenLayer HiddenLayer::create(ad::ParamStore& ps, std::size_t in_dim, std::size_t out_dim,
                                Rng& rng) {
  HiddenLayer l;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  l.w = ps.add("hidden_w", uniform_tensor(rng, {out_dim, in_dim}));
  l.b = ps.add("hidden_b", uniform_tensor(rng, {out_dim}));
  return l;
}

int HiddenLayer::forward(ad::Tape& tape, int input_node) const {
  if (tape.value_len(input_node) != in_dim)
    throw std::invalid_argument("forward_hidden: input length " +
                                std::to_string(tape.value_len(input_node)) + " does not match " +
                                std::to_string(in_dim));
  return tape.selu(tape.add(tape.matvec(tape.param(w), input_node), tape.param(b)));
}

void HiddenLayer::freeze(ad::ParamStore& ps) const {
  ps.set_trainable(w, false);
  ps.set_trainable(b, false);
}

PredictionLayer PredictionLayer::create(ad::ParamStore& ps, std::size_t domain_count,
                                        std::size_t dim, Rng& rng) {
  PredictionLayer l;
  l.dim = dim;
  l.rows.reserve(domain_count);
  for (std::size_t i = 0; i < domain_count; ++i)
    l.rows.push_back(ps.add("pred_row_" + std::to_string(i), uniform_tensor(rng, {dim})));
  return l;
}

int PredictionLayer::scores(ad::Tape& tape, int hidden_node, ScoreMode mode) const {
  int rs = tape.rowset(rows);
  return tape.score_rows(hidden_node, rs, mode == ScoreMode::Cosine);
}

void PredictionLayer::expand(ad::ParamStore& ps, Rng& rng) {
  for (int id : rows) ps.set_trainable(id, false);
  frozen_prefix = rows.size();
  rows.push_back(ps.add("pred_row_" + std::to_string(rows.size()), uniform_tensor(rng, {dim})));
}

std::size_t argmax_predict(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("argmax_predict: empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

}  // namespace cda
