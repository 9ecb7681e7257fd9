#include "cda/encoder.hpp"

#include <stdexcept>

namespace cda {

int Vocabulary::add(const std::string& tok) {
  auto it = index.find(tok);
  if (it != index.end()) return it->second;
  int id = static_cast<int>(tokens.size());
  tokens.push_back(tok);
  index.emplace(tok, id);
  return id;
}

int Vocabulary::lookup(const std::string& tok) const {
  auto it = index.find(tok);
  return it == index.end() ? kUnkIndex : it->second;
}

std::vector<int> tokenize_and_lookup(const std::vector<std::string>& utterance,
                                     const Vocabulary& vocab) {
  if (utterance.empty()) throw std::invalid_argument("tokenize_and_lookup: empty utterance");
  std::vector<int> ids;
  ids.reserve(utterance.size());
  for (const auto& tok : utterance) ids.push_back(vocab.lookup(tok));
  return ids;
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

Encoder Encoder::create(ad::ParamStore& ps, std::size_t vocab_size, const EncoderDims& dims,
                        Rng& rng) {
  Encoder e;
  e.word_dim = dims.word_dim;
  e.hidden = dims.lstm_hidden;
  const std::size_t gate_rows = 4 * e.hidden;
  const std::size_t gate_cols = e.word_dim + e.hidden;
  e.embed = ps.add("word_embed", uniform_tensor(rng, {vocab_size, e.word_dim}));
  e.w_fwd = ps.add("lstm_fwd_w", uniform_tensor(rng, {gate_rows, gate_cols}));
  e.b_fwd = ps.add("lstm_fwd_b", Tensor::vec(gate_rows, 0.0));
  e.w_bwd = ps.add("lstm_bwd_w", uniform_tensor(rng, {gate_rows, gate_cols}));
  e.b_bwd = ps.add("lstm_bwd_b", Tensor::vec(gate_rows, 0.0));
  if (dims.summary_dim != dims.utterance_dim())
    e.proj = ps.add("score_proj", uniform_tensor(rng, {dims.summary_dim, dims.utterance_dim()}));
  return e;
}

int Encoder::encode(ad::Tape& tape, const std::vector<int>& token_ids) const {
  if (token_ids.empty()) throw std::invalid_argument("encode_utterance: empty token sequence");

  const std::size_t h = hidden;
  std::vector<double> zeros(h, 0.0);

  auto run_direction = [&](int w, int b, bool backward_pass) {
    int h_prev = tape.constant(zeros);
    int c_prev = tape.constant(zeros);
    int wn = tape.param(w);
    int bn = tape.param(b);
    const std::size_t n = token_ids.size();
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t pos = backward_pass ? n - 1 - step : step;
      int x = tape.gather(embed, static_cast<std::size_t>(token_ids[pos]));
      int z = tape.concat(x, h_prev);
      int pre = tape.add(tape.matvec(wn, z), bn);
      int hc = tape.lstm_cell(pre, c_prev);
      h_prev = tape.slice(hc, 0, h);
      c_prev = tape.slice(hc, h, h);
    }
    return h_prev;
  };

  int fwd = run_direction(w_fwd, b_fwd, false);
  int bwd = run_direction(w_bwd, b_bwd, true);
  return tape.concat(fwd, bwd);
}

int Encoder::to_scoring_space(ad::Tape& tape, int utterance_node) const {
  if (proj < 0) return utterance_node;
  return tape.matvec(tape.param(proj), utterance_node);
}

std::vector<int> Encoder::param_ids() const {
  std::vector<int> ids{embed, w_fwd, b_fwd, w_bwd, b_bwd};
  if (proj >= 0) ids.push_back(proj);
  return ids;
}

void Encoder::freeze(ad::ParamStore& ps) const {
  for (int id : param_ids()) ps.set_trainable(id, false);
}

bool Encoder::frozen(const ad::ParamStore& ps) const {
  for (int id : param_ids())
    if (ps[id].trainable) return false;
  return true;
}

}  // namespace cda
