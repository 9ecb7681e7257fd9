#include "cda/model.hpp"

#include <stdexcept>

#include "cda/serialize.hpp"

namespace cda {

Model Model::create(Vocabulary vocab, std::vector<std::string> domains, const EncoderDims& dims,
                    ScoreMode mode, std::uint64_t seed) {
  Model m;
  m.vocab = std::move(vocab);
  m.catalog = std::move(domains);
  m.dims = dims;
  m.mode = mode;

  Rng enc_rng = make_rng(seed, 0x01);
  Rng table_rng = make_rng(seed, 0x02);
  Rng hidden_rng = make_rng(seed, 0x03);
  Rng pred_rng = make_rng(seed, 0x04);

  m.enc = Encoder::create(m.params, m.vocab.size(), dims, enc_rng);
  m.table = DomainTable::create(m.params, m.catalog.size(), dims.summary_dim, table_rng);
  m.hidden =
      HiddenLayer::create(m.params, dims.utterance_dim() + dims.summary_dim, dims.hidden_dim,
                          hidden_rng);
  m.pred = PredictionLayer::create(m.params, m.catalog.size(), dims.hidden_dim, pred_rng);
  return m;
}

int Model::domain_id(const std::string& name) const {
  for (std::size_t i = 0; i < catalog.size(); ++i)
    if (catalog[i] == name) return static_cast<int>(i);
  return -1;
}

int Model::utterance_node(ad::Tape& tape, const std::vector<int>& tokens) const {
  return enc.encode(tape, tokens);
}

int Model::scores_from_utterance(ad::Tape& tape, int utterance,
                                 const std::vector<int>& enabled) const {
  int scoring = enc.to_scoring_space(tape, utterance);
  int summary = table.summarize(tape, scoring, enabled);
  int h = hidden.forward(tape, tape.concat(utterance, summary));
  return pred.scores(tape, h, mode);
}

std::vector<double> Model::score_values(ad::Tape& tape, const std::vector<double>& utterance,
                                        const std::vector<int>& enabled) const {
  int u = tape.constant(utterance);
  return tape.value_vec(scores_from_utterance(tape, u, enabled));
}

std::size_t Model::predict_cached(ad::Tape& tape, const std::vector<double>& utterance,
                                  const std::vector<int>& enabled) const {
  auto scores = score_values(tape, utterance, enabled);
  return argmax_predict(scores);
}

void Model::freeze_base() {
  enc.freeze(params);
  hidden.freeze(params);
  for (int id : table.rows) params.set_trainable(id, false);
  for (int id : pred.rows) params.set_trainable(id, false);
  table.frozen_prefix = table.rows.size();
  pred.frozen_prefix = pred.rows.size();
}

void Model::expand_for_domain(const std::string& name, Rng& rng) {
  if (domain_id(name) >= 0)
    throw std::invalid_argument("expand_for_domain: domain already in catalog: " + name);
  table.expand(params, rng);
  pred.expand(params, rng);
  catalog.push_back(name);
}

std::vector<int> Model::trainable_ids() const {
  std::vector<int> ids;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[static_cast<int>(i)].trainable) ids.push_back(static_cast<int>(i));
  return ids;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic, version, dims, mode, config hash, catalog,
// vocabulary, frozen prefixes, then every parameter tensor in creation
// order. Reading it back and serializing again reproduces identical bytes.
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[9] = "CDACKPT1";
}

std::string Model::serialize() const {
  std::string out;
  out.append(kMagic, 8);
  io::put_u64(out, 1);  // version
  io::put_u64(out, dims.word_dim);
  io::put_u64(out, dims.lstm_hidden);
  io::put_u64(out, dims.summary_dim);
  io::put_u64(out, dims.hidden_dim);
  io::put_u8(out, mode == ScoreMode::Cosine ? 0 : 1);
  io::put_u64(out, config_hash);

  io::put_u64(out, catalog.size());
  for (const auto& d : catalog) io::put_str(out, d);

  io::put_u64(out, vocab.size());
  for (const auto& t : vocab.tokens) io::put_str(out, t);

  io::put_u64(out, table.frozen_prefix);
  io::put_u64(out, pred.frozen_prefix);

  io::put_u64(out, params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[static_cast<int>(i)];
    io::put_str(out, p.name);
    io::put_u8(out, p.trainable ? 1 : 0);
    io::put_u64(out, p.value.shape.size());
    for (auto d : p.value.shape) io::put_u64(out, d);
    for (double x : p.value.v) io::put_f64(out, x);
  }
  return out;
}

Model Model::deserialize(const std::string& bytes) {
  io::Reader r{bytes};
  r.need(8);
  if (bytes.compare(0, 8, kMagic, 8) != 0)
    throw std::runtime_error("not a model checkpoint (bad magic)");
  r.pos = 8;
  if (r.u64() != 1) throw std::runtime_error("unsupported checkpoint version");

  Model m;
  m.dims.word_dim = r.u64();
  m.dims.lstm_hidden = r.u64();
  m.dims.summary_dim = r.u64();
  m.dims.hidden_dim = r.u64();
  m.mode = r.u8() == 0 ? ScoreMode::Cosine : ScoreMode::LinearDot;
  m.config_hash = r.u64();

  std::uint64_t ndom = r.u64();
  m.catalog.resize(ndom);
  for (auto& d : m.catalog) d = r.str();

  std::uint64_t nvocab = r.u64();
  m.vocab.tokens.clear();
  m.vocab.index.clear();
  for (std::uint64_t i = 0; i < nvocab; ++i) {
    std::string tok = r.str();
    m.vocab.index.emplace(tok, static_cast<int>(i));
    m.vocab.tokens.push_back(std::move(tok));
  }

  std::uint64_t table_frozen = r.u64();
  std::uint64_t pred_frozen = r.u64();

  std::uint64_t nparams = r.u64();
  for (std::uint64_t i = 0; i < nparams; ++i) {
    std::string name = r.str();
    bool trainable = r.u8() != 0;
    std::uint64_t ndim = r.u64();
    Tensor t;
    t.shape.resize(ndim);
    std::size_t numel = 1;
    for (auto& d : t.shape) {
      d = r.u64();
      numel *= d;
    }
    t.v.resize(numel);
    for (auto& x : t.v) x = r.f64();
    m.params.add(std::move(name), std::move(t), trainable);
  }
  if (!r.done()) throw std::runtime_error("trailing bytes after checkpoint");

  // Rebind module views by name.
  auto need = [&](const std::string& n) {
    int id = m.params.find(n);
    if (id < 0) throw std::runtime_error("checkpoint missing parameter: " + n);
    return id;
  };
  m.enc.word_dim = m.dims.word_dim;
  m.enc.hidden = m.dims.lstm_hidden;
  m.enc.embed = need("word_embed");
  m.enc.w_fwd = need("lstm_fwd_w");
  m.enc.b_fwd = need("lstm_fwd_b");
  m.enc.w_bwd = need("lstm_bwd_w");
  m.enc.b_bwd = need("lstm_bwd_b");
  m.enc.proj = m.params.find("score_proj");

  m.table.dim = m.dims.summary_dim;
  m.table.frozen_prefix = table_frozen;
  m.pred.dim = m.dims.hidden_dim;
  m.pred.frozen_prefix = pred_frozen;
  for (std::size_t i = 0; i < m.catalog.size(); ++i) {
    m.table.rows.push_back(need("domain_embed_" + std::to_string(i)));
    m.pred.rows.push_back(need("pred_row_" + std::to_string(i)));
  }

  m.hidden.w = need("hidden_w");
  m.hidden.b = need("hidden_b");
  m.hidden.in_dim = m.dims.utterance_dim() + m.dims.summary_dim;
  m.hidden.out_dim = m.dims.hidden_dim;

  if (m.table.rows.size() != m.catalog.size() || m.pred.rows.size() != m.catalog.size())
    throw std::runtime_error("checkpoint row count does not match catalog size");
  if (m.table.frozen_prefix > m.table.rows.size() || m.pred.frozen_prefix > m.pred.rows.size())
    throw std::runtime_error("checkpoint frozen prefix exceeds row count");
  return m;
}

void Model::save(const std::string& path) const { io::write_file(path, serialize()); }

Model Model::load(const std::string& path) { return deserialize(io::read_file(path)); }

}  // namespace cda
