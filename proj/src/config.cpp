#include "cda/config.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "cda/serialize.hpp"

namespace cda {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text) {
  KeyValueFile f;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key or value");
    if (!f.kv_.emplace(key, val).second)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": duplicate key '" +
                               key + "'");
  }
  return f;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
  return parse(io::read_file(path));
}

std::uint64_t KeyValueFile::get_u64(const std::string& key, std::uint64_t def) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  used_.insert(key);
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': not an integer: " + it->second);
  }
}

double KeyValueFile::get_f64(const std::string& key, double def) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  used_.insert(key);
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': not a number: " + it->second);
  }
}

bool KeyValueFile::get_bool(const std::string& key, bool def) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  used_.insert(key);
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("config key '" + key + "': expected true/false: " + it->second);
}

std::string KeyValueFile::get_str(const std::string& key, const std::string& def) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  used_.insert(key);
  return it->second;
}

void KeyValueFile::check_all_used() const {
  for (const auto& [k, v] : kv_)
    if (!used_.count(k)) throw std::runtime_error("config: unknown key '" + k + "'");
}

void ExperimentPlan::validate() const {
  gen.validate();
  train.validate();
  if (initial_domains < 2) throw std::invalid_argument("plan: need at least 2 initial domains");
  if (initial_domains + incremental_domains > gen.domain_count)
    throw std::invalid_argument("plan: initial + incremental domains exceed the corpus size");
  if (order != "random" && order != "decreasing" && order != "increasing")
    throw std::invalid_argument("plan: unknown order '" + order + "'");
}

ExperimentPlan plan_from_text(const std::string& text) {
  KeyValueFile f = KeyValueFile::parse(text);
  ExperimentPlan p;

  p.seed = f.get_u64("seed", p.seed);

  p.gen.domain_count = f.get_u64("gen.domain_count", p.gen.domain_count);
  p.gen.vocab_size = f.get_u64("gen.vocab_size", p.gen.vocab_size);
  p.gen.topic_words_per_domain =
      f.get_u64("gen.topic_words_per_domain", p.gen.topic_words_per_domain);
  p.gen.utterances_per_domain = f.get_u64("gen.utterances_per_domain", p.gen.utterances_per_domain);
  p.gen.utterance_count_jitter =
      f.get_f64("gen.utterance_count_jitter", p.gen.utterance_count_jitter);
  p.gen.min_utterance_len = f.get_u64("gen.min_utterance_len", p.gen.min_utterance_len);
  p.gen.max_utterance_len = f.get_u64("gen.max_utterance_len", p.gen.max_utterance_len);
  p.gen.topic_word_prob = f.get_f64("gen.topic_word_prob", p.gen.topic_word_prob);
  p.gen.similar_pair_fraction = f.get_f64("gen.similar_pair_fraction", p.gen.similar_pair_fraction);
  p.gen.p_enable_truth = f.get_f64("gen.p_enable_truth", p.gen.p_enable_truth);
  p.gen.distractor_rate = f.get_f64("gen.distractor_rate", p.gen.distractor_rate);

  p.dims.word_dim = f.get_u64("model.word_dim", p.dims.word_dim);
  p.dims.lstm_hidden = f.get_u64("model.lstm_hidden", p.dims.lstm_hidden);
  p.dims.summary_dim = f.get_u64("model.summary_dim", p.dims.summary_dim);
  p.dims.hidden_dim = f.get_u64("model.hidden_dim", p.dims.hidden_dim);

  p.train.initial_epochs = f.get_u64("train.initial_epochs", p.train.initial_epochs);
  p.train.initial_lr = f.get_f64("train.initial_lr", p.train.initial_lr);
  p.train.initial_batch = f.get_u64("train.initial_batch", p.train.initial_batch);
  p.train.adapt_epochs = f.get_u64("train.adapt_epochs", p.train.adapt_epochs);
  p.train.adapt_lr = f.get_f64("train.adapt_lr", p.train.adapt_lr);
  p.train.adapt_batch = f.get_u64("train.adapt_batch", p.train.adapt_batch);
  p.train.hinge.delta_pos = f.get_f64("train.delta_pos", p.train.hinge.delta_pos);
  p.train.hinge.delta_neg = f.get_f64("train.delta_neg", p.train.hinge.delta_neg);
  p.train.delta_der = f.get_f64("train.delta_der", p.train.delta_der);
  p.train.lambda_dsl = f.get_f64("train.lambda_dsl", p.train.lambda_dsl);
  p.train.lambda_norm = f.get_f64("train.lambda_norm", p.train.lambda_norm);
  p.train.plain_lambda = f.get_bool("train.plain_lambda", p.train.plain_lambda);
  p.train.exemplar_budget = f.get_u64("train.exemplar_budget", p.train.exemplar_budget);
  p.train.use_exemplars = f.get_bool("train.use_exemplars", p.train.use_exemplars);
  p.train.downsample_exemplars =
      f.get_bool("train.downsample_exemplars", p.train.downsample_exemplars);
  p.train.use_der = f.get_bool("train.use_der", p.train.use_der);
  p.train.full_update = f.get_bool("train.full_update", p.train.full_update);
  p.train.beta1 = f.get_f64("train.beta1", p.train.beta1);
  p.train.beta2 = f.get_f64("train.beta2", p.train.beta2);
  p.train.adam_eps = f.get_f64("train.adam_eps", p.train.adam_eps);

  p.variant = f.get_str("plan.variant", p.variant);
  p.initial_domains = f.get_u64("plan.initial_domains", p.initial_domains);
  p.incremental_domains = f.get_u64("plan.incremental_domains", p.incremental_domains);
  p.order = f.get_str("plan.order", p.order);

  f.check_all_used();

  p.gen.seed = p.seed;
  p.train.seed = p.seed;
  p.validate();
  return p;
}

ExperimentPlan plan_from_file(const std::string& path) {
  return plan_from_text(io::read_file(path));
}

std::string ExperimentPlan::to_text() const {
  char buf[4096];
  std::snprintf(
      buf, sizeof buf,
      "seed = %llu\n"
      "gen.domain_count = %zu\ngen.vocab_size = %zu\ngen.topic_words_per_domain = %zu\n"
      "gen.utterances_per_domain = %zu\ngen.utterance_count_jitter = %g\n"
      "gen.min_utterance_len = %zu\ngen.max_utterance_len = %zu\ngen.topic_word_prob = %g\n"
      "gen.similar_pair_fraction = %g\ngen.p_enable_truth = %g\ngen.distractor_rate = %g\n"
      "model.word_dim = %zu\nmodel.lstm_hidden = %zu\nmodel.summary_dim = %zu\n"
      "model.hidden_dim = %zu\n"
      "train.initial_epochs = %zu\ntrain.initial_lr = %g\ntrain.initial_batch = %zu\n"
      "train.adapt_epochs = %zu\ntrain.adapt_lr = %g\ntrain.adapt_batch = %zu\n"
      "train.delta_pos = %g\ntrain.delta_neg = %g\ntrain.delta_der = %g\n"
      "train.lambda_dsl = %g\ntrain.lambda_norm = %g\ntrain.plain_lambda = %s\n"
      "train.exemplar_budget = %zu\ntrain.use_exemplars = %s\ntrain.downsample_exemplars = %s\n"
      "train.use_der = %s\ntrain.full_update = %s\n"
      "train.beta1 = %g\ntrain.beta2 = %g\ntrain.adam_eps = %g\n"
      "plan.variant = %s\nplan.initial_domains = %zu\nplan.incremental_domains = %zu\n"
      "plan.order = %s\n",
      static_cast<unsigned long long>(seed), gen.domain_count, gen.vocab_size,
      gen.topic_words_per_domain, gen.utterances_per_domain, gen.utterance_count_jitter,
      gen.min_utterance_len, gen.max_utterance_len, gen.topic_word_prob,
      gen.similar_pair_fraction, gen.p_enable_truth, gen.distractor_rate, dims.word_dim,
      dims.lstm_hidden, dims.summary_dim, dims.hidden_dim, train.initial_epochs, train.initial_lr,
      train.initial_batch, train.adapt_epochs, train.adapt_lr, train.adapt_batch,
      train.hinge.delta_pos, train.hinge.delta_neg, train.delta_der, train.lambda_dsl,
      train.lambda_norm, train.plain_lambda ? "true" : "false", train.exemplar_budget,
      train.use_exemplars ? "true" : "false", train.downsample_exemplars ? "true" : "false",
      train.use_der ? "true" : "false", train.full_update ? "true" : "false", train.beta1,
      train.beta2, train.adam_eps, variant.c_str(), initial_domains, incremental_domains,
      order.c_str());
  return buf;
}

std::uint64_t ExperimentPlan::hash() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace cda
