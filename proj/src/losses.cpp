#include "cda/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cda {

void HingeThresholds::validate() const {
  if (!(delta_pos > 0.0 && delta_pos <= 1.0))
    throw std::invalid_argument("hinge thresholds: delta_pos must be in (0, 1], got " +
                                std::to_string(delta_pos));
  if (!(delta_neg >= 0.0 && delta_neg < 1.0))
    throw std::invalid_argument("hinge thresholds: delta_neg must be in [0, 1), got " +
                                std::to_string(delta_neg));
  if (!(delta_neg < delta_pos))
    throw std::invalid_argument("hinge thresholds: delta_neg must be below delta_pos");
}

int hinge_loss_node(ad::Tape& tape, int scores, std::size_t truth, const HingeThresholds& th) {
  return tape.hinge_margins(scores, truth, th.delta_pos, th.delta_neg);
}

int log_sigmoid_loss_node(ad::Tape& tape, int scores, std::size_t truth) {
  return tape.log_sigmoid_loss(scores, truth);
}

int der_loss_node(ad::Tape& tape, const DomainTable& table, const DerConfig& cfg) {
  if (table.rows.empty() || table.frozen_prefix != table.rows.size() - 1)
    throw std::invalid_argument("der_loss: table must have exactly one trainable row appended");
  if (cfg.lambda.size() != table.frozen_prefix)
    throw std::invalid_argument("der_loss: lambda count " + std::to_string(cfg.lambda.size()) +
                                " does not match frozen domain count " +
                                std::to_string(table.frozen_prefix));
  int t_new = tape.param(table.rows.back());
  // (lambda_norm / 2) * |t_new|^2
  int loss = tape.affine(tape.dot(t_new, t_new), cfg.lambda_norm / 2.0, 0.0);
  for (std::size_t i = 0; i < table.frozen_prefix; ++i) {
    if (cfg.lambda[i] == 0.0) continue;
    int c = tape.cosine(t_new, tape.param(table.rows[i]));
    int margin = tape.max_const(tape.affine(c, -1.0, cfg.delta_der), 0.0);
    loss = tape.add(loss, tape.affine(margin, cfg.lambda[i], 0.0));
  }
  return loss;
}

double guarded_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine: shape mismatch [" + std::to_string(a.size()) + "] vs [" +
                                std::to_string(b.size()) + "]");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  double denom = std::sqrt(aa) * std::sqrt(bb);
  return ab / std::max(denom, ad::kNormGuard);
}

std::vector<double> mean_representation(const std::vector<std::vector<double>>& encodings) {
  if (encodings.empty())
    throw std::invalid_argument("mean_representation: empty encoding set");
  std::vector<double> mean(encodings.front().size(), 0.0);
  for (const auto& e : encodings) {
    if (e.size() != mean.size())
      throw std::invalid_argument("mean_representation: mixed encoding lengths");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += e[i];
  }
  for (auto& x : mean) x /= static_cast<double>(encodings.size());
  return mean;
}

std::vector<double> similarity_weights(const std::vector<double>& h_new,
                                       const std::vector<std::vector<double>>& h_known,
                                       double lambda_dsl) {
  std::vector<double> lambda;
  lambda.reserve(h_known.size());
  for (const auto& h : h_known)
    lambda.push_back(lambda_dsl * std::max(guarded_cosine(h, h_new), 0.0));
  return lambda;
}

int batch_mean(ad::Tape& tape, const std::vector<int>& scalar_nodes) {
  if (scalar_nodes.empty()) throw std::invalid_argument("batch_mean: empty batch");
  int acc = scalar_nodes.front();
  for (std::size_t i = 1; i < scalar_nodes.size(); ++i) acc = tape.add(acc, scalar_nodes[i]);
  return tape.affine(acc, 1.0 / static_cast<double>(scalar_nodes.size()), 0.0);
}

}  // namespace cda
