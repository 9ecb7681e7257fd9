#pragma once

#include <vector>

#include "cda/personalization.hpp"
#include "cda/tape.hpp"

namespace cda {

struct HingeThresholds {
  double delta_pos = 0.5;
  double delta_neg = 0.3;

  // delta_pos in (0, 1], delta_neg in [0, 1), delta_neg < delta_pos.
  void validate() const;
};

struct DerConfig {
  double delta_der = 0.1;
  double lambda_dsl = 5.0;
  double lambda_norm = 0.4;
  std::vector<double> lambda;  // one weight per frozen domain
};

// Two-threshold margin loss over a score vector: the true score is pushed
// above delta_pos, every other score below delta_neg.
int hinge_loss_node(ad::Tape& tape, int scores, std::size_t truth, const HingeThresholds& th);

// Per-class sigmoid cross entropy (the linear baseline's training loss).
int log_sigmoid_loss_node(ad::Tape& tape, int scores, std::size_t truth);

// Regularizer on the newest domain embedding: a cosine margin pulling it
// toward each frozen embedding, weighted per domain, plus a squared-norm
// penalty. Requires cfg.lambda to cover exactly the frozen prefix.
int der_loss_node(ad::Tape& tape, const DomainTable& table, const DerConfig& cfg);

// Same epsilon-guarded cosine the tape computes, for plain (non-recorded)
// vectors.
double guarded_cosine(const std::vector<double>& a, const std::vector<double>& b);

// Componentwise mean of a nonempty set of equal-length vectors.
std::vector<double> mean_representation(const std::vector<std::vector<double>>& encodings);

// lambda_i = lambda_dsl * max(cos(h_known_i, h_new), 0)
std::vector<double> similarity_weights(const std::vector<double>& h_new,
                                       const std::vector<std::vector<double>>& h_known,
                                       double lambda_dsl);

// Sequential sum then scale by 1/n; the batch reduction for sample losses.
int batch_mean(ad::Tape& tape, const std::vector<int>& scalar_nodes);

}  // namespace cda
