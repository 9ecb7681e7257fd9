#pragma once

#include <cstdint>
#include <vector>

#include "cda/tape.hpp"
#include "cda/tensor.hpp"

namespace cda {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction. Moment state is kept per parameter
// and lives for one training phase; frozen parameters are never touched, so
// they stay bit-identical no matter what gradients were computed for them.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(ad::ParamStore& params, const ad::GradientStore& grads);

  std::int64_t steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t t_ = 0;
};

}  // namespace cda
