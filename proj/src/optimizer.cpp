#include "cda/optimizer.hpp"

#include <cmath>

namespace cda {

void Adam::step(ad::ParamStore& params, const ad::GradientStore& grads) {
  ++t_;
  if (m_.size() < params.size()) {
    m_.resize(params.size());
    v_.resize(params.size());
  }
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[static_cast<int>(i)];
    if (!p.trainable) continue;
    const Tensor* g = grads.find(static_cast<int>(i));
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    if (m.v.size() != p.value.numel()) {
      m.shape = p.value.shape;
      m.v.assign(p.value.numel(), 0.0);
      v = m;
    }
    for (std::size_t j = 0; j < p.value.numel(); ++j) {
      const double gj = g ? g->v[j] : 0.0;
      m.v[j] = cfg_.beta1 * m.v[j] + (1.0 - cfg_.beta1) * gj;
      v.v[j] = cfg_.beta2 * v.v[j] + (1.0 - cfg_.beta2) * gj * gj;
      const double mhat = m.v[j] / bc1;
      const double vhat = v.v[j] / bc2;
      p.value.v[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace cda
