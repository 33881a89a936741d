#ifndef PARTSDET_ADAM_HPP
#define PARTSDET_ADAM_HPP

#include <cmath>
#include <cstdint>

#include "partsdet/errors.hpp"
#include "partsdet/model.hpp"

namespace partsdet {

struct AdamConfig {
  double beta1 = 0.928;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-5;  // coupled: added to the gradient
};

template <typename T>
struct AdamState {
  ParamStore<T> m;
  ParamStore<T> v;
  int64_t t = 0;

  static AdamState init(const ParamStore<T>& params) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
  }
};

// Standard Adam with bias correction; weight decay enters as an additive
// wd * theta term in the gradient (classic coupled form).
template <typename T>
void adam_step(ParamStore<T>& params, const ParamStore<T>& grads,
               AdamState<T>& st, T lr, const AdamConfig& cfg) {
  ++st.t;
  const T b1 = T(cfg.beta1), b2 = T(cfg.beta2);
  const T bc1 = T(1) - T(std::pow(cfg.beta1, double(st.t)));
  const T bc2 = T(1) - T(std::pow(cfg.beta2, double(st.t)));
  for (size_t ti = 0; ti < params.tensors.size(); ++ti) {
    auto& theta = params.tensors[ti].v;
    const auto& grad = grads.tensors[ti].v;
    auto& m = st.m.tensors[ti].v;
    auto& v = st.v.tensors[ti].v;
    for (size_t i = 0; i < theta.size(); ++i) {
      const T g = grad[i] + T(cfg.weight_decay) * theta[i];
      if (!std::isfinite(double(g)))
        throw training_error("non-finite gradient in " +
                             params.tensors[ti].name);
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      const T mhat = m[i] / bc1;
      const T vhat = v[i] / bc2;
      theta[i] -= lr * mhat / (std::sqrt(vhat) + T(cfg.eps));
    }
  }
}

}  // namespace partsdet

#endif
