#include "signrec/optim.hpp"

#include <cmath>
#include <string>

namespace signrec {

template <typename T>
void adam_step(BasicTensor<T>& param, const BasicTensor<T>& grad,
               AdamState<T>& state, std::string_view name) {
  param.require_same_shape(grad, "adam_step");
  param.require_same_shape(state.m, "adam_step state");
  for (T g : grad.data()) {
    if (!std::isfinite(g)) {
      throw NumericError("adam_step: non-finite gradient for parameter '" +
                         std::string(name) + "'");
    }
  }
  const AdamConfig& cfg = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  T* p = param.raw();
  T* m = state.m.raw();
  T* v = state.v.raw();
  const T* g = grad.raw();
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double gi = g[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double m_hat = mi / correction1;
    const double v_hat = vi / correction2;
    p[i] = static_cast<T>(p[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
  }
}

template <typename T>
void sgd_step(BasicTensor<T>& param, const BasicTensor<T>& grad, double lr) {
  param.require_same_shape(grad, "sgd_step");
  T* p = param.raw();
  const T* g = grad.raw();
  for (std::size_t i = 0; i < param.size(); ++i) {
    p[i] = static_cast<T>(p[i] - lr * g[i]);
  }
}

template <typename T>
double clip_global_norm(std::span<BasicTensor<T>* const> grads, double max_norm) {
  double sq = 0.0;
  for (const auto* g : grads) {
    for (T v : g->data()) sq += static_cast<double>(v) * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto* g : grads) *g *= scale;
  }
  return norm;
}

template void adam_step(BasicTensor<float>&, const BasicTensor<float>&,
                        AdamState<float>&, std::string_view);
template void adam_step(BasicTensor<double>&, const BasicTensor<double>&,
                        AdamState<double>&, std::string_view);
template void sgd_step(BasicTensor<float>&, const BasicTensor<float>&, double);
template void sgd_step(BasicTensor<double>&, const BasicTensor<double>&, double);
template double clip_global_norm(std::span<BasicTensor<float>* const>, double);
template double clip_global_norm(std::span<BasicTensor<double>* const>, double);

}  // namespace signrec
