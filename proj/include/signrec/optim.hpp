#pragma once

#include <cstdint>
#include <string_view>

#include "signrec/tensor.hpp"

namespace signrec {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one named parameter tensor.
template <typename T>
struct AdamState {
  AdamState() = default;
  explicit AdamState(const Shape& shape, AdamConfig config = {})
      : m(shape), v(shape), config(config) {}

  BasicTensor<T> m;
  BasicTensor<T> v;
  std::uint64_t t = 0;
  AdamConfig config;
};

// One bias-corrected ADAM update. Throws NumericError naming `name` if the
// gradient has a non-finite entry; the parameter and state are left untouched
// in that case.
template <typename T>
void adam_step(BasicTensor<T>& param, const BasicTensor<T>& grad,
               AdamState<T>& state, std::string_view name = "param");

template <typename T>
void sgd_step(BasicTensor<T>& param, const BasicTensor<T>& grad, double lr);

// Scales the given gradients in place so their joint L2 norm is at most
// max_norm. Returns the norm before scaling.
template <typename T>
double clip_global_norm(std::span<BasicTensor<T>* const> grads, double max_norm);

}  // namespace signrec
