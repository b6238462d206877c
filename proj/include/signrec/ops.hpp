#pragma once

#include <cstddef>
#include <vector>

#include "signrec/tensor.hpp"

// Numeric kernels with hand-derived backward passes. Image tensors are laid
// out H x W x C; convolution kernels are kh x kw x C x F. Convolution is
// valid-padding stride 1, pooling is 2x2 stride 2.
//
// Everything here is templated on the scalar type and explicitly
// instantiated for float (training) and double (gradient checks).

namespace signrec {

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input,
                              const BasicTensor<T>& kernels,
                              const BasicTensor<T>& bias);

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> grad_input;  // empty when not requested
  BasicTensor<T> grad_kernels;
  BasicTensor<T> grad_bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& grad_out,
                               const BasicTensor<T>& input,
                               const BasicTensor<T>& kernels,
                               bool need_input_grad = true);

struct PoolCache {
  Shape input_shape;
  // Per output cell (row-major over the output tensor), the flat input index
  // that won the window.
  std::vector<std::size_t> argmax_indices;
};

template <typename T>
struct MaxPoolResult {
  BasicTensor<T> output;
  PoolCache cache;
};

template <typename T>
MaxPoolResult<T> maxpool2d(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_out,
                                  const PoolCache& cache);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out,
                             const BasicTensor<T>& x);

// Treats the logits as a flat vector of K entries.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

inline constexpr double kCrossEntropyClip = 1e-12;

template <typename T>
T cross_entropy(const BasicTensor<T>& probs, std::size_t label);

// d(cross_entropy(softmax(z), label)) / dz = probs - one_hot(label).
template <typename T>
BasicTensor<T> softmax_cross_entropy_grad(const BasicTensor<T>& probs,
                                          std::size_t label);

// Index of the largest entry; ties go to the lowest index.
template <typename T>
std::size_t argmax(const BasicTensor<T>& values);

}  // namespace signrec
