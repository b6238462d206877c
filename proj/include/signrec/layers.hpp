#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "signrec/tensor.hpp"

namespace signrec {

template <typename T>
struct DenseParams {
  BasicTensor<T> weight;  // in x out
  BasicTensor<T> bias;    // out

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

template <typename T>
struct ConvParams {
  BasicTensor<T> kernels;  // kh x kw x C x F
  BasicTensor<T> bias;     // F
};

/// Single-layer LSTM parameters. The 4H gate axis is split into contiguous
/// quarters in the fixed order (input, forget, cell candidate, output).
template <typename T>
struct LstmParams {
  BasicTensor<T> input_weight;      // D x 4H
  BasicTensor<T> recurrent_weight;  // H x 4H
  BasicTensor<T> bias;              // 4H

  std::size_t input_size() const { return input_weight.dim(0); }
  std::size_t hidden_size() const { return recurrent_weight.dim(0); }
};

enum class Gate : std::size_t { input = 0, forget = 1, candidate = 2, output = 3 };

inline constexpr std::size_t kDefaultLstmHidden = 512;
inline constexpr double kForgetBiasInit = 1.0;

enum class InitScheme {
  glorot_uniform,  // U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))
  zeros,
};

template <typename T>
BasicTensor<T> glorot_uniform(Shape shape, std::size_t fan_in,
                              std::size_t fan_out, std::uint64_t seed);

// Weights follow `scheme`; biases are zero except the LSTM forget quarter,
// which starts at kForgetBiasInit. Each result is a pure function of its
// arguments.
template <typename T>
DenseParams<T> init_dense(std::size_t in, std::size_t out, std::uint64_t seed,
                          InitScheme scheme = InitScheme::glorot_uniform);

template <typename T>
ConvParams<T> init_conv(std::size_t kh, std::size_t kw, std::size_t channels,
                        std::size_t filters, std::uint64_t seed,
                        InitScheme scheme = InitScheme::glorot_uniform);

template <typename T>
LstmParams<T> init_lstm(std::size_t input_size, std::size_t hidden_size,
                        std::uint64_t seed,
                        InitScheme scheme = InitScheme::glorot_uniform);

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& x, const DenseParams<T>& p);

template <typename T>
struct DenseGrads {
  BasicTensor<T> grad_weight;
  BasicTensor<T> grad_bias;
  BasicTensor<T> grad_input;  // empty when not requested
};

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& grad_out,
                             const BasicTensor<T>& x, const DenseParams<T>& p,
                             bool need_input_grad = true);

/// Activations of one LSTM step kept for backpropagation through time.
/// Gate values are post-nonlinearity.
template <typename T>
struct LstmStepCache {
  BasicTensor<T> x;
  BasicTensor<T> h_prev;
  BasicTensor<T> c_prev;
  BasicTensor<T> input_gate;
  BasicTensor<T> forget_gate;
  BasicTensor<T> candidate;
  BasicTensor<T> output_gate;
  BasicTensor<T> c;
  BasicTensor<T> tanh_c;
};

template <typename T>
struct LstmCellOutput {
  BasicTensor<T> h;
  BasicTensor<T> c;
  LstmStepCache<T> cache;
};

template <typename T>
LstmCellOutput<T> lstm_cell_forward(const BasicTensor<T>& x,
                                    const BasicTensor<T>& h_prev,
                                    const BasicTensor<T>& c_prev,
                                    const LstmParams<T>& p);

template <typename T>
struct LstmForwardResult {
  BasicTensor<T> h_last;
  std::vector<LstmStepCache<T>> caches;
};

// Runs the cell over the rows of xs (T x D) from zero initial state.
template <typename T>
LstmForwardResult<T> lstm_forward(const BasicTensor<T>& xs,
                                  const LstmParams<T>& p);

template <typename T>
struct LstmGrads {
  BasicTensor<T> grad_input_weight;
  BasicTensor<T> grad_recurrent_weight;
  BasicTensor<T> grad_bias;
  BasicTensor<T> grad_inputs;  // T x D, empty when not requested
};

// Gradients of <grad_h_last, h_T> with respect to parameters and inputs.
template <typename T>
LstmGrads<T> lstm_backward(const BasicTensor<T>& grad_h_last,
                           const std::vector<LstmStepCache<T>>& caches,
                           const LstmParams<T>& p, bool need_input_grad = true);

template <typename T>
T stable_sigmoid(T z);

}  // namespace signrec
