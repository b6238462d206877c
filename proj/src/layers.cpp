#include "signrec/layers.hpp"

#include <cmath>
#include <string>

#include "signrec/ops.hpp"
#include "signrec/random.hpp"

namespace signrec {

template <typename T>
T stable_sigmoid(T z) {
  if (z >= T{0}) return T{1} / (T{1} + std::exp(-z));
  const T e = std::exp(z);
  return e / (T{1} + e);
}

template <typename T>
BasicTensor<T> glorot_uniform(Shape shape, std::size_t fan_in,
                              std::size_t fan_out, std::uint64_t seed) {
  BasicTensor<T> out(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(mix_seed(seed));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : out.data()) v = static_cast<T>(dist(rng));
  return out;
}

namespace {

template <typename T>
BasicTensor<T> make_weight(Shape shape, std::size_t fan_in, std::size_t fan_out,
                           std::uint64_t seed, InitScheme scheme) {
  if (scheme == InitScheme::zeros) return BasicTensor<T>(std::move(shape));
  return glorot_uniform<T>(std::move(shape), fan_in, fan_out, seed);
}

// y += x * W for a row vector x (len d) and W (d x n). Zero entries of x are
// skipped, which matters for post-ReLU inputs.
template <typename T>
void accumulate_row_times_matrix(const T* x, std::size_t d, const T* w,
                                 std::size_t n, T* y) {
  for (std::size_t k = 0; k < d; ++k) {
    const T s = x[k];
    if (s == T{0}) continue;
    const T* row = w + k * n;
    for (std::size_t j = 0; j < n; ++j) y[j] += s * row[j];
  }
}

// G += outer(x, g) for G (d x n).
template <typename T>
void accumulate_outer(const T* x, std::size_t d, const T* g, std::size_t n,
                      T* out) {
  for (std::size_t k = 0; k < d; ++k) {
    const T s = x[k];
    if (s == T{0}) continue;
    T* row = out + k * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += s * g[j];
  }
}

// y += W * g for W (d x n), i.e. y[k] += dot(W[k,:], g).
template <typename T>
void accumulate_matrix_times_col(const T* w, std::size_t d, std::size_t n,
                                 const T* g, T* y) {
  for (std::size_t k = 0; k < d; ++k) {
    const T* row = w + k * n;
    T acc{0};
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * g[j];
    y[k] += acc;
  }
}

template <typename T>
void check_lstm_params(const LstmParams<T>& p) {
  const std::size_t h = p.recurrent_weight.rank() == 2 ? p.recurrent_weight.dim(0) : 0;
  if (h == 0 || p.recurrent_weight.dim(1) != 4 * h ||
      p.input_weight.rank() != 2 || p.input_weight.dim(1) != 4 * h ||
      p.bias.shape() != Shape{4 * h}) {
    throw ShapeError("lstm params inconsistent: W " +
                     shape_to_string(p.input_weight.shape()) + ", U " +
                     shape_to_string(p.recurrent_weight.shape()) + ", b " +
                     shape_to_string(p.bias.shape()));
  }
}

}  // namespace

template <typename T>
DenseParams<T> init_dense(std::size_t in, std::size_t out, std::uint64_t seed,
                          InitScheme scheme) {
  return {make_weight<T>({in, out}, in, out, seed, scheme), BasicTensor<T>({out})};
}

template <typename T>
ConvParams<T> init_conv(std::size_t kh, std::size_t kw, std::size_t channels,
                        std::size_t filters, std::uint64_t seed,
                        InitScheme scheme) {
  const std::size_t receptive = kh * kw;
  return {make_weight<T>({kh, kw, channels, filters}, receptive * channels,
                         receptive * filters, seed, scheme),
          BasicTensor<T>({filters})};
}

template <typename T>
LstmParams<T> init_lstm(std::size_t input_size, std::size_t hidden_size,
                        std::uint64_t seed, InitScheme scheme) {
  const std::size_t gates = 4 * hidden_size;
  LstmParams<T> p{
      make_weight<T>({input_size, gates}, input_size, gates,
                     derive_seed(seed, 0), scheme),
      make_weight<T>({hidden_size, gates}, hidden_size, gates,
                     derive_seed(seed, 1), scheme),
      BasicTensor<T>({gates})};
  const std::size_t forget = static_cast<std::size_t>(Gate::forget) * hidden_size;
  for (std::size_t j = 0; j < hidden_size; ++j) {
    p.bias[forget + j] = static_cast<T>(kForgetBiasInit);
  }
  return p;
}

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& x, const DenseParams<T>& p) {
  if (p.weight.rank() != 2 || x.size() != p.weight.dim(0) ||
      p.bias.shape() != Shape{p.weight.dim(1)}) {
    throw ShapeError("dense_forward: input " + shape_to_string(x.shape()) +
                     " vs weight " + shape_to_string(p.weight.shape()) +
                     ", bias " + shape_to_string(p.bias.shape()));
  }
  BasicTensor<T> y = p.bias;
  accumulate_row_times_matrix(x.raw(), x.size(), p.weight.raw(), y.size(),
                              y.raw());
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& grad_out,
                             const BasicTensor<T>& x, const DenseParams<T>& p,
                             bool need_input_grad) {
  const std::size_t in = p.weight.dim(0), out = p.weight.dim(1);
  if (x.size() != in || grad_out.size() != out) {
    throw ShapeError("dense_backward: input " + shape_to_string(x.shape()) +
                     ", grad_out " + shape_to_string(grad_out.shape()) +
                     " vs weight " + shape_to_string(p.weight.shape()));
  }
  DenseGrads<T> g{BasicTensor<T>(p.weight.shape()), BasicTensor<T>({out}), {}};
  accumulate_outer(x.raw(), in, grad_out.raw(), out, g.grad_weight.raw());
  std::copy(grad_out.data().begin(), grad_out.data().end(), g.grad_bias.raw());
  if (need_input_grad) {
    g.grad_input = BasicTensor<T>(x.shape());
    accumulate_matrix_times_col(p.weight.raw(), in, out, grad_out.raw(),
                                g.grad_input.raw());
  }
  return g;
}

template <typename T>
LstmCellOutput<T> lstm_cell_forward(const BasicTensor<T>& x,
                                    const BasicTensor<T>& h_prev,
                                    const BasicTensor<T>& c_prev,
                                    const LstmParams<T>& p) {
  check_lstm_params(p);
  const std::size_t d = p.input_size(), h = p.hidden_size();
  if (x.size() != d || h_prev.size() != h || c_prev.size() != h) {
    throw ShapeError("lstm_cell_forward: x " + shape_to_string(x.shape()) +
                     ", h_prev " + shape_to_string(h_prev.shape()) +
                     ", c_prev " + shape_to_string(c_prev.shape()) +
                     " do not match D=" + std::to_string(d) +
                     " H=" + std::to_string(h));
  }
  BasicTensor<T> z = p.bias;
  accumulate_row_times_matrix(x.raw(), d, p.input_weight.raw(), 4 * h, z.raw());
  accumulate_row_times_matrix(h_prev.raw(), h, p.recurrent_weight.raw(), 4 * h,
                              z.raw());

  LstmCellOutput<T> out;
  auto& cache = out.cache;
  cache.x = x.reshaped({d});
  cache.h_prev = h_prev.reshaped({h});
  cache.c_prev = c_prev.reshaped({h});
  cache.input_gate = BasicTensor<T>({h});
  cache.forget_gate = BasicTensor<T>({h});
  cache.candidate = BasicTensor<T>({h});
  cache.output_gate = BasicTensor<T>({h});
  cache.c = BasicTensor<T>({h});
  cache.tanh_c = BasicTensor<T>({h});
  out.h = BasicTensor<T>({h});
  for (std::size_t j = 0; j < h; ++j) {
    const T i = stable_sigmoid(z[j]);
    const T f = stable_sigmoid(z[h + j]);
    const T g = std::tanh(z[2 * h + j]);
    const T o = stable_sigmoid(z[3 * h + j]);
    const T c = f * c_prev[j] + i * g;
    const T tc = std::tanh(c);
    cache.input_gate[j] = i;
    cache.forget_gate[j] = f;
    cache.candidate[j] = g;
    cache.output_gate[j] = o;
    cache.c[j] = c;
    cache.tanh_c[j] = tc;
    out.h[j] = o * tc;
  }
  out.c = cache.c;
  return out;
}

template <typename T>
LstmForwardResult<T> lstm_forward(const BasicTensor<T>& xs,
                                  const LstmParams<T>& p) {
  check_lstm_params(p);
  if (xs.empty() || xs.rank() != 2) {
    throw InputError("lstm_forward: expected a non-empty T x D sequence, got " +
                     shape_to_string(xs.shape()));
  }
  const std::size_t steps = xs.dim(0), d = xs.dim(1), h = p.hidden_size();
  if (d != p.input_size()) {
    throw ShapeError("lstm_forward: sequence width " + std::to_string(d) +
                     " does not match input size " +
                     std::to_string(p.input_size()));
  }
  LstmForwardResult<T> result;
  result.caches.reserve(steps);
  BasicTensor<T> h_state({h});
  BasicTensor<T> c_state({h});
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<T> row(xs.raw() + t * d, xs.raw() + (t + 1) * d);
    auto step = lstm_cell_forward(BasicTensor<T>({d}, std::move(row)), h_state,
                                  c_state, p);
    h_state = std::move(step.h);
    c_state = std::move(step.c);
    result.caches.push_back(std::move(step.cache));
  }
  result.h_last = std::move(h_state);
  return result;
}

template <typename T>
LstmGrads<T> lstm_backward(const BasicTensor<T>& grad_h_last,
                           const std::vector<LstmStepCache<T>>& caches,
                           const LstmParams<T>& p, bool need_input_grad) {
  check_lstm_params(p);
  const std::size_t d = p.input_size(), h = p.hidden_size(), g4 = 4 * h;
  if (caches.empty()) throw InputError("lstm_backward: no cached steps");
  if (grad_h_last.size() != h) {
    throw ShapeError("lstm_backward: grad_h " +
                     shape_to_string(grad_h_last.shape()) +
                     " does not match hidden size " + std::to_string(h));
  }
  for (const auto& c : caches) {
    if (c.x.size() != d || c.c.size() != h) {
      throw ShapeError("lstm_backward: cache does not match params");
    }
  }
  const std::size_t steps = caches.size();
  LstmGrads<T> grads{BasicTensor<T>(p.input_weight.shape()),
                     BasicTensor<T>(p.recurrent_weight.shape()),
                     BasicTensor<T>({g4}),
                     {}};
  if (need_input_grad) grads.grad_inputs = BasicTensor<T>({steps, d});

  std::vector<T> dh(grad_h_last.data().begin(), grad_h_last.data().end());
  std::vector<T> dc(h, T{0});
  std::vector<T> dz(g4);
  for (std::size_t t = steps; t-- > 0;) {
    const auto& s = caches[t];
    for (std::size_t j = 0; j < h; ++j) {
      const T i = s.input_gate[j], f = s.forget_gate[j];
      const T g = s.candidate[j], o = s.output_gate[j];
      const T tc = s.tanh_c[j];
      const T d_o = dh[j] * tc;
      const T d_c = dc[j] + dh[j] * o * (T{1} - tc * tc);
      dz[j] = d_c * g * i * (T{1} - i);
      dz[h + j] = d_c * s.c_prev[j] * f * (T{1} - f);
      dz[2 * h + j] = d_c * i * (T{1} - g * g);
      dz[3 * h + j] = d_o * o * (T{1} - o);
      dc[j] = d_c * f;
    }
    accumulate_outer(s.x.raw(), d, dz.data(), g4, grads.grad_input_weight.raw());
    accumulate_outer(s.h_prev.raw(), h, dz.data(), g4,
                     grads.grad_recurrent_weight.raw());
    for (std::size_t j = 0; j < g4; ++j) grads.grad_bias[j] += dz[j];
    if (need_input_grad) {
      accumulate_matrix_times_col(p.input_weight.raw(), d, g4, dz.data(),
                                  grads.grad_inputs.raw() + t * d);
    }
    std::fill(dh.begin(), dh.end(), T{0});
    accumulate_matrix_times_col(p.recurrent_weight.raw(), h, g4, dz.data(),
                                dh.data());
  }
  return grads;
}

#define SIGNREC_INSTANTIATE_LAYERS(T)                                          \
  template T stable_sigmoid(T);                                                \
  template BasicTensor<T> glorot_uniform(Shape, std::size_t, std::size_t,      \
                                         std::uint64_t);                       \
  template DenseParams<T> init_dense(std::size_t, std::size_t, std::uint64_t,  \
                                     InitScheme);                              \
  template ConvParams<T> init_conv(std::size_t, std::size_t, std::size_t,      \
                                   std::size_t, std::uint64_t, InitScheme);    \
  template LstmParams<T> init_lstm(std::size_t, std::size_t, std::uint64_t,    \
                                   InitScheme);                                \
  template BasicTensor<T> dense_forward(const BasicTensor<T>&,                 \
                                        const DenseParams<T>&);                \
  template DenseGrads<T> dense_backward(const BasicTensor<T>&,                 \
                                        const BasicTensor<T>&,                 \
                                        const DenseParams<T>&, bool);          \
  template LstmCellOutput<T> lstm_cell_forward(                                \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,     \
      const LstmParams<T>&);                                                   \
  template LstmForwardResult<T> lstm_forward(const BasicTensor<T>&,            \
                                             const LstmParams<T>&);            \
  template LstmGrads<T> lstm_backward(const BasicTensor<T>&,                   \
                                      const std::vector<LstmStepCache<T>>&,    \
                                      const LstmParams<T>&, bool);

SIGNREC_INSTANTIATE_LAYERS(float)
SIGNREC_INSTANTIATE_LAYERS(double)

#undef SIGNREC_INSTANTIATE_LAYERS

}  // namespace signrec
