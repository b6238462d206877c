#include "signrec/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace signrec {

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

template <typename T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + " must have rank " +
                     std::to_string(rank) + ", got " +
                     shape_to_string(t.shape()));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  BasicTensor<T> c({m, n});
  const T* pa = a.raw();
  const T* pb = b.raw();
  T* pc = c.raw();
  for (std::size_t i = 0; i < m; ++i) {
    T* row = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T s = pa[i * k + p];
      const T* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return c;
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input,
                              const BasicTensor<T>& kernels,
                              const BasicTensor<T>& bias) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const std::size_t kh = kernels.dim(0), kw = kernels.dim(1), f = kernels.dim(3);
  if (kernels.dim(2) != c) {
    throw ShapeError("conv2d: input channels " + shape_to_string(input.shape()) +
                     " do not match kernels " + shape_to_string(kernels.shape()));
  }
  if (kh > h || kw > w) {
    throw ShapeError("conv2d: kernel " + shape_to_string(kernels.shape()) +
                     " larger than input " + shape_to_string(input.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != f) {
    throw ShapeError("conv2d: bias " + shape_to_string(bias.shape()) +
                     " does not match " + std::to_string(f) + " filters");
  }
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  BasicTensor<T> out({oh, ow, f});
  const T* in = input.raw();
  const T* k = kernels.raw();
  const T* b = bias.raw();
  T* o = out.raw();
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      T* cell = o + (y * ow + x) * f;
      std::copy(b, b + f, cell);
      for (std::size_t dy = 0; dy < kh; ++dy) {
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const T* px = in + ((y + dy) * w + (x + dx)) * c;
          const T* kp = k + (dy * kw + dx) * c * f;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T v = px[ch];
            const T* krow = kp + ch * f;
            for (std::size_t j = 0; j < f; ++j) cell[j] += v * krow[j];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& grad_out,
                               const BasicTensor<T>& input,
                               const BasicTensor<T>& kernels,
                               bool need_input_grad) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  require_rank(grad_out, 3, "conv2d grad_out");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  const std::size_t kh = kernels.dim(0), kw = kernels.dim(1), f = kernels.dim(3);
  if (kernels.dim(2) != c || kh > h || kw > w) {
    throw ShapeError("conv2d_backward: kernels " +
                     shape_to_string(kernels.shape()) + " inconsistent with input " +
                     shape_to_string(input.shape()));
  }
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  if (grad_out.shape() != Shape{oh, ow, f}) {
    throw ShapeError("conv2d_backward: grad_out " +
                     shape_to_string(grad_out.shape()) + " expected " +
                     shape_to_string({oh, ow, f}));
  }

  Conv2dGrads<T> grads;
  grads.grad_kernels = BasicTensor<T>(kernels.shape());
  grads.grad_bias = BasicTensor<T>({f});
  if (need_input_grad) grads.grad_input = BasicTensor<T>(input.shape());

  const T* in = input.raw();
  const T* k = kernels.raw();
  const T* g = grad_out.raw();
  T* gk = grads.grad_kernels.raw();
  T* gb = grads.grad_bias.raw();
  T* gi = need_input_grad ? grads.grad_input.raw() : nullptr;

  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      const T* gcell = g + (y * ow + x) * f;
      for (std::size_t j = 0; j < f; ++j) gb[j] += gcell[j];
      for (std::size_t dy = 0; dy < kh; ++dy) {
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const std::size_t pix = ((y + dy) * w + (x + dx)) * c;
          const std::size_t kbase = (dy * kw + dx) * c * f;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const T v = in[pix + ch];
            T* gkrow = gk + kbase + ch * f;
            for (std::size_t j = 0; j < f; ++j) gkrow[j] += v * gcell[j];
            if (gi) {
              const T* krow = k + kbase + ch * f;
              T acc{0};
              for (std::size_t j = 0; j < f; ++j) acc += krow[j] * gcell[j];
              gi[pix + ch] += acc;
            }
          }
        }
      }
    }
  }
  return grads;
}

template <typename T>
MaxPoolResult<T> maxpool2d(const BasicTensor<T>& input) {
  require_rank(input, 3, "maxpool2d input");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (h < 2 || w < 2) {
    throw ShapeError("maxpool2d: input " + shape_to_string(input.shape()) +
                     " smaller than one 2x2 window");
  }
  const std::size_t oh = h / 2, ow = w / 2;
  MaxPoolResult<T> result{BasicTensor<T>({oh, ow, c}),
                          PoolCache{input.shape(), {}}};
  result.cache.argmax_indices.resize(oh * ow * c);
  const T* in = input.raw();
  T* out = result.output.raw();
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        // Scan in increasing flat-index order; strict '>' keeps the lowest
        // index on ties.
        std::size_t best = ((2 * y) * w + 2 * x) * c + ch;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * y + dy) * w + (2 * x + dx)) * c + ch;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (y * ow + x) * c + ch;
        out[o] = in[best];
        result.cache.argmax_indices[o] = best;
      }
    }
  }
  return result;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_out,
                                  const PoolCache& cache) {
  if (grad_out.size() != cache.argmax_indices.size()) {
    throw ShapeError("maxpool2d_backward: grad_out " +
                     shape_to_string(grad_out.shape()) +
                     " does not match cached pool of " +
                     std::to_string(cache.argmax_indices.size()) + " cells");
  }
  BasicTensor<T> grad_in(cache.input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    grad_in[cache.argmax_indices[o]] += grad_out[o];
  }
  return grad_in;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  for (auto& v : y.data()) v = v > T{0} ? v : T{0};
  return y;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out,
                             const BasicTensor<T>& x) {
  grad_out.require_same_shape(x, "relu_backward");
  BasicTensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(x[i] > T{0})) g[i] = T{0};
  }
  return g;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.empty()) throw ShapeError("softmax: empty logits");
  T max_logit = -std::numeric_limits<T>::infinity();
  for (T v : logits.data()) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite logit");
    max_logit = std::max(max_logit, v);
  }
  BasicTensor<T> probs(logits.shape());
  T total{0};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    total += probs[i];
  }
  for (auto& p : probs.data()) p /= total;
  return probs;
}

template <typename T>
T cross_entropy(const BasicTensor<T>& probs, std::size_t label) {
  if (label >= probs.size()) {
    throw IndexError("cross_entropy: label " + std::to_string(label) +
                     " out of range for " + std::to_string(probs.size()) +
                     " classes");
  }
  return -std::log(probs[label] + static_cast<T>(kCrossEntropyClip));
}

template <typename T>
BasicTensor<T> softmax_cross_entropy_grad(const BasicTensor<T>& probs,
                                          std::size_t label) {
  if (label >= probs.size()) {
    throw IndexError("softmax_cross_entropy_grad: label " +
                     std::to_string(label) + " out of range");
  }
  BasicTensor<T> g = probs;
  g[label] -= T{1};
  return g;
}

template <typename T>
std::size_t argmax(const BasicTensor<T>& values) {
  if (values.empty()) throw InputError("argmax of empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

#define SIGNREC_INSTANTIATE_OPS(T)                                            \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> conv2d_forward(                                     \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);   \
  template Conv2dGrads<T> conv2d_backward(                                    \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, bool); \
  template MaxPoolResult<T> maxpool2d(const BasicTensor<T>&);                 \
  template BasicTensor<T> maxpool2d_backward(const BasicTensor<T>&,           \
                                             const PoolCache&);               \
  template BasicTensor<T> relu(const BasicTensor<T>&);                        \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&,                \
                                        const BasicTensor<T>&);               \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                     \
  template T cross_entropy(const BasicTensor<T>&, std::size_t);               \
  template BasicTensor<T> softmax_cross_entropy_grad(const BasicTensor<T>&,   \
                                                     std::size_t);            \
  template std::size_t argmax(const BasicTensor<T>&);

SIGNREC_INSTANTIATE_OPS(float)
SIGNREC_INSTANTIATE_OPS(double)

#undef SIGNREC_INSTANTIATE_OPS

}  // namespace signrec
