#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "antcode/rng.hpp"
#include "antcode/tensor.hpp"

namespace antcode {

enum class Mode { train, eval };

// Gradients returned by a layer's backward pass: one tensor per parameter,
// keyed by parameter name, plus the gradient with respect to the input.
struct LayerGrads {
  std::map<std::string, Tensor> params;
  Tensor input;

  const Tensor& param(const std::string& name) const;
};

// ---- convolution: 3x3 kernels, stride 1, zero padding 1 (cross-correlation)

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias);
// `cached_input` is the tensor given to the forward pass.
LayerGrads conv2d_backward(const Tensor& cached_input, const Tensor& kernels,
                           const Tensor& upstream);
// Accumulates into d_kernels / d_bias; writes d_input when non-null.
void conv2d_backward_into(const Tensor& cached_input, const Tensor& kernels,
                          const Tensor& upstream, Tensor& d_kernels, Tensor& d_bias,
                          Tensor* d_input);

// ---- 2x2 / stride-2 max pooling

struct PoolResult {
  Tensor output;
  // Flat input index of each output element's winner.
  std::vector<std::uint32_t> argmax;
  Shape input_shape;
};

PoolResult maxpool2(const Tensor& input);
Tensor maxpool2_backward(const PoolResult& forward, const Tensor& upstream);

// ---- fully connected: y = W x + b, W is [out, in]

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);
LayerGrads dense_backward(const Tensor& cached_input, const Tensor& weights,
                          const Tensor& upstream);
void dense_backward_into(const Tensor& cached_input, const Tensor& weights,
                         const Tensor& upstream, Tensor& d_weights, Tensor& d_bias,
                         Tensor* d_input);

// ---- elementwise activations

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_(const Tensor& x);
double sigmoid(double x);

Tensor relu_backward(const Tensor& cached_input, const Tensor& upstream);
// Sigmoid and tanh derivatives are expressed through the forward output.
Tensor sigmoid_backward(const Tensor& cached_output, const Tensor& upstream);
Tensor tanh_backward(const Tensor& cached_output, const Tensor& upstream);

// ---- output layer

Tensor softmax(const Tensor& logits);

struct CrossEntropy {
  double loss = 0.0;
  Tensor grad;  // d loss / d logits
};

CrossEntropy softmax_cross_entropy(const Tensor& logits, std::size_t target);

// Index of the largest element; ties resolve to the lowest index.
std::size_t argmax(const Tensor& t);

// ---- inverted dropout

struct DropoutResult {
  Tensor output;
  Tensor mask;  // per-element scale: 0 or 1/(1-rate); empty in eval mode
};

DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng);
Tensor dropout_backward(const DropoutResult& forward, const Tensor& upstream);

// ---- initialisers

void fill_uniform(Tensor& t, double limit, Rng& rng);
// He-uniform: limit sqrt(6 / fan_in).
void fill_he_uniform(Tensor& t, std::size_t fan_in, Rng& rng);

}  // namespace antcode
