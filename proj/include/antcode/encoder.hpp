#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "antcode/layers.hpp"
#include "antcode/rng.hpp"
#include "antcode/tensor.hpp"

namespace antcode {

struct ConvGroup {
  std::size_t layers = 0;
  std::size_t channels = 0;

  friend bool operator==(const ConvGroup&, const ConvGroup&) = default;
};

// VGG-style plan: five groups of 3x3 same-padded conv+ReLU layers, each
// group followed by a 2x2/stride-2 max-pool, then two ReLU fully
// connected layers. The last FC width is the feature width.
struct EncoderConfig {
  static constexpr std::size_t kGroups = 5;

  std::size_t input_size = 64;
  std::size_t input_channels = 1;
  // Feed a one-channel image into every input channel.
  bool replicate_gray = false;
  std::vector<ConvGroup> plan;
  std::array<std::size_t, 2> fc_widths{256, 256};

  // Desk-scale default: 64x64 input, channels (8,16,32,32,32), FC 256.
  static EncoderConfig mini();
  // VGG16 proportions: 224x224, channels (64,128,256,512,512), FC 4096.
  static EncoderConfig full();

  std::size_t feature_width() const { return fc_widths[1]; }
  std::size_t pooled_size() const { return input_size >> kGroups; }
  std::size_t flattened_width() const;
  std::size_t conv_layer_count() const;
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct EncoderParams {
  std::vector<Tensor> kernels;  // one per conv layer, [C_out, C_in, 3, 3]
  std::vector<Tensor> biases;
  Tensor fc1_w, fc1_b, fc2_w, fc2_b;

  static EncoderParams zeros(const EncoderConfig& config);
  // He-uniform weights, zero biases.
  static EncoderParams initialized(const EncoderConfig& config, Rng& rng);

  template <class F>
  void for_each(F&& f) {
    for (std::size_t i = 0; i < kernels.size(); ++i) {
      f("conv" + std::to_string(i) + ".kernels", kernels[i]);
      f("conv" + std::to_string(i) + ".bias", biases[i]);
    }
    f(std::string("fc1.weights"), fc1_w);
    f(std::string("fc1.bias"), fc1_b);
    f(std::string("fc2.weights"), fc2_w);
    f(std::string("fc2.bias"), fc2_b);
  }
};

struct EncoderCache {
  std::vector<Tensor> conv_inputs;   // input of each conv layer
  std::vector<Tensor> conv_outputs;  // pre-ReLU output of each conv layer
  std::vector<PoolResult> pools;     // one per group
  Tensor flat;
  Tensor fc1_pre, fc1_out, fc2_pre;
  bool replicated = false;
};

Tensor encode(const Tensor& image, const EncoderParams& params, const EncoderConfig& config);
Tensor encode(const Tensor& image, const EncoderParams& params, const EncoderConfig& config,
              EncoderCache& cache);

struct EncoderGrads {
  EncoderParams params;
  Tensor input;
};

EncoderGrads encoder_backward(const Tensor& upstream, const EncoderCache& cache,
                              const EncoderParams& params, const EncoderConfig& config);
// Accumulates into `grads`; the image gradient is written when requested.
void encoder_backward_into(const Tensor& upstream, const EncoderCache& cache,
                           const EncoderParams& params, const EncoderConfig& config,
                           EncoderParams& grads, Tensor* d_image);

}  // namespace antcode
