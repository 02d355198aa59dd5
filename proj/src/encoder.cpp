#include "antcode/encoder.hpp"

#include <stdexcept>

namespace antcode {

EncoderConfig EncoderConfig::mini() {
  EncoderConfig c;
  c.input_size = 64;
  c.plan = {{2, 8}, {2, 16}, {3, 32}, {3, 32}, {3, 32}};
  c.fc_widths = {256, 256};
  return c;
}

EncoderConfig EncoderConfig::full() {
  EncoderConfig c;
  c.input_size = 224;
  c.plan = {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
  c.fc_widths = {4096, 4096};
  return c;
}

std::size_t EncoderConfig::flattened_width() const {
  const std::size_t s = pooled_size();
  return plan.back().channels * s * s;
}

std::size_t EncoderConfig::conv_layer_count() const {
  std::size_t n = 0;
  for (const ConvGroup& g : plan) n += g.layers;
  return n;
}

void EncoderConfig::validate() const {
  if (plan.size() != kGroups) {
    throw std::invalid_argument("encoder plan must have 5 conv groups, got " +
                                std::to_string(plan.size()));
  }
  for (const ConvGroup& g : plan) {
    if (g.layers == 0 || g.channels == 0) {
      throw std::invalid_argument("encoder conv groups need at least one layer and channel");
    }
  }
  if (input_size == 0 || input_size % (std::size_t{1} << kGroups) != 0) {
    throw std::invalid_argument("encoder input size " + std::to_string(input_size) +
                                " is not divisible by 32");
  }
  if (input_channels == 0 || fc_widths[0] == 0 || fc_widths[1] == 0) {
    throw std::invalid_argument("encoder channel and FC widths must be positive");
  }
}

EncoderParams EncoderParams::zeros(const EncoderConfig& config) {
  config.validate();
  EncoderParams p;
  std::size_t c_in = config.input_channels;
  for (const ConvGroup& g : config.plan) {
    for (std::size_t l = 0; l < g.layers; ++l) {
      p.kernels.emplace_back(Shape{g.channels, c_in, 3, 3});
      p.biases.emplace_back(Shape{g.channels});
      c_in = g.channels;
    }
  }
  p.fc1_w = Tensor({config.fc_widths[0], config.flattened_width()});
  p.fc1_b = Tensor({config.fc_widths[0]});
  p.fc2_w = Tensor({config.fc_widths[1], config.fc_widths[0]});
  p.fc2_b = Tensor({config.fc_widths[1]});
  return p;
}

EncoderParams EncoderParams::initialized(const EncoderConfig& config, Rng& rng) {
  EncoderParams p = zeros(config);
  for (Tensor& k : p.kernels) fill_he_uniform(k, k.dim(1) * 9, rng);
  fill_he_uniform(p.fc1_w, p.fc1_w.dim(1), rng);
  fill_he_uniform(p.fc2_w, p.fc2_w.dim(1), rng);
  return p;
}

static Tensor prepare_input(const Tensor& image, const EncoderConfig& config, bool& replicated) {
  const std::size_t s = config.input_size;
  replicated = false;
  if (image.rank() == 3 && image.dim(0) == 1 && config.input_channels > 1 &&
      config.replicate_gray && image.dim(1) == s && image.dim(2) == s) {
    Tensor out({config.input_channels, s, s});
    for (std::size_t c = 0; c < config.input_channels; ++c) {
      std::copy(image.data(), image.data() + s * s, out.data() + c * s * s);
    }
    replicated = true;
    return out;
  }
  require_shape(image, {config.input_channels, s, s}, "encoder image");
  return image;
}

Tensor encode(const Tensor& image, const EncoderParams& params, const EncoderConfig& config) {
  EncoderCache cache;
  return encode(image, params, config, cache);
}

Tensor encode(const Tensor& image, const EncoderParams& params, const EncoderConfig& config,
              EncoderCache& cache) {
  config.validate();
  if (params.kernels.size() != config.conv_layer_count()) {
    throw std::invalid_argument("encoder parameters do not match the conv plan");
  }
  cache = EncoderCache{};
  Tensor x = prepare_input(image, config, cache.replicated);
  std::size_t layer = 0;
  for (const ConvGroup& g : config.plan) {
    for (std::size_t l = 0; l < g.layers; ++l, ++layer) {
      Tensor pre = conv2d(x, params.kernels[layer], params.biases[layer]);
      cache.conv_inputs.push_back(std::move(x));
      x = relu(pre);
      cache.conv_outputs.push_back(std::move(pre));
    }
    PoolResult pooled = maxpool2(x);
    x = pooled.output;
    cache.pools.push_back(std::move(pooled));
  }
  cache.flat = x.reshaped({x.size()});
  cache.fc1_pre = dense(cache.flat, params.fc1_w, params.fc1_b);
  cache.fc1_out = relu(cache.fc1_pre);
  cache.fc2_pre = dense(cache.fc1_out, params.fc2_w, params.fc2_b);
  return relu(cache.fc2_pre);
}

void encoder_backward_into(const Tensor& upstream, const EncoderCache& cache,
                           const EncoderParams& params, const EncoderConfig& config,
                           EncoderParams& grads, Tensor* d_image) {
  if (cache.fc2_pre.empty() || cache.conv_inputs.size() != params.kernels.size()) {
    throw std::logic_error("encoder backward: missing forward cache");
  }
  require_shape(upstream, {config.feature_width()}, "encoder upstream");

  Tensor d = relu_backward(cache.fc2_pre, upstream);
  Tensor d_fc1_out({config.fc_widths[0]});
  dense_backward_into(cache.fc1_out, params.fc2_w, d, grads.fc2_w, grads.fc2_b, &d_fc1_out);
  d = relu_backward(cache.fc1_pre, d_fc1_out);
  Tensor d_flat = Tensor::zeros_like(cache.flat);
  dense_backward_into(cache.flat, params.fc1_w, d, grads.fc1_w, grads.fc1_b, &d_flat);

  d = d_flat.reshaped(cache.pools.back().output.shape());
  std::size_t layer = params.kernels.size();
  for (std::size_t g = config.plan.size(); g-- > 0;) {
    d = maxpool2_backward(cache.pools[g], d);
    for (std::size_t l = 0; l < config.plan[g].layers; ++l) {
      --layer;
      d = relu_backward(cache.conv_outputs[layer], d);
      const bool need_input = layer > 0 || d_image != nullptr;
      Tensor d_in = need_input ? Tensor::zeros_like(cache.conv_inputs[layer]) : Tensor();
      conv2d_backward_into(cache.conv_inputs[layer], params.kernels[layer], d,
                           grads.kernels[layer], grads.biases[layer],
                           need_input ? &d_in : nullptr);
      d = std::move(d_in);
    }
  }
  if (d_image) {
    if (cache.replicated) {
      const std::size_t plane = config.input_size * config.input_size;
      Tensor folded({1, config.input_size, config.input_size});
      for (std::size_t c = 0; c < config.input_channels; ++c) {
        axpy(1.0, d.data() + c * plane, folded.data(), plane);
      }
      d = std::move(folded);
    }
    *d_image = std::move(d);
  }
}

EncoderGrads encoder_backward(const Tensor& upstream, const EncoderCache& cache,
                              const EncoderParams& params, const EncoderConfig& config) {
  EncoderGrads g;
  g.params = EncoderParams::zeros(config);
  encoder_backward_into(upstream, cache, params, config, g.params, &g.input);
  return g;
}

}  // namespace antcode
