#include "antcode/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace antcode {

const Tensor& LayerGrads::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw std::out_of_range("no gradient named " + name);
  return it->second;
}

static void require_cache(const Tensor& cached, const char* layer) {
  if (cached.empty()) {
    throw std::logic_error(std::string(layer) + " backward: missing forward cache");
  }
}

// ---------------------------------------------------------------- conv2d

static void check_conv_shapes(const Tensor& input, const Tensor& kernels) {
  if (input.rank() != 3) {
    throw std::invalid_argument("conv2d: input must be [C,H,W], got " + shape_string(input.shape()));
  }
  if (kernels.rank() != 4 || kernels.dim(2) != 3 || kernels.dim(3) != 3) {
    throw std::invalid_argument("conv2d: kernels must be [C_out,C_in,3,3], got " +
                                shape_string(kernels.shape()));
  }
  if (kernels.dim(1) != input.dim(0)) {
    throw std::invalid_argument("conv2d: kernel C_in " + std::to_string(kernels.dim(1)) +
                                " does not match input channels " + std::to_string(input.dim(0)));
  }
}

namespace {

// Valid output range along one axis for kernel offset `off` in {-1,0,1}.
struct Span1d {
  std::size_t begin;
  std::size_t end;
};

Span1d valid_range(std::size_t extent, int off) {
  const std::size_t begin = off < 0 ? 1 : 0;
  const std::size_t end = off > 0 ? extent - 1 : extent;
  return {begin, end};
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  check_conv_shapes(input, kernels);
  const std::size_t c_out = kernels.dim(0), c_in = input.dim(0);
  const std::size_t h = input.dim(1), w = input.dim(2);
  require_shape(bias, {c_out}, "conv2d bias");

  Tensor out({c_out, h, w});
  for (std::size_t co = 0; co < c_out; ++co) {
    double* plane = out.data() + co * h * w;
    std::fill(plane, plane + h * w, bias[co]);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double* in_plane = input.data() + ci * h * w;
      const double* k = kernels.data() + (co * c_in + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const Span1d ys = valid_range(h, dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const Span1d xs = valid_range(w, dx);
          const double weight = k[ky * 3 + kx];
          for (std::size_t y = ys.begin; y < ys.end; ++y) {
            const double* src = in_plane + (y + dy) * w + xs.begin + dx;
            axpy(weight, src, plane + y * w + xs.begin, xs.end - xs.begin);
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward_into(const Tensor& cached_input, const Tensor& kernels,
                          const Tensor& upstream, Tensor& d_kernels, Tensor& d_bias,
                          Tensor* d_input) {
  require_cache(cached_input, "conv2d");
  check_conv_shapes(cached_input, kernels);
  const std::size_t c_out = kernels.dim(0), c_in = cached_input.dim(0);
  const std::size_t h = cached_input.dim(1), w = cached_input.dim(2);
  require_shape(upstream, {c_out, h, w}, "conv2d upstream");
  require_shape(d_kernels, kernels.shape(), "conv2d kernel grad");
  require_shape(d_bias, {c_out}, "conv2d bias grad");
  if (d_input) require_shape(*d_input, cached_input.shape(), "conv2d input grad");

  for (std::size_t co = 0; co < c_out; ++co) {
    const double* up = upstream.data() + co * h * w;
    double s = 0.0;
    for (std::size_t i = 0; i < h * w; ++i) s += up[i];
    d_bias[co] += s;
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double* in_plane = cached_input.data() + ci * h * w;
      double* din_plane = d_input ? d_input->data() + ci * h * w : nullptr;
      const std::size_t kofs = (co * c_in + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const Span1d ys = valid_range(h, dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const Span1d xs = valid_range(w, dx);
          const std::size_t n = xs.end - xs.begin;
          const double weight = kernels[kofs + ky * 3 + kx];
          double acc = 0.0;
          for (std::size_t y = ys.begin; y < ys.end; ++y) {
            const double* up_row = up + y * w + xs.begin;
            const std::size_t src = (y + dy) * w + xs.begin + dx;
            acc += dot(up_row, in_plane + src, n);
            if (din_plane) axpy(weight, up_row, din_plane + src, n);
          }
          d_kernels[kofs + ky * 3 + kx] += acc;
        }
      }
    }
  }
}

LayerGrads conv2d_backward(const Tensor& cached_input, const Tensor& kernels,
                           const Tensor& upstream) {
  require_cache(cached_input, "conv2d");
  check_conv_shapes(cached_input, kernels);
  LayerGrads g;
  Tensor dk = Tensor::zeros_like(kernels);
  Tensor db({kernels.dim(0)});
  g.input = Tensor::zeros_like(cached_input);
  conv2d_backward_into(cached_input, kernels, upstream, dk, db, &g.input);
  g.params.emplace("kernels", std::move(dk));
  g.params.emplace("bias", std::move(db));
  return g;
}

// --------------------------------------------------------------- maxpool2

PoolResult maxpool2(const Tensor& input) {
  if (input.rank() != 3) {
    throw std::invalid_argument("maxpool2: input must be [C,H,W], got " + shape_string(input.shape()));
  }
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw std::invalid_argument("maxpool2: spatial dims must be even, got " +
                                shape_string(input.shape()));
  }
  PoolResult r;
  r.input_shape = input.shape();
  r.output = Tensor({c, h / 2, w / 2});
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; y += 2) {
      for (std::size_t x = 0; x < w; x += 2, ++o) {
        const std::size_t base = (ch * h + y) * w + x;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (int k = 1; k < 4; ++k) {
          if (input[cand[k]] > input[best]) best = cand[k];
        }
        r.output[o] = input[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

Tensor maxpool2_backward(const PoolResult& forward, const Tensor& upstream) {
  if (forward.argmax.empty()) throw std::logic_error("maxpool2 backward: missing forward cache");
  require_shape(upstream, forward.output.shape(), "maxpool2 upstream");
  Tensor d(forward.input_shape);
  for (std::size_t i = 0; i < upstream.size(); ++i) d[forward.argmax[i]] += upstream[i];
  return d;
}

// ------------------------------------------------------------------ dense

static void check_dense_shapes(const Tensor& input, const Tensor& weights) {
  if (weights.rank() != 2) {
    throw std::invalid_argument("dense: weights must be [out,in], got " +
                                shape_string(weights.shape()));
  }
  require_shape(input, {weights.dim(1)}, "dense input");
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  check_dense_shapes(input, weights);
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  require_shape(bias, {m}, "dense bias");
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = dot(weights.data() + i * n, input.data(), n) + bias[i];
  }
  return out;
}

void dense_backward_into(const Tensor& cached_input, const Tensor& weights,
                         const Tensor& upstream, Tensor& d_weights, Tensor& d_bias,
                         Tensor* d_input) {
  require_cache(cached_input, "dense");
  check_dense_shapes(cached_input, weights);
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  require_shape(upstream, {m}, "dense upstream");
  require_shape(d_weights, weights.shape(), "dense weight grad");
  require_shape(d_bias, {m}, "dense bias grad");
  if (d_input) require_shape(*d_input, {n}, "dense input grad");
  for (std::size_t i = 0; i < m; ++i) {
    const double g = upstream[i];
    if (g == 0.0) continue;
    d_bias[i] += g;
    axpy(g, cached_input.data(), d_weights.data() + i * n, n);
    if (d_input) axpy(g, weights.data() + i * n, d_input->data(), n);
  }
}

LayerGrads dense_backward(const Tensor& cached_input, const Tensor& weights,
                          const Tensor& upstream) {
  require_cache(cached_input, "dense");
  check_dense_shapes(cached_input, weights);
  LayerGrads g;
  Tensor dw = Tensor::zeros_like(weights);
  Tensor db({weights.dim(0)});
  g.input = Tensor::zeros_like(cached_input);
  dense_backward_into(cached_input, weights, upstream, dw, db, &g.input);
  g.params.emplace("weights", std::move(dw));
  g.params.emplace("bias", std::move(db));
  return g;
}

// ------------------------------------------------------------ activations

double sigmoid(double x) {
  // Branching keeps exp() from overflowing for large |x|.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <class F>
static Tensor map(const Tensor& x, F f) {
  Tensor out = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

Tensor relu(const Tensor& x) {
  return map(x, [](double v) { return v > 0.0 ? v : 0.0; });
}
Tensor sigmoid(const Tensor& x) {
  return map(x, [](double v) { return sigmoid(v); });
}
Tensor tanh_(const Tensor& x) {
  return map(x, [](double v) { return std::tanh(v); });
}

Tensor relu_backward(const Tensor& cached_input, const Tensor& upstream) {
  require_cache(cached_input, "relu");
  require_shape(upstream, cached_input.shape(), "relu upstream");
  Tensor d = Tensor::zeros_like(upstream);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = cached_input[i] > 0.0 ? upstream[i] : 0.0;
  return d;
}

Tensor sigmoid_backward(const Tensor& cached_output, const Tensor& upstream) {
  require_cache(cached_output, "sigmoid");
  require_shape(upstream, cached_output.shape(), "sigmoid upstream");
  Tensor d = Tensor::zeros_like(upstream);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double s = cached_output[i];
    d[i] = upstream[i] * s * (1.0 - s);
  }
  return d;
}

Tensor tanh_backward(const Tensor& cached_output, const Tensor& upstream) {
  require_cache(cached_output, "tanh");
  require_shape(upstream, cached_output.shape(), "tanh upstream");
  Tensor d = Tensor::zeros_like(upstream);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double t = cached_output[i];
    d[i] = upstream[i] * (1.0 - t * t);
  }
  return d;
}

// ----------------------------------------------------------------- softmax

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1) throw std::invalid_argument("softmax: logits must be a vector");
  double top = -std::numeric_limits<double>::infinity();
  for (double v : logits.values()) top = std::max(top, v);
  Tensor p = Tensor::zeros_like(logits);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  p *= 1.0 / sum;
  return p;
}

CrossEntropy softmax_cross_entropy(const Tensor& logits, std::size_t target) {
  if (logits.rank() != 1) throw std::invalid_argument("softmax_cross_entropy: logits must be a vector");
  if (target >= logits.size()) {
    throw std::out_of_range("softmax_cross_entropy: target " + std::to_string(target) +
                            " outside [0, " + std::to_string(logits.size()) + ")");
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double v : logits.values()) top = std::max(top, v);
  double sum = 0.0;
  for (double v : logits.values()) sum += std::exp(v - top);
  const double log_z = top + std::log(sum);

  CrossEntropy ce;
  ce.loss = log_z - logits[target];
  ce.grad = Tensor::zeros_like(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) ce.grad[i] = std::exp(logits[i] - log_z);
  ce.grad[target] -= 1.0;
  return ce;
}

std::size_t argmax(const Tensor& t) {
  if (t.empty()) throw std::invalid_argument("argmax of empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] > t[best]) best = i;
  }
  return best;
}

// ----------------------------------------------------------------- dropout

DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  DropoutResult r;
  if (mode == Mode::eval || rate == 0.0) {
    r.output = input;
    return r;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  r.mask = Tensor::zeros_like(input);
  r.output = Tensor::zeros_like(input);
  for (std::size_t i = 0; i < input.size(); ++i) {
    r.mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    r.output[i] = input[i] * r.mask[i];
  }
  return r;
}

Tensor dropout_backward(const DropoutResult& forward, const Tensor& upstream) {
  if (forward.mask.empty()) return upstream;
  require_shape(upstream, forward.mask.shape(), "dropout upstream");
  Tensor d = upstream;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= forward.mask[i];
  return d;
}

// ------------------------------------------------------------ initialisers

void fill_uniform(Tensor& t, double limit, Rng& rng) {
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
}

void fill_he_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  fill_uniform(t, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
}

}  // namespace antcode
