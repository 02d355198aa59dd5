#include "antcode/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <stdexcept>

#include "antcode/codec.hpp"
#include "antcode/encoder.hpp"
#include "antcode/layers.hpp"
#include "antcode/lstm.hpp"

namespace antcode {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

bool GradcheckReport::passed() const { return failed_components().empty(); }

std::vector<std::string> GradcheckReport::failed_components() const {
  std::vector<std::string> out;
  for (const GradcheckEntry& e : entries) {
    if (!(e.worst <= tolerance) && std::find(out.begin(), out.end(), e.component) == out.end()) {
      out.push_back(e.component);
    }
  }
  return out;
}

double GradcheckReport::worst(std::string_view component) const {
  double w = 0.0;
  for (const GradcheckEntry& e : entries) {
    if (e.component == component) w = std::max(w, e.worst);
  }
  return w;
}

std::size_t GradcheckReport::scalars_checked(std::string_view component) const {
  std::size_t n = 0;
  for (const GradcheckEntry& e : entries) {
    if (e.component == component) n += e.checked;
  }
  return n;
}

std::size_t GradcheckReport::kinks(std::string_view component) const {
  std::size_t n = 0;
  for (const GradcheckEntry& e : entries) {
    if (e.component == component) n += e.kinks;
  }
  return n;
}

std::string GradcheckReport::to_text() const {
  std::string out;
  char buf[256];
  std::vector<std::string> components;
  for (const GradcheckEntry& e : entries) {
    if (std::find(components.begin(), components.end(), e.component) == components.end()) {
      components.push_back(e.component);
    }
  }
  for (const std::string& c : components) {
    const double w = worst(c);
    std::snprintf(buf, sizeof buf, "%-4s %-24s worst %.3e over %zu scalars",
                  w <= tolerance ? "ok" : "FAIL", c.c_str(), w, scalars_checked(c));
    out += buf;
    if (const std::size_t k = kinks(c); k > 0) out += " (" + std::to_string(k) + " skipped at kinks)";
    out += '\n';
    for (const GradcheckEntry& e : entries) {
      if (e.component != c) continue;
      std::snprintf(buf, sizeof buf, "       %-34s %4zu checked, worst %.3e", e.tensor.c_str(),
                    e.checked, e.worst);
      out += buf;
      if (e.kinks > 0) out += ", " + std::to_string(e.kinks) + " at kinks";
      out += '\n';
    }
  }
  std::snprintf(buf, sizeof buf, "%s (tolerance %.0e)\n", passed() ? "PASSED" : "FAILED", tolerance);
  out += buf;
  return out;
}

GradcheckEntry check_tensor(std::string component, std::string name, Tensor& value,
                            const Tensor& analytic, const std::function<double()>& loss,
                            double step, std::size_t max_checks, Rng& rng,
                            const PatternFn& pattern) {
  require_shape(analytic, value.shape(), "analytic gradient");
  std::vector<std::size_t> indices;
  if (max_checks == 0 || max_checks >= value.size()) {
    indices.resize(value.size());
    std::iota(indices.begin(), indices.end(), 0);
  } else {
    std::set<std::size_t> picked;
    while (picked.size() < max_checks) picked.insert(static_cast<std::size_t>(rng.below(value.size())));
    indices.assign(picked.begin(), picked.end());
  }
  GradcheckEntry e{std::move(component), std::move(name), 0, 0.0, 0};
  for (std::size_t i : indices) {
    const double original = value[i];
    value[i] = original + step;
    const double plus = loss();
    ActivationPattern plus_pattern;
    if (pattern) plus_pattern = pattern();
    value[i] = original - step;
    const double minus = loss();
    const bool kink = pattern && pattern() != plus_pattern;
    value[i] = original;
    if (kink) {
      ++e.kinks;
      continue;
    }
    ++e.checked;
    const double numeric = (plus - minus) / (2 * step);
    const double err = relative_error(analytic[i], numeric);
    e.worst = std::isfinite(err) ? std::max(e.worst, err) : INFINITY;
  }
  return e;
}

ModelConfig gradcheck_model_config() {
  ModelConfig c;
  c.encoder.input_size = 32;
  c.encoder.input_channels = 1;
  c.encoder.plan = {{1, 2}, {1, 2}, {1, 2}, {1, 2}, {1, 2}};
  c.encoder.fc_widths = {16, 16};
  c.width = 16;
  c.vocab_size = 11;
  c.max_len = 16;
  c.decode_limit = 16;
  return c;
}

namespace {

Tensor random_tensor(Shape shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero, so ReLU kinks stay out of reach of the step.
Tensor away_from_zero(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.1, 1.0);
  return t;
}

// Zero-initialised biases put pre-activations over dead regions exactly on
// the ReLU kink; the check instance uses biases bounded away from zero.
void offset_biases(Tensor& bias, Rng& rng) {
  for (double& v : bias.values()) v = (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.05, 0.2);
}

void append_signs(const Tensor& t, ActivationPattern& out) {
  for (double v : t.values()) out.push_back(v > 0 ? 1u : 0u);
}

void append_encoder_pattern(const Tensor& image, const EncoderParams& p, const EncoderConfig& config,
                            ActivationPattern& out) {
  EncoderCache cache;
  encode(image, p, config, cache);
  for (const Tensor& t : cache.conv_outputs) append_signs(t, out);
  for (const PoolResult& pool : cache.pools) out.insert(out.end(), pool.argmax.begin(), pool.argmax.end());
  append_signs(cache.fc1_pre, out);
  append_signs(cache.fc2_pre, out);
}

double weighted(const Tensor& t, const Tensor& w) { return dot(t.data(), w.data(), t.size()); }

class Suite {
 public:
  Suite(const GradcheckOptions& options, GradcheckReport& report)
      : options_(options), report_(report), rng_(mix_seed(options.seed, 99)) {}

  void check(const std::string& component, const std::string& name, Tensor& value,
             const Tensor& analytic, const std::function<double()>& loss,
             std::size_t max_checks = 0, const PatternFn& pattern = {}) {
    report_.entries.push_back(check_tensor(component, name, value, analytic, loss, options_.step,
                                           max_checks, rng_, pattern));
  }

  Rng& rng() { return rng_; }

 private:
  const GradcheckOptions& options_;
  GradcheckReport& report_;
  Rng rng_;
};

void dense_suite(Suite& s, const GradcheckOptions& options) {
  Rng& rng = s.rng();
  Tensor x = random_tensor({5}, -1, 1, rng);
  Tensor w = random_tensor({4, 5}, -1, 1, rng);
  Tensor b = random_tensor({4}, -1, 1, rng);
  const Tensor up = random_tensor({4}, -1, 1, rng);
  Tensor dw = Tensor::zeros_like(w), db = Tensor::zeros_like(b), dx = Tensor::zeros_like(x);
  options.dense_backward(x, w, up, dw, db, &dx);
  auto loss = [&] { return weighted(dense(x, w, b), up); };
  s.check("dense", "weights", w, dw, loss);
  s.check("dense", "bias", b, db, loss);
  s.check("dense", "input", x, dx, loss);
}

void conv_suite(Suite& s) {
  Rng& rng = s.rng();
  Tensor x = random_tensor({2, 5, 5}, -1, 1, rng);
  Tensor k = random_tensor({3, 2, 3, 3}, -1, 1, rng);
  Tensor b = random_tensor({3}, -1, 1, rng);
  const Tensor up = random_tensor({3, 5, 5}, -1, 1, rng);
  const LayerGrads g = conv2d_backward(x, k, up);
  auto loss = [&] { return weighted(conv2d(x, k, b), up); };
  s.check("conv2d", "kernels", k, g.param("kernels"), loss);
  s.check("conv2d", "bias", b, g.param("bias"), loss);
  s.check("conv2d", "input", x, g.input, loss);
}

void pool_suite(Suite& s) {
  Rng& rng = s.rng();
  // A shuffled ramp keeps every pooling window free of near-ties.
  Tensor x({2, 4, 6});
  std::vector<double> ramp(x.size());
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.1 * static_cast<double>(i) - 2.0;
  rng.shuffle(ramp);
  std::copy(ramp.begin(), ramp.end(), x.data());
  const Tensor up = random_tensor({2, 2, 3}, -1, 1, rng);
  const Tensor dx = maxpool2_backward(maxpool2(x), up);
  s.check("maxpool2", "input", x, dx, [&] { return weighted(maxpool2(x).output, up); });
}

void activation_suite(Suite& s) {
  Rng& rng = s.rng();
  Tensor x = away_from_zero({7}, rng);
  const Tensor up = random_tensor({7}, -1, 1, rng);
  s.check("relu", "input", x, relu_backward(x, up), [&] { return weighted(relu(x), up); });
  s.check("sigmoid", "input", x, sigmoid_backward(sigmoid(x), up),
          [&] { return weighted(sigmoid(x), up); });
  s.check("tanh", "input", x, tanh_backward(tanh_(x), up), [&] { return weighted(tanh_(x), up); });

  Tensor logits = random_tensor({7}, -2, 2, rng);
  s.check("softmax_cross_entropy", "logits", logits, softmax_cross_entropy(logits, 3).grad,
          [&] { return softmax_cross_entropy(logits, 3).loss; });

  // Fixed mask: every forward call replays the same generator seed.
  const std::uint64_t mask_seed = rng.next();
  auto drop = [&] {
    Rng r(mask_seed);
    return dropout(x, 0.5, Mode::train, r);
  };
  s.check("dropout", "input", x, dropout_backward(drop(), up),
          [&] { return weighted(drop().output, up); });

  EmbeddingParams emb{random_tensor({6, 4}, -1, 1, rng)};
  const std::vector<int> seq = {1, 3, 3, 0, 5};
  const Tensor eup = random_tensor({seq.size(), 4}, -1, 1, rng);
  s.check("embedding", "matrix", emb.matrix, embed_backward(seq, eup, emb),
          [&] { return weighted(embed(seq, emb), eup); });
}

void lstm_suite(Suite& s) {
  Rng& rng = s.rng();
  const std::size_t e = 3, h = 4, steps = 5;
  LstmParams p = LstmParams::initialized(e, h, rng);
  p.for_each([&](const char*, Tensor& t) {
    for (double& v : t.values()) v += rng.uniform(-0.5, 0.5);
  });
  std::vector<Tensor> xs;
  for (std::size_t t = 0; t < steps; ++t) xs.push_back(random_tensor({e}, -1, 1, rng));
  std::vector<Tensor> ups;
  for (std::size_t t = 0; t < steps; ++t) ups.push_back(random_tensor({h}, -1, 1, rng));
  ups[1] = Tensor();  // an unsupervised step

  auto loss = [&] {
    const LstmSequence seq = lstm_forward(xs, p);
    double total = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      if (!ups[t].empty()) total += weighted(seq.hidden[t], ups[t]);
    }
    return total;
  };
  const LstmGrads g = lstm_backward(ups, lstm_forward(xs, p).caches, p);
  LstmParams& gp = const_cast<LstmParams&>(g.params);
  std::vector<std::pair<std::string, Tensor*>> grads;
  gp.for_each([&](const char* n, Tensor& t) { grads.emplace_back(n, &t); });
  std::size_t i = 0;
  p.for_each([&](const char* n, Tensor& t) { s.check("lstm_bptt", n, t, *grads[i++].second, loss); });
  for (std::size_t t = 0; t < steps; ++t) {
    s.check("lstm_bptt", "x" + std::to_string(t), xs[t], g.inputs[t], loss);
  }
}

void encoder_suite(Suite& s, const EncoderConfig& config, std::size_t max_checks) {
  Rng& rng = s.rng();
  EncoderParams p = EncoderParams::initialized(config, rng);
  for (Tensor& b : p.biases) offset_biases(b, rng);
  offset_biases(p.fc1_b, rng);
  offset_biases(p.fc2_b, rng);
  Tensor image = random_tensor({config.input_channels, config.input_size, config.input_size}, 0, 1, rng);
  const Tensor up = random_tensor({config.feature_width()}, -1, 1, rng);
  EncoderCache cache;
  encode(image, p, config, cache);
  const EncoderGrads g = encoder_backward(up, cache, p, config);
  auto loss = [&] { return weighted(encode(image, p, config), up); };
  auto pattern = [&] {
    ActivationPattern out;
    append_encoder_pattern(image, p, config, out);
    return out;
  };
  EncoderParams& gp = const_cast<EncoderParams&>(g.params);
  std::vector<Tensor*> grads;
  gp.for_each([&](const std::string&, Tensor& t) { grads.push_back(&t); });
  std::size_t i = 0;
  p.for_each([&](const std::string& n, Tensor& t) { s.check("encoder", n, t, *grads[i++], loss, max_checks, pattern); });
  s.check("encoder", "image", image, g.input, loss, max_checks, pattern);
}

void model_suite(Suite& s, const ModelConfig& config, std::size_t max_checks) {
  Rng& rng = s.rng();
  ModelParams p = ModelParams::initialized(config, rng);
  for (Tensor& b : p.encoder.biases) offset_biases(b, rng);
  offset_biases(p.encoder.fc1_b, rng);
  offset_biases(p.encoder.fc2_b, rng);
  offset_biases(p.img_proj.bias, rng);
  offset_biases(p.head1.bias, rng);
  // Larger embeddings keep LSTM input-weight gradients well above the
  // roundoff floor of the difference quotient.
  p.embedding.matrix *= 10.0;
  const Tensor image =
      random_tensor({config.encoder.input_channels, config.encoder.input_size, config.encoder.input_size},
                    0, 1, rng);
  auto token = [&] { return static_cast<int>(4 + rng.below(config.vocab_size - 4)); };

  // Encoder pattern plus the head's ReLU signs for every scored prefix.
  auto pattern_for = [&](std::span<const int> seq, std::size_t first) {
    ActivationPattern out;
    append_encoder_pattern(image, p.encoder, config.encoder, out);
    const Tensor img = image_branch(image, p, config);
    for (std::size_t k = first; k < seq.size(); ++k) {
      const Tensor fused = img + text_branch(seq.first(k), p);
      append_signs(dense(fused, p.head1.weights, p.head1.bias), out);
    }
    return out;
  };

  // One pair with a four-token prefix.
  const TrainingPair pair{"check", {kStart, token(), token(), token()}, token()};
  {
    PairGrads g = loss_and_grads(image, pair, p, config);
    auto loss = [&] { return loss_and_grads(image, pair, p, config).loss; };
    TokenSeq full = pair.prefix;
    full.push_back(pair.target);
    auto pattern = [&] { return pattern_for(full, full.size() - 1); };
    auto params = p.named_tensors();
    auto grads = g.grads.named_tensors();
    for (std::size_t i = 0; i < params.size(); ++i) {
      s.check("model", params[i].first, *params[i].second, *grads[i].second, loss, max_checks,
              pattern);
    }
  }
  // Every pair of a whole sequence through one shared unroll.
  const TokenSeq seq = {kStart, token(), token(), token(), token(), kEnd};
  {
    auto pattern = [&] { return pattern_for(seq, 1); };
    ModelParams g = ModelParams::zeros(config);
    Rng unused;
    accumulate_sequence_grads(image, seq, p, config, Mode::eval, unused, g);
    auto loss = [&] { return score_sequence(image, seq, p, config).loss_sum; };
    auto params = p.named_tensors();
    auto grads = g.named_tensors();
    for (std::size_t i = 0; i < params.size(); ++i) {
      s.check("model_sequence", params[i].first, *params[i].second, *grads[i].second, loss,
              max_checks / 2, pattern);
    }
  }
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (options.scale != "mini" && options.scale != "full") {
    throw std::invalid_argument("gradcheck scale must be mini or full");
  }
  GradcheckReport report;
  report.tolerance = options.tolerance;
  Suite s(options, report);
  dense_suite(s, options);
  conv_suite(s);
  pool_suite(s);
  activation_suite(s);
  lstm_suite(s);

  ModelConfig model = gradcheck_model_config();
  std::size_t max_checks = 16;
  if (options.scale == "full") {
    model = ModelConfig{};
    model.vocab_size = 64;
    max_checks = 6;
  }
  encoder_suite(s, model.encoder, max_checks);
  model_suite(s, model, max_checks);
  return report;
}

}  // namespace antcode
