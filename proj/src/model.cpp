#include "antcode/model.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace antcode {

// ================================================================== config

void ModelConfig::validate() const {
  encoder.validate();
  if (width == 0) throw std::invalid_argument("model width must be positive");
  if (vocab_size <= static_cast<std::size_t>(kUnk)) {
    throw std::invalid_argument("vocabulary must hold the reserved tokens and at least one more");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  }
  if (max_len < 2) throw std::invalid_argument("max_len must be at least 2");
  if (decode_limit == 0 || decode_limit > max_len) {
    throw std::invalid_argument("decode_limit must lie in [1, max_len]");
  }
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("model config: bad number for " + key + ": " + s);
  }
  return v;
}

std::size_t parse_size(const std::string& s, const std::string& key) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("model config: bad integer for " + key + ": " + s);
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "encoder.input_size=" << encoder.input_size << '\n';
  os << "encoder.input_channels=" << encoder.input_channels << '\n';
  os << "encoder.replicate_gray=" << (encoder.replicate_gray ? 1 : 0) << '\n';
  os << "encoder.plan=";
  for (std::size_t i = 0; i < encoder.plan.size(); ++i) {
    os << (i ? "," : "") << encoder.plan[i].layers << 'x' << encoder.plan[i].channels;
  }
  os << '\n';
  os << "encoder.fc=" << encoder.fc_widths[0] << ',' << encoder.fc_widths[1] << '\n';
  os << "width=" << width << '\n';
  os << "vocab_size=" << vocab_size << '\n';
  os << "max_len=" << max_len << '\n';
  os << "dropout_rate=" << shortest(dropout_rate) << '\n';
  os << "decode_limit=" << decode_limit << '\n';
  return os.str();
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("model config: malformed line " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument("model config: missing " + key);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  ModelConfig c;
  c.encoder.input_size = parse_size(take("encoder.input_size"), "encoder.input_size");
  c.encoder.input_channels = parse_size(take("encoder.input_channels"), "encoder.input_channels");
  c.encoder.replicate_gray = parse_size(take("encoder.replicate_gray"), "encoder.replicate_gray") != 0;
  c.encoder.plan.clear();
  for (const std::string& g : split(take("encoder.plan"), ',')) {
    const auto x = g.find('x');
    if (x == std::string::npos) throw std::invalid_argument("model config: bad conv group " + g);
    c.encoder.plan.push_back({parse_size(g.substr(0, x), "encoder.plan"),
                              parse_size(g.substr(x + 1), "encoder.plan")});
  }
  const auto fc = split(take("encoder.fc"), ',');
  if (fc.size() != 2) throw std::invalid_argument("model config: encoder.fc needs two widths");
  c.encoder.fc_widths = {parse_size(fc[0], "encoder.fc"), parse_size(fc[1], "encoder.fc")};
  c.width = parse_size(take("width"), "width");
  c.vocab_size = parse_size(take("vocab_size"), "vocab_size");
  c.max_len = parse_size(take("max_len"), "max_len");
  c.dropout_rate = parse_double(take("dropout_rate"), "dropout_rate");
  c.decode_limit = parse_size(take("decode_limit"), "decode_limit");
  if (!kv.empty()) throw std::invalid_argument("model config: unknown key " + kv.begin()->first);
  c.validate();
  return c;
}

// ================================================================== params

namespace {

DenseParams dense_zeros(std::size_t out, std::size_t in) {
  return {Tensor({out, in}), Tensor({out})};
}

// Glorot-uniform weights, zero bias.
DenseParams dense_init(std::size_t out, std::size_t in, Rng& rng) {
  DenseParams d = dense_zeros(out, in);
  fill_uniform(d.weights, std::sqrt(6.0 / static_cast<double>(in + out)), rng);
  return d;
}

}  // namespace

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  const std::size_t w = config.width;
  ModelParams p;
  p.encoder = EncoderParams::zeros(config.encoder);
  p.img_proj = dense_zeros(w, config.encoder.feature_width());
  p.embedding.matrix = Tensor({config.vocab_size, w});
  p.lstm = LstmParams::zeros(w, w);
  p.head1 = dense_zeros(w, w);
  p.head2 = dense_zeros(config.vocab_size, w);
  return p;
}

ModelParams ModelParams::initialized(const ModelConfig& config, Rng& rng) {
  config.validate();
  const std::size_t w = config.width;
  ModelParams p;
  p.encoder = EncoderParams::initialized(config.encoder, rng);
  p.img_proj = dense_init(w, config.encoder.feature_width(), rng);
  p.embedding = EmbeddingParams::initialized(config.vocab_size, w, rng);
  p.lstm = LstmParams::initialized(w, w, rng);
  p.head1 = dense_init(w, w, rng);
  p.head2 = dense_init(config.vocab_size, w, rng);
  return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for_each([&](const std::string& n, Tensor& t) { out.emplace_back(n, &t); });
  return out;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

void ModelParams::set_zero() {
  for_each([](const std::string&, Tensor& t) { t.set_zero(); });
}

void ModelParams::scale(double s) {
  for_each([s](const std::string&, Tensor& t) { t *= s; });
}

ModelParams& ModelParams::operator+=(const ModelParams& other) {
  auto mine = named_tensors();
  auto theirs = const_cast<ModelParams&>(other).named_tensors();
  if (mine.size() != theirs.size()) throw std::invalid_argument("parameter sets differ in layout");
  for (std::size_t i = 0; i < mine.size(); ++i) *mine[i].second += *theirs[i].second;
  return *this;
}

// ================================================================= forward

namespace {

void check_tokens(std::span<const int> seq, std::size_t vocab_size) {
  for (int t : seq) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
      throw std::out_of_range("token index " + std::to_string(t) + " outside vocabulary of size " +
                              std::to_string(vocab_size));
    }
  }
}

std::vector<Tensor> embedded_steps(std::span<const int> prefix, const ModelParams& params) {
  const Tensor e = embed(prefix, params.embedding);
  const std::size_t w = e.dim(1);
  std::vector<Tensor> xs;
  xs.reserve(prefix.size());
  for (std::size_t t = 0; t < prefix.size(); ++t) {
    xs.emplace_back(Shape{w}, std::vector<double>(e.data() + t * w, e.data() + (t + 1) * w));
  }
  return xs;
}

}  // namespace

Tensor image_branch(const Tensor& image, const ModelParams& params, const ModelConfig& config) {
  return dense(encode(image, params.encoder, config.encoder), params.img_proj.weights,
               params.img_proj.bias);
}

Tensor text_branch(std::span<const int> prefix, const ModelParams& params) {
  if (prefix.empty()) throw std::invalid_argument("prefix must hold at least START");
  return lstm_forward(embedded_steps(prefix, params), params.lstm).final_state.hidden;
}

Tensor head_logits(const Tensor& fused, const ModelParams& params) {
  const Tensor hidden = relu(dense(fused, params.head1.weights, params.head1.bias));
  return dense(hidden, params.head2.weights, params.head2.bias);
}

Tensor forward_next_token(const Tensor& image, std::span<const int> prefix,
                          const ModelParams& params, const ModelConfig& config, Mode mode,
                          Rng& rng) {
  if (prefix.empty()) throw std::invalid_argument("prefix must hold at least START");
  if (prefix.size() > config.max_len) {
    throw std::invalid_argument("prefix of " + std::to_string(prefix.size()) +
                                " tokens exceeds max_len " + std::to_string(config.max_len));
  }
  check_tokens(prefix, config.vocab_size);
  const Tensor fused = image_branch(image, params, config) + text_branch(prefix, params);
  return head_logits(dropout(fused, config.dropout_rate, mode, rng).output, params);
}

Tensor forward_next_token(const Tensor& image, std::span<const int> prefix,
                          const ModelParams& params, const ModelConfig& config) {
  Rng unused;
  return forward_next_token(image, prefix, params, config, Mode::eval, unused);
}

// ================================================================ training

namespace {

// Scores the pairs (seq[0..k), seq[k]) for k in [first, |seq|) and, when
// `grads` is given, adds the gradient of their summed loss.
SequenceScore score_range(const Tensor& image, std::span<const int> seq, std::size_t first,
                          const ModelParams& params, const ModelConfig& config, Mode mode,
                          Rng& rng, ModelParams* grads) {
  if (seq.size() < 2 || first < 1 || first >= seq.size()) {
    throw std::invalid_argument("scored sequence needs a non-empty prefix and a target");
  }
  const std::size_t steps = seq.size() - 1;
  if (steps > config.max_len) {
    throw std::invalid_argument("prefix of " + std::to_string(steps) + " tokens exceeds max_len " +
                                std::to_string(config.max_len));
  }
  check_tokens(seq, config.vocab_size);

  EncoderCache enc_cache;
  const Tensor features = encode(image, params.encoder, config.encoder, enc_cache);
  const Tensor img = dense(features, params.img_proj.weights, params.img_proj.bias);
  const std::span<const int> prefix = seq.first(steps);
  const LstmSequence unroll = lstm_forward(embedded_steps(prefix, params), params.lstm);

  SequenceScore score;
  Tensor d_img;
  std::vector<Tensor> d_hidden(steps);
  if (grads) d_img = Tensor::zeros_like(img);

  for (std::size_t k = first; k < seq.size(); ++k) {
    const DropoutResult drop = dropout(img + unroll.hidden[k - 1], config.dropout_rate, mode, rng);
    const Tensor pre = dense(drop.output, params.head1.weights, params.head1.bias);
    const Tensor act = relu(pre);
    const Tensor logits = dense(act, params.head2.weights, params.head2.bias);
    const auto target = static_cast<std::size_t>(seq[k]);
    const CrossEntropy ce = softmax_cross_entropy(logits, target);
    score.loss_sum += ce.loss;
    ++score.pairs;
    if (argmax(logits) == target) ++score.correct;
    if (!grads) continue;

    Tensor d_act = Tensor::zeros_like(act), d_drop = Tensor::zeros_like(drop.output);
    dense_backward_into(act, params.head2.weights, ce.grad, grads->head2.weights, grads->head2.bias,
                        &d_act);
    dense_backward_into(drop.output, params.head1.weights, relu_backward(pre, d_act),
                        grads->head1.weights, grads->head1.bias, &d_drop);
    Tensor d_fused = dropout_backward(drop, d_drop);
    d_img += d_fused;
    d_hidden[k - 1] = std::move(d_fused);
  }
  if (!grads) return score;

  std::vector<Tensor> d_xs;
  lstm_backward_into(d_hidden, unroll.caches, params.lstm, grads->lstm, &d_xs);
  const std::size_t w = config.width;
  Tensor d_embedded({steps, w});
  for (std::size_t t = 0; t < steps; ++t) {
    std::copy(d_xs[t].values().begin(), d_xs[t].values().end(), d_embedded.data() + t * w);
  }
  embed_backward_into(prefix, d_embedded, grads->embedding.matrix);
  Tensor d_features = Tensor::zeros_like(features);
  dense_backward_into(features, params.img_proj.weights, d_img, grads->img_proj.weights,
                      grads->img_proj.bias, &d_features);
  encoder_backward_into(d_features, enc_cache, params.encoder, config.encoder, grads->encoder,
                        nullptr);
  return score;
}

TokenSeq pair_sequence(const TrainingPair& pair) {
  if (pair.prefix.empty()) throw std::invalid_argument("training pair has an empty prefix");
  TokenSeq seq = pair.prefix;
  seq.push_back(pair.target);
  return seq;
}

}  // namespace

PairGrads loss_and_grads(const Tensor& image, const TrainingPair& pair, const ModelParams& params,
                         const ModelConfig& config, Mode mode, Rng& rng) {
  const TokenSeq seq = pair_sequence(pair);
  PairGrads out{0.0, ModelParams::zeros(config)};
  out.loss = score_range(image, seq, seq.size() - 1, params, config, mode, rng, &out.grads).loss_sum;
  return out;
}

PairGrads loss_and_grads(const Tensor& image, const TrainingPair& pair, const ModelParams& params,
                         const ModelConfig& config) {
  Rng unused;
  return loss_and_grads(image, pair, params, config, Mode::eval, unused);
}

SequenceScore score_sequence(const Tensor& image, std::span<const int> seq,
                             const ModelParams& params, const ModelConfig& config) {
  Rng unused;
  return score_range(image, seq, 1, params, config, Mode::eval, unused, nullptr);
}

SequenceScore accumulate_sequence_grads(const Tensor& image, std::span<const int> seq,
                                        const ModelParams& params, const ModelConfig& config,
                                        Mode mode, Rng& rng, ModelParams& grads) {
  return score_range(image, seq, 1, params, config, mode, rng, &grads);
}

// ================================================================ decoding

Generation generate(const Tensor& image, const ModelParams& params, const ModelConfig& config) {
  config.validate();
  const Tensor img = image_branch(image, params, config);
  Generation g;
  g.tokens.push_back(kStart);
  LstmState state = LstmState::zeros(config.width);
  while (true) {
    if (g.tokens.size() - 1 >= config.decode_limit) {
      g.truncated = true;
      break;
    }
    const Tensor x = embed(std::span<const int>(&g.tokens.back(), 1), params.embedding)
                         .reshaped({config.width});
    state = lstm_step(x, state, params.lstm).state;
    const auto next = static_cast<int>(argmax(head_logits(img + state.hidden, params)));
    g.tokens.push_back(next);
    if (next == kEnd) break;
  }
  return g;
}

}  // namespace antcode
