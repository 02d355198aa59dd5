#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "antcode/codec.hpp"
#include "antcode/encoder.hpp"
#include "antcode/layers.hpp"
#include "antcode/lstm.hpp"
#include "antcode/rng.hpp"
#include "antcode/tensor.hpp"

namespace antcode {

struct ModelConfig {
  EncoderConfig encoder = EncoderConfig::mini();
  // Image projection, embedding, LSTM and first head layer width.
  std::size_t width = 256;
  std::size_t vocab_size = 0;
  std::size_t max_len = kDefaultMaxLen;
  double dropout_rate = 0.5;
  std::size_t decode_limit = 300;

  void validate() const;

  // key=value lines; doubles use the shortest round-tripping form.
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct DenseParams {
  Tensor weights;  // [out, in]
  Tensor bias;     // [out]
};

struct ModelParams {
  EncoderParams encoder;
  DenseParams img_proj;
  EmbeddingParams embedding;
  LstmParams lstm;
  DenseParams head1;
  DenseParams head2;

  static ModelParams zeros(const ModelConfig& config);
  static ModelParams initialized(const ModelConfig& config, Rng& rng);

  // Visits every parameter tensor with a stable dotted name, always in the
  // same order.
  template <class F>
  void for_each(F&& f) {
    encoder.for_each([&](const std::string& n, Tensor& t) { f("encoder." + n, t); });
    f(std::string("img_proj.weights"), img_proj.weights);
    f(std::string("img_proj.bias"), img_proj.bias);
    f(std::string("embedding.matrix"), embedding.matrix);
    lstm.for_each([&](const char* n, Tensor& t) { f("lstm." + std::string(n), t); });
    f(std::string("head1.weights"), head1.weights);
    f(std::string("head1.bias"), head1.bias);
    f(std::string("head2.weights"), head2.weights);
    f(std::string("head2.bias"), head2.bias);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each(
        [&](const std::string& n, Tensor& t) { f(n, static_cast<const Tensor&>(t)); });
  }

  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::size_t scalar_count() const;
  void set_zero();
  void scale(double s);
  ModelParams& operator+=(const ModelParams& other);
};

// ---- branches

// img_proj(encode(image)).
Tensor image_branch(const Tensor& image, const ModelParams& params, const ModelConfig& config);
// Final LSTM hidden state over the embedded prefix.
Tensor text_branch(std::span<const int> prefix, const ModelParams& params);
// head2(ReLU(head1(fused))).
Tensor head_logits(const Tensor& fused, const ModelParams& params);

// Logits over the vocabulary for the token following `prefix`. Dropout
// on the fused vector is drawn from `rng` in train mode only.
Tensor forward_next_token(const Tensor& image, std::span<const int> prefix,
                          const ModelParams& params, const ModelConfig& config, Mode mode,
                          Rng& rng);
Tensor forward_next_token(const Tensor& image, std::span<const int> prefix,
                          const ModelParams& params, const ModelConfig& config);

struct PairGrads {
  double loss = 0.0;
  ModelParams grads;
};

PairGrads loss_and_grads(const Tensor& image, const TrainingPair& pair, const ModelParams& params,
                         const ModelConfig& config);
PairGrads loss_and_grads(const Tensor& image, const TrainingPair& pair, const ModelParams& params,
                         const ModelConfig& config, Mode mode, Rng& rng);

// Every next-token pair of one sequence scored from a single LSTM unroll.
// The final hidden state after k tokens does not depend on later tokens,
// so this equals scoring each pair separately.
struct SequenceScore {
  double loss_sum = 0.0;
  std::size_t pairs = 0;
  std::size_t correct = 0;  // argmax hits
};

SequenceScore score_sequence(const Tensor& image, std::span<const int> seq,
                             const ModelParams& params, const ModelConfig& config);
// Adds the gradient of loss_sum to `grads`.
SequenceScore accumulate_sequence_grads(const Tensor& image, std::span<const int> seq,
                                        const ModelParams& params, const ModelConfig& config,
                                        Mode mode, Rng& rng, ModelParams& grads);

// ---- greedy decoding

struct Generation {
  TokenSeq tokens;  // starts with START; ends with END unless truncated
  bool truncated = false;
};

// At most decode_limit tokens are appended after START.
Generation generate(const Tensor& image, const ModelParams& params, const ModelConfig& config);

}  // namespace antcode
