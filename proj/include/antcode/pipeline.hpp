#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "antcode/adam.hpp"
#include "antcode/codec.hpp"
#include "antcode/datagen.hpp"
#include "antcode/model.hpp"

namespace antcode {

// ================================================================= config

// Read from `key = value` lines; '#' starts a comment.
struct TrainConfig {
  std::size_t epochs = 50;
  double lr = 1e-3;
  std::size_t batch_size = 16;  // sequences per Adam step
  std::uint64_t seed = 1;
  double dropout_rate = 0.5;
  SplitFractions fractions;
  std::size_t max_len = kDefaultMaxLen;
  std::string encoder = "mini";  // mini | full
  std::size_t width = 256;
  std::size_t decode_limit = 300;
  std::string data;
  std::string out;
  bool early_best = true;
  std::size_t threads = 1;
  // Generation metrics on the val split every N epochs (0: never).
  std::size_t eval_every = 0;

  void validate() const;
  static TrainConfig parse(std::string_view text);
  static TrainConfig load(const std::string& path);

  ModelConfig model_config(std::size_t vocab_size) const;
};

// ============================================================= checkpoint

struct TrainState {
  std::size_t epoch = 0;  // completed epochs
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::string rng_state;
};

struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  ModelParams params;
  AdamState adam;
  TrainState state;

  // "CKPT v1", a record count, then length-prefixed records. All integers
  // and doubles are little-endian.
  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

// ================================================================ dataset

struct Sample {
  std::string id;
  std::string family;
  Split split = Split::train;
  Tensor image;
  std::string code;
  TokenSeq tokens;  // framed with START/END
};

struct Dataset {
  Manifest manifest;
  Vocabulary vocab;
  std::vector<Sample> samples;

  // Reads manifest.tsv, vocab.txt and every listed image and code file.
  static Dataset load(const std::string& dir, std::size_t max_len = kDefaultMaxLen);
  std::vector<const Sample*> split(Split s) const;
};

// ================================================================ metrics

struct EvalMetrics {
  std::size_t samples = 0;
  std::size_t pairs = 0;
  double loss = 0.0;            // mean next-token cross-entropy, dropout off
  double token_accuracy = 0.0;  // argmax hits over all pairs
  // Present when generation was run.
  std::optional<double> exact_match;  // decoded sequence equals ground truth
  std::optional<double> parse_rate;   // generated code parses
  std::optional<double> mean_iou;     // 0 for generations that fail to evaluate
  std::optional<double> geom_exact;   // exact solid match with the reference
};

EvalMetrics evaluate_samples(const ModelParams& params, const ModelConfig& config,
                             const std::vector<const Sample*>& samples, const Vocabulary& vocab,
                             bool with_generation);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  EvalMetrics val;
  double seconds = 0.0;

  std::string to_json() const;  // one line, no trailing newline
};

// ================================================================= train

struct TrainResult {
  Checkpoint last;
  std::vector<EpochMetrics> history;
};

// Writes <out>/last.ckpt after every epoch, <out>/best.ckpt on val-loss
// improvement (early_best), and appends to <out>/metrics.jsonl.
TrainResult train(const TrainConfig& config, const std::optional<std::string>& resume = {},
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

// ================================================================= infer

struct InferenceReport {
  std::string code;
  std::size_t token_count = 0;
  bool truncated = false;
  bool parsed = false;
  bool evaluated = false;
  std::string error;
  std::size_t solids = 0;
  std::optional<double> iou;
  std::optional<bool> exact;
  double seconds = 0.0;

  std::string to_json() const;
};

InferenceReport infer(const Checkpoint& ckpt, const Tensor& image,
                      const std::optional<std::string>& reference_code = {});

}  // namespace antcode
