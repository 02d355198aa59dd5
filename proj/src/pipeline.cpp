#include "antcode/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "antcode/geometry.hpp"
#include "json.hpp"

namespace antcode {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(std::string("cannot read ") + what + " " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_value(const std::string& text, const std::string& key) {
  T v{};
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("bad value for " + key + ": '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("bad value for " + key + ": '" + text + "' (expected true or false)");
}

}  // namespace

// ================================================================= config

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (!(lr > 0)) throw std::invalid_argument("lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (!(dropout_rate >= 0 && dropout_rate < 1)) throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
  if (encoder != "mini" && encoder != "full") throw std::invalid_argument("encoder must be mini or full");
  if (width < 1) throw std::invalid_argument("width must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (decode_limit < 1 || decode_limit > max_len) {
    throw std::invalid_argument("decode_limit must lie in [1, max_len]");
  }
}

TrainConfig TrainConfig::parse(std::string_view text) {
  TrainConfig c;
  std::istringstream is{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "epochs") c.epochs = parse_value<std::size_t>(value, key);
      else if (key == "lr") c.lr = parse_value<double>(value, key);
      else if (key == "batch_size") c.batch_size = parse_value<std::size_t>(value, key);
      else if (key == "seed") c.seed = parse_value<std::uint64_t>(value, key);
      else if (key == "dropout_rate") c.dropout_rate = parse_value<double>(value, key);
      else if (key == "train_fraction") c.fractions.train = parse_value<double>(value, key);
      else if (key == "val_fraction") c.fractions.val = parse_value<double>(value, key);
      else if (key == "test_fraction") c.fractions.test = parse_value<double>(value, key);
      else if (key == "max_len") c.max_len = parse_value<std::size_t>(value, key);
      else if (key == "encoder") c.encoder = value;
      else if (key == "width") c.width = parse_value<std::size_t>(value, key);
      else if (key == "decode_limit") c.decode_limit = parse_value<std::size_t>(value, key);
      else if (key == "data") c.data = value;
      else if (key == "out") c.out = value;
      else if (key == "early_best") c.early_best = parse_bool(value, key);
      else if (key == "threads") c.threads = parse_value<std::size_t>(value, key);
      else if (key == "eval_every") c.eval_every = parse_value<std::size_t>(value, key);
      else throw std::invalid_argument("unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) { return parse(read_file(path, "config")); }

ModelConfig TrainConfig::model_config(std::size_t vocab_size) const {
  ModelConfig m;
  m.encoder = encoder == "full" ? EncoderConfig::full() : EncoderConfig::mini();
  m.width = width;
  m.vocab_size = vocab_size;
  m.max_len = max_len;
  m.dropout_rate = dropout_rate;
  m.decode_limit = decode_limit;
  m.validate();
  return m;
}

// ============================================================= checkpoint

namespace {

constexpr std::string_view kCkptMagic = "CKPT v1\n";
enum RecordType : std::uint8_t { kTensorRecord = 0, kTextRecord = 1 };

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void bytes(std::string_view s) { out_.append(s); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void text_record(std::string_view name, std::string_view text) {
    header(name, kTextRecord);
    u64(text.size());
    bytes(text);
  }
  void tensor_record(std::string_view name, const Tensor& t) {
    header(name, kTensorRecord);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) u64(d);
    for (double v : t.values()) f64(v);
  }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void header(std::string_view name, RecordType type) {
    u32(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    u8(type);
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw std::runtime_error("checkpoint is truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

struct Record {
  RecordType type;
  std::string text;
  Tensor tensor;
};

std::map<std::string, std::string> key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& require_key(const std::map<std::string, std::string>& kv, const std::string& key,
                               const char* record) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error(std::string("checkpoint ") + record + " lacks " + key);
  return it->second;
}

}  // namespace

std::string Checkpoint::serialize() const {
  auto& params_ref = const_cast<ModelParams&>(params);
  const auto named = params_ref.named_tensors();
  const bool has_moments = !adam.m.empty();
  if (has_moments && (adam.m.size() != named.size() || adam.v.size() != named.size())) {
    throw std::logic_error("optimizer moments do not match the parameter layout");
  }

  Writer w;
  w.bytes(kCkptMagic);
  w.u64(4 + named.size() * (has_moments ? 3 : 1));
  w.text_record("meta.model_config", config.to_text());
  w.text_record("meta.vocab", vocab.to_text());
  w.text_record("meta.train_state", "epoch=" + std::to_string(state.epoch) +
                                        "\nbest_val_loss=" + shortest(state.best_val_loss) +
                                        "\nrng=" + state.rng_state + "\n");
  w.text_record("meta.adam", "lr=" + shortest(adam.hyper.lr) + "\nbeta1=" + shortest(adam.hyper.beta1) +
                                 "\nbeta2=" + shortest(adam.hyper.beta2) +
                                 "\nepsilon=" + shortest(adam.hyper.epsilon) +
                                 "\nt=" + std::to_string(adam.t) + "\n");
  for (const auto& [name, t] : named) w.tensor_record("param." + name, *t);
  if (has_moments) {
    for (std::size_t i = 0; i < named.size(); ++i) w.tensor_record("adam.m." + named[i].first, adam.m[i]);
    for (std::size_t i = 0; i < named.size(); ++i) w.tensor_record("adam.v." + named[i].first, adam.v[i]);
  }
  return w.take();
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  if (bytes.substr(0, kCkptMagic.size()) != kCkptMagic) {
    throw std::runtime_error("not a checkpoint (missing \"CKPT v1\" header)");
  }
  Reader r(bytes.substr(kCkptMagic.size()));
  const std::uint64_t count = r.le(8);
  std::map<std::string, Record> records;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = static_cast<std::size_t>(r.le(4));
    std::string name(r.bytes(name_len));
    Record rec{static_cast<RecordType>(r.le(1)), {}, {}};
    if (rec.type == kTextRecord) {
      rec.text = std::string(r.bytes(static_cast<std::size_t>(r.le(8))));
    } else if (rec.type == kTensorRecord) {
      const auto rank = static_cast<std::size_t>(r.le(4));
      Shape shape(rank);
      for (auto& d : shape) d = static_cast<std::size_t>(r.le(8));
      std::vector<double> values(shape_product(shape));
      for (double& v : values) v = std::bit_cast<double>(r.le(8));
      rec.tensor = Tensor(std::move(shape), std::move(values));
    } else {
      throw std::runtime_error("checkpoint record " + name + " has unknown type");
    }
    if (!records.emplace(name, std::move(rec)).second) {
      throw std::runtime_error("checkpoint has duplicate record " + name);
    }
  }
  if (!r.done()) throw std::runtime_error("checkpoint has trailing bytes");

  auto text = [&](const std::string& name) -> const std::string& {
    auto it = records.find(name);
    if (it == records.end() || it->second.type != kTextRecord) {
      throw std::runtime_error("checkpoint lacks " + name);
    }
    return it->second.text;
  };
  auto tensor = [&](const std::string& name, const Tensor& like) -> Tensor {
    auto it = records.find(name);
    if (it == records.end() || it->second.type != kTensorRecord) {
      throw std::runtime_error("checkpoint lacks " + name);
    }
    if (it->second.tensor.shape() != like.shape()) {
      throw std::runtime_error("checkpoint tensor " + name + " has shape " +
                               shape_string(it->second.tensor.shape()) + ", expected " +
                               shape_string(like.shape()));
    }
    return std::move(it->second.tensor);
  };

  Checkpoint c;
  c.config = ModelConfig::from_text(text("meta.model_config"));
  c.vocab = Vocabulary::from_text(text("meta.vocab"));
  if (c.vocab.size() != c.config.vocab_size) {
    throw std::runtime_error("checkpoint vocabulary size disagrees with its model config");
  }
  const auto st = key_values(text("meta.train_state"));
  c.state.epoch = parse_value<std::size_t>(require_key(st, "epoch", "train state"), "epoch");
  c.state.best_val_loss =
      parse_value<double>(require_key(st, "best_val_loss", "train state"), "best_val_loss");
  c.state.rng_state = require_key(st, "rng", "train state");
  const auto ad = key_values(text("meta.adam"));
  c.adam.hyper.lr = parse_value<double>(require_key(ad, "lr", "adam"), "lr");
  c.adam.hyper.beta1 = parse_value<double>(require_key(ad, "beta1", "adam"), "beta1");
  c.adam.hyper.beta2 = parse_value<double>(require_key(ad, "beta2", "adam"), "beta2");
  c.adam.hyper.epsilon = parse_value<double>(require_key(ad, "epsilon", "adam"), "epsilon");
  c.adam.t = parse_value<std::uint64_t>(require_key(ad, "t", "adam"), "t");

  c.params = ModelParams::zeros(c.config);
  const auto named = c.params.named_tensors();
  for (const auto& [name, t] : named) *t = tensor("param." + name, *t);
  if (records.contains("adam.m." + named.front().first)) {
    for (const auto& [name, t] : named) {
      c.adam.m.push_back(tensor("adam.m." + name, *t));
      c.adam.v.push_back(tensor("adam.v." + name, *t));
    }
  }
  return c;
}

void Checkpoint::save(const std::string& path) const {
  // Write-then-rename keeps the previous checkpoint intact on failure.
  const std::string tmp = path + ".tmp";
  write_file(tmp, serialize());
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot move checkpoint into place at " + path + ": " + ec.message());
}

Checkpoint Checkpoint::load(const std::string& path) {
  return deserialize(read_file(path, "checkpoint"));
}

// ================================================================ dataset

Dataset Dataset::load(const std::string& dir, std::size_t max_len) {
  const fs::path root(dir);
  if (!fs::exists(root / "manifest.tsv")) {
    throw std::runtime_error("no dataset at " + dir + " (manifest.tsv missing)");
  }
  Dataset ds;
  ds.manifest = Manifest::load((root / "manifest.tsv").string());
  ds.vocab = Vocabulary::load((root / "vocab.txt").string());
  for (const ManifestEntry& e : ds.manifest.entries) {
    Sample s;
    s.id = e.id;
    s.family = e.family;
    s.split = e.split;
    s.image = read_pgm((root / e.image_path).string());
    s.code = read_file((root / e.code_path).string(), "code");
    s.tokens = encode(tokenize(s.code), ds.vocab, max_len);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::vector<const Sample*> Dataset::split(Split s) const {
  std::vector<const Sample*> out;
  for (const Sample& x : samples) {
    if (x.split == s) out.push_back(&x);
  }
  return out;
}

// ================================================================ metrics

namespace {

struct Assessment {
  bool parsed = false;
  bool evaluated = false;
  std::string error;
  std::size_t solids = 0;
  std::optional<double> iou;
  std::optional<bool> exact;
};

Assessment assess(const std::string& code, const std::optional<Scene>& reference) {
  Assessment a;
  std::optional<Scene> scene;
  try {
    const Ast ast = parse(code);
    a.parsed = true;
    scene = evaluate(ast);
    a.evaluated = true;
    a.solids = scene->solids.size();
  } catch (const ParseError& e) {
    a.error = e.what();
  } catch (const EvalError& e) {
    a.error = e.what();
  }
  if (reference) {
    if (scene && !(scene->solids.empty() && reference->solids.empty())) {
      const Comparison cmp = compare(*scene, *reference);
      a.iou = cmp.iou;
      a.exact = cmp.exact;
    } else {
      a.iou = 0.0;
      a.exact = false;
    }
  }
  return a;
}

std::string generated_code(const Generation& g, const Vocabulary& vocab) {
  return detokenize(decode(g.tokens, vocab));
}

}  // namespace

EvalMetrics evaluate_samples(const ModelParams& params, const ModelConfig& config,
                             const std::vector<const Sample*>& samples, const Vocabulary& vocab,
                             bool with_generation) {
  EvalMetrics m;
  m.samples = samples.size();
  if (samples.empty()) return m;
  double loss = 0.0;
  std::size_t correct = 0;
  double exact = 0, parsed = 0, iou = 0, geom = 0;
  for (const Sample* s : samples) {
    const SequenceScore sc = score_sequence(s->image, s->tokens, params, config);
    loss += sc.loss_sum;
    m.pairs += sc.pairs;
    correct += sc.correct;
    if (!with_generation) continue;
    const Generation g = generate(s->image, params, config);
    if (g.tokens == s->tokens) exact += 1;
    const Assessment a = assess(generated_code(g, vocab), evaluate(parse(s->code)));
    if (a.parsed) parsed += 1;
    iou += *a.iou;
    if (*a.exact) geom += 1;
  }
  m.loss = loss / static_cast<double>(m.pairs);
  m.token_accuracy = static_cast<double>(correct) / static_cast<double>(m.pairs);
  if (with_generation) {
    const auto n = static_cast<double>(samples.size());
    m.exact_match = exact / n;
    m.parse_rate = parsed / n;
    m.mean_iou = iou / n;
    m.geom_exact = geom / n;
  }
  return m;
}

std::string EpochMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss;
  if (val.samples > 0) {
    j["val_loss"] = val.loss;
    j["val_token_accuracy"] = val.token_accuracy;
  } else {
    j["val_loss"] = nullptr;
    j["val_token_accuracy"] = nullptr;
  }
  if (val.exact_match) {
    j["val_exact_match"] = *val.exact_match;
    j["val_parse_rate"] = *val.parse_rate;
    j["val_mean_iou"] = *val.mean_iou;
    j["val_geom_exact"] = *val.geom_exact;
  }
  j["seconds"] = seconds;
  return j.dump();
}

// ================================================================= train

namespace {

struct BatchResult {
  double loss_sum = 0.0;
  std::size_t pairs = 0;
};

// Gradients of the batch's summed loss, added into `grads`. Sample j of the
// batch draws its dropout masks from mix_seed(step_seed, j), so the result
// is the same for any thread count up to floating-point reduction order.
BatchResult batch_gradients(const std::vector<const Sample*>& batch, const ModelParams& params,
                            const ModelConfig& config, std::uint64_t step_seed,
                            std::size_t threads, ModelParams& grads) {
  BatchResult total;
  if (threads <= 1 || batch.size() <= 1) {
    for (std::size_t j = 0; j < batch.size(); ++j) {
      Rng rng(mix_seed(step_seed, j));
      const SequenceScore sc = accumulate_sequence_grads(batch[j]->image, batch[j]->tokens, params,
                                                         config, Mode::train, rng, grads);
      total.loss_sum += sc.loss_sum;
      total.pairs += sc.pairs;
    }
    return total;
  }
  const std::size_t workers = std::min(threads, batch.size());
  std::vector<ModelParams> partial(workers, ModelParams::zeros(config));
  std::vector<BatchResult> results(workers);
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t j = w; j < batch.size(); j += workers) {
            Rng rng(mix_seed(step_seed, j));
            const SequenceScore sc = accumulate_sequence_grads(
                batch[j]->image, batch[j]->tokens, params, config, Mode::train, rng, partial[w]);
            results[w].loss_sum += sc.loss_sum;
            results[w].pairs += sc.pairs;
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (std::size_t w = 0; w < workers; ++w) {
    if (errors[w]) std::rethrow_exception(errors[w]);
    grads += partial[w];
    total.loss_sum += results[w].loss_sum;
    total.pairs += results[w].pairs;
  }
  return total;
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::optional<std::string>& resume,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  config.validate();
  if (config.data.empty()) throw std::invalid_argument("train: no dataset directory given");
  if (config.out.empty()) throw std::invalid_argument("train: no output directory given");
  const Dataset ds = Dataset::load(config.data, config.max_len);
  const std::vector<const Sample*> train_set = ds.split(Split::train);
  const std::vector<const Sample*> val_set = ds.split(Split::val);
  if (train_set.empty()) throw std::runtime_error("train: the dataset has no train split");

  Checkpoint ck;
  Rng rng;
  if (resume) {
    ck = Checkpoint::load(*resume);
    if (!(ck.vocab == ds.vocab)) {
      throw std::runtime_error("train: checkpoint vocabulary does not match the dataset vocabulary");
    }
    if (!(ck.config == config.model_config(ds.vocab.size()))) {
      throw std::runtime_error("train: checkpoint model config differs from the training config");
    }
    rng.restore(ck.state.rng_state);
  } else {
    ck.config = config.model_config(ds.vocab.size());
    ck.vocab = ds.vocab;
    Rng init(mix_seed(config.seed, 1));
    ck.params = ModelParams::initialized(ck.config, init);
    ck.adam = AdamState(AdamHyper{config.lr});
    rng = Rng(mix_seed(config.seed, 2));
  }
  const std::size_t size = ck.config.encoder.input_size;
  for (const Sample* s : train_set) {
    if (s->image.dim(1) != size || s->image.dim(2) != size) {
      throw std::runtime_error("train: image " + s->id + " does not match the encoder input size " +
                               std::to_string(size));
    }
  }

  const fs::path out(config.out);
  fs::create_directories(out);
  const std::string metrics_path = (out / "metrics.jsonl").string();
  std::ofstream metrics(metrics_path, resume ? std::ios::app : std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write " + metrics_path);

  TrainResult result;
  ModelParams grads = ModelParams::zeros(ck.config);
  auto param_ptrs = ck.params.named_tensors();
  auto grad_ptrs = grads.named_tensors();
  std::vector<Tensor*> p_list;
  for (auto& [n, t] : param_ptrs) p_list.push_back(t);
  std::vector<const Tensor*> g_list;
  for (auto& [n, t] : grad_ptrs) g_list.push_back(t);

  for (std::size_t epoch = ck.state.epoch + 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<const Sample*> order = train_set;
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    std::size_t step = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size, ++step) {
      const std::vector<const Sample*> batch(
          order.begin() + static_cast<std::ptrdiff_t>(b),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + config.batch_size)));
      grads.set_zero();
      const BatchResult br =
          batch_gradients(batch, ck.params, ck.config, rng.next(), config.threads, grads);
      if (!std::isfinite(br.loss_sum)) {
        throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(step));
      }
      grads.scale(1.0 / static_cast<double>(br.pairs));
      adam_step(p_list, g_list, ck.adam);
      loss_sum += br.loss_sum;
      pairs += br.pairs;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / static_cast<double>(pairs);
    const bool with_generation =
        config.eval_every > 0 && (epoch % config.eval_every == 0 || epoch == config.epochs);
    em.val = evaluate_samples(ck.params, ck.config, val_set, ds.vocab, with_generation);
    const double selection = val_set.empty() ? em.train_loss : em.val.loss;
    const bool improved = selection < ck.state.best_val_loss;
    if (improved) ck.state.best_val_loss = selection;
    ck.state.epoch = epoch;
    ck.state.rng_state = rng.state();
    ck.save((out / "last.ckpt").string());
    if (config.early_best && improved) ck.save((out / "best.ckpt").string());
    em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    metrics << em.to_json() << '\n' << std::flush;
    if (on_epoch) on_epoch(em);
    result.history.push_back(std::move(em));
  }
  result.last = std::move(ck);
  return result;
}

// ================================================================= infer

InferenceReport infer(const Checkpoint& ckpt, const Tensor& image,
                      const std::optional<std::string>& reference_code) {
  const auto t0 = std::chrono::steady_clock::now();
  InferenceReport r;
  std::optional<Scene> reference;
  if (reference_code) reference = evaluate(parse(*reference_code));
  const Generation g = generate(image, ckpt.params, ckpt.config);
  r.code = generated_code(g, ckpt.vocab);
  r.token_count = g.tokens.size();
  r.truncated = g.truncated;
  const Assessment a = assess(r.code, reference);
  r.parsed = a.parsed;
  r.evaluated = a.evaluated;
  r.error = a.error;
  r.solids = a.solids;
  r.iou = a.iou;
  r.exact = a.exact;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string InferenceReport::to_json() const {
  nlohmann::ordered_json j;
  j["tokens"] = token_count;
  j["truncated"] = truncated;
  j["parsed"] = parsed;
  j["evaluated"] = evaluated;
  if (!error.empty()) j["error"] = error;
  j["solids"] = solids;
  if (iou) j["iou"] = *iou;
  if (exact) j["exact"] = *exact;
  j["seconds"] = seconds;
  return j.dump();
}

}  // namespace antcode
