#include "antcode/codec.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "antcode/layers.hpp"

namespace antcode {

namespace {

constexpr std::string_view kPunctuation = "(),=\"+-*/";
constexpr std::string_view kReserved[] = {"<PAD>", "<START>", "<END>", "<UNK>"};
constexpr std::string_view kVocabHeader = "VOCAB v1";

bool is_punct(char c) { return kPunctuation.find(c) != std::string_view::npos; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Length of the numeric literal starting at text[i], or 0.
std::size_t number_length(std::string_view text, std::size_t i) {
  std::size_t j = i;
  while (j < text.size() && is_digit(text[j])) ++j;
  const bool leading_digits = j > i;
  if (j < text.size() && text[j] == '.' && j + 1 < text.size() && is_digit(text[j + 1])) {
    j += 1;
    while (j < text.size() && is_digit(text[j])) ++j;
  } else if (!leading_digits) {
    return 0;
  }
  if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
    std::size_t k = j + 1;
    if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
    if (k < text.size() && is_digit(text[k])) {
      while (k < text.size() && is_digit(text[k])) ++k;
      j = k;
    }
  }
  return j - i;
}

bool is_operator(std::string_view t) { return t == "+" || t == "-" || t == "*" || t == "/"; }

}  // namespace

std::vector<Lexeme> lex(std::string_view text) {
  std::vector<Lexeme> out;
  std::size_t line = 1, line_start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    const std::size_t column = i - line_start + 1;
    if (c == '\n') {
      out.push_back({std::string(kNewlineToken), line, column});
      ++i;
      ++line;
      line_start = i;
    } else if (is_space(c)) {
      ++i;
    } else if (is_punct(c)) {
      out.push_back({std::string(1, c), line, column});
      ++i;
    } else if (std::size_t n = number_length(text, i); n > 0) {
      out.push_back({std::string(text.substr(i, n)), line, column});
      i += n;
    } else {
      std::size_t j = i;
      while (j < text.size() && text[j] != '\n' && !is_space(text[j]) && !is_punct(text[j])) ++j;
      out.push_back({std::string(text.substr(i, j - i)), line, column});
      i = j;
    }
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (Lexeme& l : lex(text)) out.push_back(std::move(l.text));
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool line_start = true;
  bool prev_unary = false;
  bool in_quote = false;
  bool prev_open_quote = false;
  std::string_view prev;
  for (const std::string& tok : tokens) {
    if (tok == kNewlineToken) {
      out += '\n';
      line_start = true;
      prev_unary = prev_open_quote = in_quote = false;
      prev = {};
      continue;
    }
    const bool closing_quote = tok == "\"" && in_quote;
    bool space = !line_start;
    if (tok == ")" || tok == "," || closing_quote) space = false;
    if (prev == "(" || prev_unary || prev_open_quote) space = false;
    if (space) out += ' ';
    out += tok;

    prev_unary = tok == "-" &&
                 (line_start || prev == "(" || prev == "," || prev == "=" || is_operator(prev));
    prev_open_quote = tok == "\"" && !in_quote;
    if (tok == "\"") in_quote = !in_quote;
    line_start = false;
    prev = tok;
  }
  return out;
}

bool is_number_token(std::string_view token) {
  return !token.empty() && number_length(token, 0) == token.size();
}

bool is_word_token(std::string_view token) {
  if (token.empty() || token == kNewlineToken || is_number_token(token)) return false;
  return std::none_of(token.begin(), token.end(),
                      [](char c) { return is_punct(c) || is_space(c) || c == '\n'; });
}

// ---------------------------------------------------------------- vocabulary

void Vocabulary::add(const std::string& token) {
  if (index_.contains(token)) return;
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> corpus) {
  if (corpus.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  Vocabulary v;
  for (std::string_view r : kReserved) v.add(std::string(r));
  for (const auto& doc : corpus) {
    for (const std::string& tok : doc) v.add(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_text(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  if (!std::getline(is, line) || line != kVocabHeader) {
    throw std::invalid_argument("vocabulary file must start with \"VOCAB v1\"");
  }
  Vocabulary v;
  while (std::getline(is, line)) {
    if (v.index_.contains(line)) throw std::invalid_argument("duplicate vocabulary entry: " + line);
    v.add(line);
  }
  if (v.size() < std::size(kReserved)) throw std::invalid_argument("vocabulary is missing reserved tokens");
  for (std::size_t i = 0; i < std::size(kReserved); ++i) {
    if (v.tokens_[i] != kReserved[i]) {
      throw std::invalid_argument("vocabulary reserved token " + std::to_string(i) + " is " +
                                  v.tokens_[i]);
    }
  }
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

std::string Vocabulary::to_text() const {
  std::string out(kVocabHeader);
  out += '\n';
  for (const std::string& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path);
  out << to_text();
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

int Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
    throw std::out_of_range("token index " + std::to_string(index) + " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(index)];
}

// ----------------------------------------------------------------- sequences

TokenSeq encode(std::span<const std::string> tokens, const Vocabulary& vocab, std::size_t max_len) {
  if (tokens.size() + 2 > max_len) {
    throw std::invalid_argument("encoded sequence of " + std::to_string(tokens.size() + 2) +
                                " tokens exceeds max_len " + std::to_string(max_len));
  }
  TokenSeq seq;
  seq.reserve(tokens.size() + 2);
  seq.push_back(kStart);
  for (const std::string& t : tokens) seq.push_back(vocab.index_of(t));
  seq.push_back(kEnd);
  return seq;
}

std::vector<std::string> decode(std::span<const int> seq, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int idx : seq) {
    const std::string& tok = vocab.token(idx);
    if (idx == kStart || idx == kEnd || idx == kPad) continue;
    out.push_back(tok);
  }
  return out;
}

PaddedBatch pad_batch(std::span<const TokenSeq> seqs) {
  std::size_t longest = 0;
  for (const TokenSeq& s : seqs) longest = std::max(longest, s.size());
  PaddedBatch b;
  for (const TokenSeq& s : seqs) {
    TokenSeq padded = s;
    padded.resize(longest, kPad);
    std::vector<unsigned char> mask(longest, 0);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(s.size()), 1);
    b.sequences.push_back(std::move(padded));
    b.mask.push_back(std::move(mask));
  }
  return b;
}

std::vector<TrainingPair> make_pairs(std::span<const int> seq, const std::string& image_id) {
  if (seq.size() < 2) {
    throw std::invalid_argument("make_pairs needs at least two tokens, got " +
                                std::to_string(seq.size()));
  }
  std::vector<TrainingPair> pairs;
  pairs.reserve(seq.size() - 1);
  for (std::size_t k = 1; k < seq.size(); ++k) {
    pairs.push_back({image_id, TokenSeq(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(k)),
                     seq[k]});
  }
  return pairs;
}

// ----------------------------------------------------------------- embedding

EmbeddingParams EmbeddingParams::initialized(std::size_t vocab_size, std::size_t width, Rng& rng) {
  EmbeddingParams p{Tensor({vocab_size, width})};
  fill_uniform(p.matrix, 0.05, rng);
  return p;
}

static void check_indices(std::span<const int> seq, std::size_t rows) {
  for (int idx : seq) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= rows) {
      throw std::out_of_range("embedding index " + std::to_string(idx) + " outside [0, " +
                              std::to_string(rows) + ")");
    }
  }
}

Tensor embed(std::span<const int> seq, const EmbeddingParams& params) {
  const Tensor& m = params.matrix;
  if (m.rank() != 2) throw std::invalid_argument("embedding matrix must be [V, width]");
  if (seq.empty()) throw std::invalid_argument("cannot embed an empty sequence");
  check_indices(seq, m.dim(0));
  const std::size_t w = m.dim(1);
  Tensor out({seq.size(), w});
  for (std::size_t t = 0; t < seq.size(); ++t) {
    std::copy_n(m.data() + static_cast<std::size_t>(seq[t]) * w, w, out.data() + t * w);
  }
  return out;
}

void embed_backward_into(std::span<const int> seq, const Tensor& upstream, Tensor& d_matrix) {
  if (d_matrix.rank() != 2) throw std::invalid_argument("embedding gradient must be [V, width]");
  check_indices(seq, d_matrix.dim(0));
  const std::size_t w = d_matrix.dim(1);
  require_shape(upstream, {seq.size(), w}, "embedding upstream");
  for (std::size_t t = 0; t < seq.size(); ++t) {
    axpy(1.0, upstream.data() + t * w, d_matrix.data() + static_cast<std::size_t>(seq[t]) * w, w);
  }
}

Tensor embed_backward(std::span<const int> seq, const Tensor& upstream, const EmbeddingParams& params) {
  Tensor d = Tensor::zeros_like(params.matrix);
  embed_backward_into(seq, upstream, d);
  return d;
}

}  // namespace antcode
