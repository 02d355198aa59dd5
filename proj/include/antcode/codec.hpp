#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "antcode/rng.hpp"
#include "antcode/tensor.hpp"

namespace antcode {

inline constexpr int kPad = 0;
inline constexpr int kStart = 1;
inline constexpr int kEnd = 2;
inline constexpr int kUnk = 3;

inline constexpr std::string_view kNewlineToken = "<NL>";
inline constexpr std::size_t kDefaultMaxLen = 1000;
inline constexpr std::size_t kEmbeddingWidth = 256;

// ---- tokenizer
//
// Whitespace separates tokens. A line break is the token <NL>. The
// characters ( ) , = " + - * / are tokens on their own. A numeric
// literal (digits with optional fraction and exponent) is one token.
// Anything else up to the next separator is a word.

struct Lexeme {
  std::string text;
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based, in bytes
};

std::vector<Lexeme> lex(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);
// Joins tokens with canonical spacing; tokenize(detokenize(t)) == t.
std::string detokenize(std::span<const std::string> tokens);

bool is_number_token(std::string_view token);
bool is_word_token(std::string_view token);

// ---- vocabulary

class Vocabulary {
 public:
  // Reserved tokens first, then corpus tokens in first-occurrence order.
  static Vocabulary build(std::span<const std::vector<std::string>> corpus);
  static Vocabulary from_text(std::string_view text);
  static Vocabulary load(const std::string& path);

  std::string to_text() const;
  void save(const std::string& path) const;

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  // UNK for tokens outside the vocabulary.
  int index_of(std::string_view token) const;
  const std::string& token(int index) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

using TokenSeq = std::vector<int>;

// Frames with START/END; rejects results longer than max_len.
TokenSeq encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                std::size_t max_len = kDefaultMaxLen);
// Drops START/END/PAD framing.
std::vector<std::string> decode(std::span<const int> seq, const Vocabulary& vocab);

// Right-pads each sequence with PAD to the longest length; `mask` marks
// real positions with 1.
struct PaddedBatch {
  std::vector<TokenSeq> sequences;
  std::vector<std::vector<unsigned char>> mask;
};
PaddedBatch pad_batch(std::span<const TokenSeq> seqs);

// ---- next-token supervision

struct TrainingPair {
  std::string image_id;
  TokenSeq prefix;
  int target = kPad;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

// (seq[0..k), seq[k]) for k = 1 .. |seq|-1.
std::vector<TrainingPair> make_pairs(std::span<const int> seq, const std::string& image_id = {});

// ---- embedding

struct EmbeddingParams {
  Tensor matrix;  // [V, width]

  static EmbeddingParams initialized(std::size_t vocab_size, std::size_t width, Rng& rng);
};

// Row t of the result is matrix[seq[t]].
Tensor embed(std::span<const int> seq, const EmbeddingParams& params);
// Scatter-adds upstream rows into the rows of `d_matrix` selected by seq.
void embed_backward_into(std::span<const int> seq, const Tensor& upstream, Tensor& d_matrix);
Tensor embed_backward(std::span<const int> seq, const Tensor& upstream, const EmbeddingParams& params);

}  // namespace antcode
