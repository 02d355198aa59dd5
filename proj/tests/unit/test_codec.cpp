#include "antcode/codec.hpp"
#include "doctest.h"

using namespace antcode;

using Tokens = std::vector<std::string>;

TEST_CASE("tokenizer rules") {
  CHECK(tokenize("use template Antenna") == Tokens{"use", "template", "Antenna"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("brick(0.5,w)") == Tokens{"brick", "(", "0.5", ",", "w", ")"});
  CHECK(tokenize("a\nb") == Tokens{"a", "<NL>", "b"});
  CHECK(tokenize("x=-2.5e-3*(h+1)") ==
        Tokens{"x", "=", "-", "2.5e-3", "*", "(", "h", "+", "1", ")"});
  CHECK(tokenize("name \"FR4\"") == Tokens{"name", "\"", "FR4", "\""});
  CHECK(tokenize("   \t  ").empty());
  CHECK(is_number_token("0.0350"));
  CHECK(is_number_token("12"));
  CHECK_FALSE(is_number_token("h"));
  CHECK(is_word_token("RO4003"));
}

TEST_CASE("lexemes carry line and column") {
  const auto lx = lex("ab cd\n  ef");
  REQUIRE(lx.size() == 4);
  CHECK(lx[1].column == 4);
  CHECK(lx[3].text == "ef");
  CHECK(lx[3].line == 2);
  CHECK(lx[3].column == 3);
}

TEST_CASE("detokenize gives canonical spacing that tokenizes back") {
  const std::string canon = "param w = (h + 0.0350) * -2\nbrick (0.5, w)";
  const Tokens t = tokenize(canon);
  CHECK(detokenize(t) == canon);
  CHECK(tokenize(detokenize(t)) == t);
  CHECK(detokenize(tokenize("  brick   p   1\n\nfeed 0  1 2 ")) == "brick p 1\n\nfeed 0 1 2");
}

TEST_CASE("vocabulary construction") {
  const std::vector<Tokens> corpus = {{"a", "b"}, {"b", "c"}};
  const Vocabulary v = Vocabulary::build(corpus);
  CHECK(v.size() == 7);
  CHECK(v.token(kPad) == "<PAD>");
  CHECK(v.token(4) == "a");
  CHECK(v.token(6) == "c");
  CHECK(v.index_of("b") == 5);
  CHECK(v.index_of("zzz") == kUnk);

  const std::vector<Tokens> dup = {{"a"}, {"a"}};
  CHECK(Vocabulary::build(dup).size() == 5);
  CHECK_THROWS_AS(Vocabulary::build(std::vector<Tokens>{}), std::invalid_argument);

  const std::string text = v.to_text();
  CHECK(text.rfind("VOCAB v1\n", 0) == 0);
  CHECK(Vocabulary::from_text(text) == v);
  CHECK_THROWS_AS(Vocabulary::from_text("a\nb\n"), std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary::from_text("VOCAB v1\n<PAD>\n<START>\n"), std::invalid_argument);
  CHECK_THROWS_AS(v.token(7), std::out_of_range);
}

TEST_CASE("encode and decode") {
  const std::vector<Tokens> corpus = {{"use", "template", "Antenna"}};
  const Vocabulary v = Vocabulary::build(corpus);
  const Tokens t = {"use", "template", "Antenna"};
  const TokenSeq s = encode(t, v);
  CHECK(s == TokenSeq{kStart, 4, 5, 6, kEnd});
  CHECK(decode(s, v) == t);
  CHECK(encode(Tokens{}, v) == TokenSeq{kStart, kEnd});
  CHECK(encode(Tokens{"nope"}, v) == TokenSeq{kStart, kUnk, kEnd});
  CHECK_THROWS_AS(encode(t, v, 4), std::invalid_argument);
  CHECK_NOTHROW(encode(t, v, 5));
  CHECK_THROWS_AS(decode(TokenSeq{kStart, 99}, v), std::out_of_range);
}

TEST_CASE("sliding-window pairs") {
  const std::vector<Tokens> corpus = {{"use", "template", "Antenna", "define"}};
  const Vocabulary v = Vocabulary::build(corpus);
  const TokenSeq words = {v.index_of("use"), v.index_of("template"), v.index_of("Antenna"),
                          v.index_of("define")};
  const auto pairs = make_pairs(words, "img");
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].prefix == TokenSeq{words[0]});
  CHECK(pairs[0].target == words[1]);
  CHECK(pairs[1].prefix == TokenSeq{words[0], words[1]});
  CHECK(pairs[1].target == words[2]);
  CHECK(pairs[2].prefix == TokenSeq{words[0], words[1], words[2]});
  CHECK(pairs[2].target == words[3]);
  CHECK(pairs[2].image_id == "img");

  const TokenSeq framed = {kStart, 9, kEnd};
  const auto fp = make_pairs(framed);
  REQUIRE(fp.size() == 2);
  CHECK(fp[1].prefix == TokenSeq{kStart, 9});
  CHECK(fp[1].target == kEnd);
  TokenSeq rebuilt = fp.back().prefix;
  rebuilt.push_back(fp.back().target);
  CHECK(rebuilt == framed);
  CHECK_THROWS_AS(make_pairs(TokenSeq{kStart}), std::invalid_argument);
}

TEST_CASE("padding batches") {
  const std::vector<TokenSeq> seqs = {{1, 5, 2}, {1, 2}};
  const PaddedBatch b = pad_batch(seqs);
  CHECK(b.sequences[1] == TokenSeq{1, 2, kPad});
  CHECK(b.mask[1] == std::vector<unsigned char>{1, 1, 0});
  CHECK(b.mask[0] == std::vector<unsigned char>{1, 1, 1});
}

TEST_CASE("embedding lookup and scatter-add backward") {
  Rng rng(3);
  const EmbeddingParams p = EmbeddingParams::initialized(6, 4, rng);
  CHECK(p.matrix.shape() == Shape{6, 4});
  for (double x : p.matrix.values()) CHECK(std::abs(x) <= 0.05);
  const TokenSeq seq = {2, 5, 2};
  const Tensor e = embed(seq, p);
  CHECK(e.shape() == Shape{3, 4});
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(e.at(0, j) == p.matrix.at(2, j));
    CHECK(e.at(2, j) == e.at(0, j));
    CHECK(e.at(1, j) == p.matrix.at(5, j));
  }
  Tensor up({3, 4});
  for (std::size_t i = 0; i < up.size(); ++i) up[i] = static_cast<double>(i);
  const Tensor g = embed_backward(seq, up, p);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(g.at(2, j) == up.at(0, j) + up.at(2, j));
    CHECK(g.at(5, j) == up.at(1, j));
    CHECK(g.at(0, j) == 0.0);
  }
  CHECK_THROWS_AS(embed(TokenSeq{6}, p), std::out_of_range);
}
