#include <cmath>

#include "antcode/lstm.hpp"
#include "doctest.h"
#include "lstm_oracle.hpp"

using namespace antcode;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

Tensor as_tensor(const std::vector<double>& v) { return Tensor({v.size()}, v); }

}  // namespace

TEST_CASE("lstm_step matches the scalar transcription") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t e = 1 + rng.below(6), h = 1 + rng.below(6);
    const LstmParams p = LstmParams::initialized(e, h, rng);
    const auto x = random_vec(e, rng), hp = random_vec(h, rng), cp = random_vec(h, rng);
    const LstmStep step = lstm_step(as_tensor(x), {as_tensor(cp), as_tensor(hp)}, p);
    const oracle::LstmOut ref = oracle::lstm_step(x, hp, cp, p);
    for (std::size_t k = 0; k < h; ++k) {
      CHECK(std::abs(step.state.hidden[k] - ref.hidden[k]) <= 1e-12);
      CHECK(std::abs(step.state.cell[k] - ref.cell[k]) <= 1e-12);
    }
  }
}

TEST_CASE("lstm initialisation") {
  Rng rng(1);
  const LstmParams p = LstmParams::initialized(5, 4, rng);
  CHECK(p.input_width() == 5);
  CHECK(p.hidden_width() == 4);
  CHECK(p.w_forget.shape() == Shape{4, 9});
  for (double b : p.b_forget.values()) CHECK(b == 1.0);
  for (double b : p.b_input.values()) CHECK(std::abs(b) <= 0.5);
  for (double w : p.w_output.values()) CHECK(std::abs(w) <= 0.5);
}

TEST_CASE("zero weights give the closed-form state") {
  const LstmParams p = LstmParams::zeros(2, 3);
  const LstmStep s = lstm_step(Tensor({2}, 1.0), LstmState::zeros(3), p);
  // All gates sigmoid(0) = 0.5 and candidate tanh(0) = 0, so the state stays zero.
  for (double v : s.state.cell.values()) CHECK(v == 0.0);
  for (double v : s.state.hidden.values()) CHECK(v == 0.0);
}

TEST_CASE("lstm_forward unrolls lstm_step") {
  Rng rng(9);
  const LstmParams p = LstmParams::initialized(3, 4, rng);
  std::vector<Tensor> xs;
  for (int t = 0; t < 6; ++t) xs.push_back(as_tensor(random_vec(3, rng)));
  const LstmSequence seq = lstm_forward(xs, p);
  LstmState s = LstmState::zeros(4);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    s = lstm_step(xs[t], s, p).state;
    CHECK(seq.hidden[t] == s.hidden);
  }
  CHECK(seq.final_state.cell == s.cell);
  CHECK_THROWS_AS(lstm_forward(std::vector<Tensor>{}, p), std::invalid_argument);
  CHECK_THROWS_AS(lstm_step(Tensor({4}), LstmState::zeros(4), p), std::invalid_argument);
}

TEST_CASE("a prefix's final hidden state ignores later inputs") {
  Rng rng(21);
  const LstmParams p = LstmParams::initialized(3, 3, rng);
  std::vector<Tensor> xs;
  for (int t = 0; t < 5; ++t) xs.push_back(as_tensor(random_vec(3, rng)));
  const LstmSequence full = lstm_forward(xs, p);
  for (std::size_t k = 1; k <= xs.size(); ++k) {
    const LstmSequence part = lstm_forward(std::span<const Tensor>(xs).first(k), p);
    CHECK(part.final_state.hidden == full.hidden[k - 1]);
  }
}

TEST_CASE("bptt with empty upstream matches zero upstream") {
  Rng rng(33);
  const LstmParams p = LstmParams::initialized(2, 3, rng);
  std::vector<Tensor> xs;
  for (int t = 0; t < 4; ++t) xs.push_back(as_tensor(random_vec(2, rng)));
  const LstmSequence seq = lstm_forward(xs, p);
  std::vector<Tensor> sparse(4), dense(4, Tensor({3}));
  sparse[3] = dense[3] = as_tensor(random_vec(3, rng));
  const LstmGrads a = lstm_backward(sparse, seq.caches, p);
  const LstmGrads b = lstm_backward(dense, seq.caches, p);
  CHECK(a.params.w_forget == b.params.w_forget);
  CHECK(a.inputs[0] == b.inputs[0]);
  CHECK(a.inputs.size() == 4);
}
