#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "antcode/rng.hpp"
#include "antcode/tensor.hpp"

namespace antcode {

// Single-layer LSTM. Each gate has one weight matrix [H, E+H] acting on
// the concatenation [x_t, h_{t-1}]:
//
//   f_t = sigmoid(W_f [x_t, h_{t-1}] + b_f)
//   i_t = sigmoid(W_i [x_t, h_{t-1}] + b_i)
//   q_t = tanh   (W_q [x_t, h_{t-1}] + b_q)
//   C_t = f_t * C_{t-1} + i_t * q_t
//   o_t = sigmoid(W_o [x_t, h_{t-1}] + b_o)
//   h_t = o_t * tanh(C_t)
struct LstmParams {
  Tensor w_forget, w_input, w_candidate, w_output;
  Tensor b_forget, b_input, b_candidate, b_output;

  static LstmParams zeros(std::size_t input_width, std::size_t hidden_width);
  // Uniform in [-1/sqrt(H), 1/sqrt(H)], forget bias 1.
  static LstmParams initialized(std::size_t input_width, std::size_t hidden_width, Rng& rng);

  std::size_t input_width() const { return w_forget.dim(1) - w_forget.dim(0); }
  std::size_t hidden_width() const { return w_forget.dim(0); }
  void validate() const;

  template <class F>
  void for_each(F&& f) {
    f("w_forget", w_forget);
    f("w_input", w_input);
    f("w_candidate", w_candidate);
    f("w_output", w_output);
    f("b_forget", b_forget);
    f("b_input", b_input);
    f("b_candidate", b_candidate);
    f("b_output", b_output);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<LstmParams*>(this)->for_each(
        [&](const char* name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
  }
};

struct LstmState {
  Tensor cell;
  Tensor hidden;

  static LstmState zeros(std::size_t hidden_width);
};

// Values retained by a step for backpropagation through time.
struct LstmStepCache {
  Tensor concat;  // [x_t, h_{t-1}]
  Tensor forget, input, candidate, output;
  Tensor prev_cell;
  Tensor cell_tanh;
};

struct LstmStep {
  LstmState state;
  LstmStepCache cache;
};

LstmStep lstm_step(const Tensor& x, const LstmState& prev, const LstmParams& params);

struct LstmSequence {
  std::vector<Tensor> hidden;  // h_1 .. h_T
  std::vector<LstmStepCache> caches;
  LstmState final_state;
};

// Unrolls from `initial` (zero state when omitted).
LstmSequence lstm_forward(std::span<const Tensor> xs, const LstmParams& params);
LstmSequence lstm_forward(std::span<const Tensor> xs, const LstmParams& params,
                          const LstmState& initial);

struct LstmGrads {
  LstmParams params;           // same layout as the weights
  std::vector<Tensor> inputs;  // d loss / d x_t
};

// `upstream[t]` is d loss / d h_t; an empty tensor stands for zero.
LstmGrads lstm_backward(std::span<const Tensor> upstream, std::span<const LstmStepCache> caches,
                        const LstmParams& params);
// Accumulating form used by the caption model.
void lstm_backward_into(std::span<const Tensor> upstream, std::span<const LstmStepCache> caches,
                        const LstmParams& params, LstmParams& grads,
                        std::vector<Tensor>* d_inputs);

}  // namespace antcode
