#include "antcode/lstm.hpp"

#include <cmath>
#include <stdexcept>

#include "antcode/layers.hpp"

namespace antcode {

LstmParams LstmParams::zeros(std::size_t input_width, std::size_t hidden_width) {
  if (input_width == 0 || hidden_width == 0) {
    throw std::invalid_argument("LSTM widths must be positive");
  }
  const Shape w{hidden_width, input_width + hidden_width};
  const Shape b{hidden_width};
  LstmParams p;
  p.w_forget = Tensor(w);
  p.w_input = Tensor(w);
  p.w_candidate = Tensor(w);
  p.w_output = Tensor(w);
  p.b_forget = Tensor(b);
  p.b_input = Tensor(b);
  p.b_candidate = Tensor(b);
  p.b_output = Tensor(b);
  return p;
}

LstmParams LstmParams::initialized(std::size_t input_width, std::size_t hidden_width, Rng& rng) {
  LstmParams p = zeros(input_width, hidden_width);
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden_width));
  p.for_each([&](const char*, Tensor& t) { fill_uniform(t, k, rng); });
  p.b_forget.fill(1.0);
  return p;
}

void LstmParams::validate() const {
  if (w_forget.rank() != 2 || w_forget.dim(1) <= w_forget.dim(0)) {
    throw std::invalid_argument("LSTM weights must be [H, E+H], got " +
                                shape_string(w_forget.shape()));
  }
  const Shape w = w_forget.shape();
  const Shape b{w[0]};
  require_shape(w_input, w, "LSTM w_input");
  require_shape(w_candidate, w, "LSTM w_candidate");
  require_shape(w_output, w, "LSTM w_output");
  require_shape(b_forget, b, "LSTM b_forget");
  require_shape(b_input, b, "LSTM b_input");
  require_shape(b_candidate, b, "LSTM b_candidate");
  require_shape(b_output, b, "LSTM b_output");
}

LstmState LstmState::zeros(std::size_t hidden_width) {
  return {Tensor({hidden_width}), Tensor({hidden_width})};
}

LstmStep lstm_step(const Tensor& x, const LstmState& prev, const LstmParams& params) {
  params.validate();
  const std::size_t e = params.input_width(), h = params.hidden_width();
  require_shape(x, {e}, "lstm_step input");
  require_shape(prev.cell, {h}, "lstm_step previous cell");
  require_shape(prev.hidden, {h}, "lstm_step previous hidden");

  LstmStep step;
  LstmStepCache& c = step.cache;
  c.concat = Tensor({e + h});
  std::copy(x.data(), x.data() + e, c.concat.data());
  std::copy(prev.hidden.data(), prev.hidden.data() + h, c.concat.data() + e);

  c.forget = sigmoid(dense(c.concat, params.w_forget, params.b_forget));
  c.input = sigmoid(dense(c.concat, params.w_input, params.b_input));
  c.candidate = tanh_(dense(c.concat, params.w_candidate, params.b_candidate));
  c.output = sigmoid(dense(c.concat, params.w_output, params.b_output));
  c.prev_cell = prev.cell;

  step.state.cell = Tensor({h});
  step.state.hidden = Tensor({h});
  c.cell_tanh = Tensor({h});
  for (std::size_t j = 0; j < h; ++j) {
    const double cell = c.forget[j] * prev.cell[j] + c.input[j] * c.candidate[j];
    step.state.cell[j] = cell;
    c.cell_tanh[j] = std::tanh(cell);
    step.state.hidden[j] = c.output[j] * c.cell_tanh[j];
  }
  return step;
}

LstmSequence lstm_forward(std::span<const Tensor> xs, const LstmParams& params) {
  return lstm_forward(xs, params, LstmState::zeros(params.hidden_width()));
}

LstmSequence lstm_forward(std::span<const Tensor> xs, const LstmParams& params,
                          const LstmState& initial) {
  if (xs.empty()) throw std::invalid_argument("lstm_forward: empty input sequence");
  LstmSequence seq;
  seq.hidden.reserve(xs.size());
  seq.caches.reserve(xs.size());
  LstmState state = initial;
  for (const Tensor& x : xs) {
    LstmStep step = lstm_step(x, state, params);
    seq.hidden.push_back(step.state.hidden);
    seq.caches.push_back(std::move(step.cache));
    state = std::move(step.state);
  }
  seq.final_state = std::move(state);
  return seq;
}

void lstm_backward_into(std::span<const Tensor> upstream, std::span<const LstmStepCache> caches,
                        const LstmParams& params, LstmParams& grads,
                        std::vector<Tensor>* d_inputs) {
  params.validate();
  grads.validate();
  require_shape(grads.w_forget, params.w_forget.shape(), "LSTM gradient layout");
  if (caches.empty()) throw std::logic_error("lstm_backward: missing forward caches");
  if (upstream.size() != caches.size()) {
    throw std::invalid_argument("lstm_backward: " + std::to_string(upstream.size()) +
                                " upstream grads for " + std::to_string(caches.size()) + " steps");
  }
  const std::size_t e = params.input_width(), h = params.hidden_width();
  const std::size_t steps = caches.size();
  if (d_inputs) d_inputs->assign(steps, Tensor());

  std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0);
  Tensor pre_f({h}), pre_i({h}), pre_q({h}), pre_o({h});
  Tensor dz({e + h});

  for (std::size_t s = steps; s-- > 0;) {
    const LstmStepCache& c = caches[s];
    if (c.concat.empty()) throw std::logic_error("lstm_backward: missing forward cache");
    const Tensor& up = upstream[s];
    if (!up.empty()) require_shape(up, {h}, "lstm_backward upstream");

    for (std::size_t j = 0; j < h; ++j) {
      const double dh = dh_next[j] + (up.empty() ? 0.0 : up[j]);
      const double d_out = dh * c.cell_tanh[j];
      const double dc =
          dh * c.output[j] * (1.0 - c.cell_tanh[j] * c.cell_tanh[j]) + dc_next[j];
      const double d_forget = dc * c.prev_cell[j];
      const double d_input = dc * c.candidate[j];
      const double d_cand = dc * c.input[j];
      dc_next[j] = dc * c.forget[j];
      pre_f[j] = d_forget * c.forget[j] * (1.0 - c.forget[j]);
      pre_i[j] = d_input * c.input[j] * (1.0 - c.input[j]);
      pre_q[j] = d_cand * (1.0 - c.candidate[j] * c.candidate[j]);
      pre_o[j] = d_out * c.output[j] * (1.0 - c.output[j]);
    }

    dz.set_zero();
    dense_backward_into(c.concat, params.w_forget, pre_f, grads.w_forget, grads.b_forget, &dz);
    dense_backward_into(c.concat, params.w_input, pre_i, grads.w_input, grads.b_input, &dz);
    dense_backward_into(c.concat, params.w_candidate, pre_q, grads.w_candidate,
                        grads.b_candidate, &dz);
    dense_backward_into(c.concat, params.w_output, pre_o, grads.w_output, grads.b_output, &dz);

    if (d_inputs) {
      (*d_inputs)[s] = Tensor({e}, std::vector<double>(dz.data(), dz.data() + e));
    }
    std::copy(dz.data() + e, dz.data() + e + h, dh_next.begin());
  }
}

LstmGrads lstm_backward(std::span<const Tensor> upstream, std::span<const LstmStepCache> caches,
                        const LstmParams& params) {
  params.validate();
  LstmGrads g;
  g.params = LstmParams::zeros(params.input_width(), params.hidden_width());
  lstm_backward_into(upstream, caches, params, g.params, &g.inputs);
  return g;
}

}  // namespace antcode
