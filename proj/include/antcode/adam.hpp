#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "antcode/tensor.hpp"

namespace antcode {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(AdamHyper h) : hyper(h) {}
};

// One bias-corrected Adam update. Moments are allocated on the first
// step; afterwards every parameter must keep the shape it had then.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state);

}  // namespace antcode
