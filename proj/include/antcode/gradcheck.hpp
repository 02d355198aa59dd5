#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "antcode/model.hpp"
#include "antcode/tensor.hpp"

namespace antcode {

// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

struct GradcheckEntry {
  std::string component;
  std::string tensor;
  std::size_t checked = 0;  // scalars compared
  double worst = 0.0;       // largest relative error among them
  // Scalars skipped because the +-step changed a ReLU sign or max-pool
  // winner, i.e. the loss is not differentiable within the step.
  std::size_t kinks = 0;
};

struct GradcheckReport {
  double tolerance = 1e-4;
  std::vector<GradcheckEntry> entries;

  bool passed() const;
  std::vector<std::string> failed_components() const;
  double worst(std::string_view component) const;
  std::size_t scalars_checked(std::string_view component) const;
  std::size_t kinks(std::string_view component) const;
  std::string to_text() const;
};

using DenseBackwardFn = std::function<void(const Tensor& cached_input, const Tensor& weights,
                                           const Tensor& upstream, Tensor& d_weights,
                                           Tensor& d_bias, Tensor* d_input)>;

struct GradcheckOptions {
  std::string scale = "mini";  // mini | full
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
  // Backward used by the dense suite; replaceable to test the checker.
  DenseBackwardFn dense_backward = dense_backward_into;
};

// Small model used by the full-model check: 32x32 input, five single-layer
// groups of two channels, V = 11.
ModelConfig gradcheck_model_config();

// Central differences on every layer, BPTT and the whole model. Large
// tensors are sampled; the report lists each tensor that was checked.
GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

// Piecewise-linear state of a forward pass (ReLU signs, pooling winners).
using ActivationPattern = std::vector<std::uint32_t>;
using PatternFn = std::function<ActivationPattern()>;

// One central-difference comparison of `analytic` against `loss` for the
// given tensor, perturbing it in place. Checks every element when
// `max_checks` is 0 or at least the tensor size, otherwise a random subset.
// With `pattern`, elements whose two probes see different patterns are
// counted as kinks instead of compared.
GradcheckEntry check_tensor(std::string component, std::string name, Tensor& value,
                            const Tensor& analytic, const std::function<double()>& loss,
                            double step, std::size_t max_checks, Rng& rng,
                            const PatternFn& pattern = {});

}  // namespace antcode
