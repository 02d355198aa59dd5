#include <cmath>

#include "antcode/adam.hpp"
#include "doctest.h"

using namespace antcode;

TEST_CASE("adam matches a scalar transcription of the update rule") {
  const AdamHyper hp{0.01, 0.9, 0.999, 1e-8};
  Tensor w({3}, std::vector<double>{0.5, -1.0, 2.0});
  Tensor g({3});
  AdamState state(hp);
  Tensor* params[] = {&w};
  const Tensor* grads[] = {&g};

  std::vector<double> rw = {0.5, -1.0, 2.0}, m(3, 0.0), v(3, 0.0);
  for (int t = 1; t <= 25; ++t) {
    // Gradient of sum((w - 1)^2 * (i + 1)).
    for (std::size_t i = 0; i < 3; ++i) g[i] = 2.0 * (w[i] - 1.0) * static_cast<double>(i + 1);
    adam_step(params, grads, state);
    for (std::size_t i = 0; i < 3; ++i) {
      const double gi = 2.0 * (rw[i] - 1.0) * static_cast<double>(i + 1);
      m[i] = hp.beta1 * m[i] + (1 - hp.beta1) * gi;
      v[i] = hp.beta2 * v[i] + (1 - hp.beta2) * gi * gi;
      const double mh = m[i] / (1 - std::pow(hp.beta1, t));
      const double vh = v[i] / (1 - std::pow(hp.beta2, t));
      rw[i] -= hp.lr * mh / (std::sqrt(vh) + hp.epsilon);
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(w[i] == doctest::Approx(rw[i]).epsilon(1e-12));
  }
  CHECK(state.t == 25);
}

TEST_CASE("the first adam step moves each weight by about lr") {
  Tensor w({2}, std::vector<double>{0.0, 0.0});
  Tensor g({2}, std::vector<double>{3.0, -0.002});
  AdamState state(AdamHyper{1e-3});
  Tensor* params[] = {&w};
  const Tensor* grads[] = {&g};
  adam_step(params, grads, state);
  CHECK(w[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(1e-3).epsilon(1e-4));
}

TEST_CASE("adam rejects layout changes") {
  Tensor w({2}), g({2});
  AdamState state;
  Tensor* params[] = {&w};
  const Tensor* grads[] = {&g};
  adam_step(params, grads, state);
  Tensor g3({3});
  const Tensor* bad[] = {&g3};
  CHECK_THROWS_AS(adam_step(params, bad, state), std::invalid_argument);
  Tensor* two[] = {&w, &w};
  CHECK_THROWS_AS(adam_step(two, grads, state), std::invalid_argument);
}
