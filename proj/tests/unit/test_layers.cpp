#include <cmath>

#include "antcode/layers.hpp"
#include "doctest.h"

using namespace antcode;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-1, 1);
  return t;
}

// Direct transcription of 3x3 same-padded cross-correlation.
Tensor conv_oracle(const Tensor& x, const Tensor& k, const Tensor& b) {
  const std::size_t co = k.dim(0), ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y({co, h, w});
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        double s = b[o];
        for (std::size_t i = 0; i < ci; ++i)
          for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
              const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
              if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) continue;
              s += x.at(i, static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) *
                   k[((o * ci + i) * 3 + static_cast<std::size_t>(dr + 1)) * 3 + static_cast<std::size_t>(dc + 1)];
            }
        y.at(o, r, c) = s;
      }
  return y;
}

}  // namespace

TEST_CASE("conv2d matches a direct loop transcription") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t ci = 1 + rng.below(3), co = 1 + rng.below(4);
    const std::size_t h = 1 + rng.below(6), w = 1 + rng.below(6);
    const Tensor x = random_tensor({ci, h, w}, rng);
    const Tensor k = random_tensor({co, ci, 3, 3}, rng);
    const Tensor b = random_tensor({co}, rng);
    CHECK(max_abs_diff(conv2d(x, k, b), conv_oracle(x, k, b)) < 1e-13);
  }
}

TEST_CASE("conv2d keeps spatial size and rejects bad shapes") {
  Rng rng(1);
  const Tensor x = random_tensor({2, 8, 8}, rng);
  CHECK(conv2d(x, Tensor({4, 2, 3, 3}), Tensor({4})).shape() == Shape{4, 8, 8});
  CHECK_THROWS_AS(conv2d(x, Tensor({4, 3, 3, 3}), Tensor({4})), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(x, Tensor({4, 2, 3, 3}), Tensor({3})), std::invalid_argument);
}

TEST_CASE("a single-one kernel shifts the image") {
  Tensor x({1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor k({1, 1, 3, 3});
  k[5] = 1.0;  // centre row, right column: y[r][c] = x[r][c+1]
  const Tensor y = conv2d(x, k, Tensor({1}));
  CHECK(y == Tensor({1, 3, 3}, std::vector<double>{2, 3, 0, 5, 6, 0, 8, 9, 0}));
}

TEST_CASE("maxpool2 picks window maxima and routes gradients to them") {
  Tensor x({1, 2, 4}, std::vector<double>{1, 5, 2, 0, 3, 4, 8, 7});
  const PoolResult p = maxpool2(x);
  CHECK(p.output == Tensor({1, 1, 2}, std::vector<double>{5, 8}));
  const Tensor dx = maxpool2_backward(p, Tensor({1, 1, 2}, std::vector<double>{10, 20}));
  CHECK(dx == Tensor({1, 2, 4}, std::vector<double>{0, 10, 0, 0, 0, 0, 20, 0}));
  CHECK_THROWS_AS(maxpool2(Tensor({1, 3, 4})), std::invalid_argument);
}

TEST_CASE("dense and its backward match the outer-product formulas") {
  Rng rng(5);
  const Tensor x = random_tensor({4}, rng);
  const Tensor w = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor y = dense(x, w, b);
  for (std::size_t i = 0; i < 3; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < 4; ++j) s += w.at(i, j) * x[j];
    CHECK(y[i] == doctest::Approx(s).epsilon(1e-14));
  }
  const Tensor up = random_tensor({3}, rng);
  const LayerGrads g = dense_backward(x, w, up);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(g.param("weights").at(i, j) == doctest::Approx(up[i] * x[j]));
  CHECK(g.param("bias") == up);
  for (std::size_t j = 0; j < 4; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += w.at(i, j) * up[i];
    CHECK(g.input[j] == doctest::Approx(s));
  }
  CHECK_THROWS_AS(dense_backward(Tensor(), w, up), std::logic_error);
}

TEST_CASE("softmax sums to one and is shift invariant") {
  Rng rng(8);
  Tensor z = random_tensor({9}, rng);
  z *= 20.0;
  const Tensor p = softmax(z);
  double s = 0;
  for (double v : p.values()) s += v;
  CHECK(std::abs(s - 1.0) < 1e-12);
  Tensor shifted = z;
  for (double& v : shifted.values()) v += 1000.0;
  CHECK(max_abs_diff(softmax(shifted), p) < 1e-12);
  CHECK(argmax(shifted) == argmax(z));
}

TEST_CASE("cross-entropy of uniform logits is ln V") {
  const CrossEntropy ce = softmax_cross_entropy(Tensor({11}), 4);
  CHECK(ce.loss == doctest::Approx(std::log(11.0)).epsilon(1e-14));
  CHECK(ce.grad[4] == doctest::Approx(1.0 / 11 - 1.0));
  CHECK(ce.loss >= 0.0);
  CHECK_THROWS_AS(softmax_cross_entropy(Tensor({11}), 11), std::out_of_range);
}

TEST_CASE("cross-entropy gradient vanishes only for a one-hot prediction at the target") {
  Tensor z({4});
  z[2] = 800.0;
  const CrossEntropy ce = softmax_cross_entropy(z, 2);
  CHECK(ce.loss == 0.0);
  for (double g : ce.grad.values()) CHECK(g == 0.0);
  CHECK(softmax_cross_entropy(z, 1).grad[1] == -1.0);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(Tensor({4}, std::vector<double>{1, 3, 3, 2})) == 1);
  CHECK(argmax(Tensor({3}, std::vector<double>{0, 0, 0})) == 0);
}

TEST_CASE("activations and their derivatives") {
  const Tensor x({4}, std::vector<double>{-2, -0.5, 0.5, 2});
  CHECK(relu(x) == Tensor({4}, std::vector<double>{0, 0, 0.5, 2}));
  const Tensor up({4}, 1.0);
  CHECK(relu_backward(x, up) == Tensor({4}, std::vector<double>{0, 0, 1, 1}));
  const Tensor s = sigmoid(x);
  const Tensor t = tanh_(x);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(s[i] == doctest::Approx(1 / (1 + std::exp(-x[i]))));
    CHECK(t[i] == doctest::Approx(std::tanh(x[i])));
    CHECK(sigmoid_backward(s, up)[i] == doctest::Approx(s[i] * (1 - s[i])));
    CHECK(tanh_backward(t, up)[i] == doctest::Approx(1 - t[i] * t[i]));
  }
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("inverted dropout") {
  Rng rng(2);
  const Tensor x({20000}, 1.0);
  const DropoutResult d = dropout(x, 0.5, Mode::train, rng);
  double kept = 0, mean = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK((d.output[i] == 0.0 || d.output[i] == 2.0));
    kept += d.output[i] != 0.0;
    mean += d.output[i];
  }
  CHECK(kept / 20000 == doctest::Approx(0.5).epsilon(0.03));
  CHECK(mean / 20000 == doctest::Approx(1.0).epsilon(0.05));
  const Tensor back = dropout_backward(d, x);
  CHECK(back == d.output);

  const DropoutResult e = dropout(x, 0.5, Mode::eval, rng);
  CHECK(e.output == x);
  CHECK(e.mask.empty());
  CHECK_THROWS_AS(dropout(x, 1.0, Mode::train, rng), std::invalid_argument);
  CHECK_THROWS_AS(dropout(x, -0.1, Mode::train, rng), std::invalid_argument);
}

TEST_CASE("initialisers respect their limits") {
  Rng rng(4);
  Tensor t({64, 16});
  fill_he_uniform(t, 16, rng);
  const double limit = std::sqrt(6.0 / 16);
  for (double v : t.values()) CHECK(std::abs(v) <= limit);
  fill_uniform(t, 0.05, rng);
  for (double v : t.values()) CHECK(std::abs(v) <= 0.05);
}
