#include "antcode/encoder.hpp"
#include "doctest.h"

using namespace antcode;

namespace {

EncoderConfig tiny() {
  EncoderConfig c;
  c.input_size = 32;
  c.plan = {{1, 2}, {1, 3}, {2, 2}, {1, 2}, {1, 4}};
  c.fc_widths = {6, 5};
  return c;
}

}  // namespace

TEST_CASE("encoder configurations") {
  const EncoderConfig mini = EncoderConfig::mini();
  CHECK(mini.input_size == 64);
  CHECK(mini.pooled_size() == 2);
  CHECK(mini.feature_width() == 256);
  CHECK(mini.conv_layer_count() == 13);
  CHECK_NOTHROW(mini.validate());

  const EncoderConfig full = EncoderConfig::full();
  CHECK(full.input_size == 224);
  CHECK(full.pooled_size() == 7);
  CHECK(full.flattened_width() == 512 * 7 * 7);
  CHECK(full.feature_width() == 4096);
  CHECK(full.conv_layer_count() == 13);

  EncoderConfig bad = mini;
  bad.input_size = 48;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = mini;
  bad.plan.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("encode produces a non-negative feature vector") {
  Rng rng(5);
  const EncoderConfig c = tiny();
  const EncoderParams p = EncoderParams::initialized(c, rng);
  Tensor image({1, 32, 32});
  for (double& v : image.values()) v = rng.uniform();
  const Tensor f = encode(image, p, c);
  CHECK(f.shape() == Shape{5});
  for (double v : f.values()) CHECK(v >= 0.0);
  CHECK(encode(image, p, c) == f);
  CHECK_THROWS_AS(encode(Tensor({1, 16, 16}), p, c), std::invalid_argument);
}

TEST_CASE("parameter layout and naming") {
  Rng rng(2);
  const EncoderConfig c = tiny();
  EncoderParams p = EncoderParams::initialized(c, rng);
  CHECK(p.kernels.size() == 6);
  CHECK(p.kernels[0].shape() == Shape{2, 1, 3, 3});
  CHECK(p.kernels[3].shape() == Shape{2, 2, 3, 3});
  CHECK(p.fc1_w.shape() == Shape{6, 4});
  std::vector<std::string> names;
  p.for_each([&](const std::string& n, Tensor&) { names.push_back(n); });
  CHECK(names.size() == 16);
  CHECK(names.front() == "conv0.kernels");
  CHECK(names.back() == "fc2.bias");
  for (const Tensor& b : p.biases)
    for (double v : b.values()) CHECK(v == 0.0);
}

TEST_CASE("a grayscale image is replicated across input channels") {
  Rng rng(8);
  EncoderConfig c = tiny();
  c.input_channels = 3;
  c.replicate_gray = true;
  const EncoderParams p = EncoderParams::initialized(c, rng);
  Tensor gray({1, 32, 32});
  for (double& v : gray.values()) v = rng.uniform();
  Tensor rgb({3, 32, 32});
  for (std::size_t ch = 0; ch < 3; ++ch)
    std::copy(gray.values().begin(), gray.values().end(), rgb.data() + ch * 32 * 32);
  CHECK(encode(gray, p, c) == encode(rgb, p, c));

  EncoderCache cache;
  encode(gray, p, c, cache);
  const EncoderGrads g = encoder_backward(Tensor({5}, 1.0), cache, p, c);
  CHECK(g.input.shape() == gray.shape());
}
