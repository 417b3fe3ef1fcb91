#include <doctest.h>

#include <cmath>
#include <random>

#include "seu/ops.hpp"

using namespace seu;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937& rng, bool rg = true) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Tensor t = Tensor::zeros(std::move(shape), rg);
  for (int i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

// Central-difference gradient of a scalar-valued forward against the
// backward pass, elementwise over `param`.
template <typename Fwd>
double max_rel_grad_error(Tensor param, Fwd forward, double step = 1e-6) {
  param.zero_grad();
  Tape tape;
  Tensor loss = forward(&tape);
  tape.backward(loss);
  double worst = 0.0;
  for (int i = 0; i < param.size(); ++i) {
    const double keep = param[i];
    param[i] = keep + step;
    const double hi = forward(nullptr).item();
    param[i] = keep - step;
    const double lo = forward(nullptr).item();
    param[i] = keep;
    const double fd = (hi - lo) / (2.0 * step);
    const double denom = std::max({std::abs(fd), std::abs(param.grad()[i]), 1e-8});
    worst = std::max(worst, std::abs(fd - param.grad()[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("conv2d identity kernel reproduces the input") {
  std::mt19937 rng(1);
  Tensor x = random_tensor({2, 6, 6}, rng, false);
  Tensor w = Tensor::zeros({2, 2, 3, 3});
  w[0 * 2 * 9 + 0 * 9 + 4] = 1.0;  // center tap, channel 0 -> 0
  w[1 * 2 * 9 + 1 * 9 + 4] = 1.0;  // channel 1 -> 1
  Tensor y = conv2d(nullptr, x, w);
  for (int i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("conv2d box kernel on all-ones image") {
  Tensor x = Tensor::from({1, 3, 3}, std::vector<double>(9, 1.0));
  Tensor w = Tensor::from({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  Tensor y = conv2d(nullptr, x, w);
  CHECK(y[4] == 9.0);  // center
  CHECK(y[0] == 4.0);  // corner
  CHECK(y[1] == 6.0);  // edge
}

TEST_CASE("conv2d rejects even kernels and channel mismatches") {
  Tensor x = Tensor::zeros({1, 4, 4});
  CHECK_THROWS_AS(conv2d(nullptr, x, Tensor::zeros({1, 1, 2, 2})),
                  std::invalid_argument);
  CHECK_THROWS_AS(conv2d(nullptr, x, Tensor::zeros({1, 3, 3, 3})),
                  std::invalid_argument);
}

TEST_CASE("conv2d weight and input gradients match finite differences") {
  std::mt19937 rng(7);
  Tensor x = random_tensor({2, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  auto fwd = [&](Tape* t) { return sum(t, conv2d(t, x, w)); };
  CHECK(max_rel_grad_error(w, fwd) < 1e-5);
  CHECK(max_rel_grad_error(x, fwd) < 1e-5);
}

TEST_CASE("backward of sum is all-ones; relu applies the 0/1 mask") {
  Tensor x = Tensor::from({1, 2, 2}, {-1.0, 2.0, 0.0, 3.0}, true);
  {
    Tape tape;
    Tensor loss = sum(&tape, x);
    tape.backward(loss);
    for (int i = 0; i < 4; ++i) CHECK(x.grad()[i] == 1.0);
  }
  x.zero_grad();
  {
    Tape tape;
    Tensor loss = sum(&tape, relu(&tape, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 1.0);
    CHECK(x.grad()[2] == 0.0);  // relu'(0) defined as 0
    CHECK(x.grad()[3] == 1.0);
  }
}

TEST_CASE("parameter gradients accumulate across backward passes") {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  for (int pass = 0; pass < 2; ++pass) {
    Tape tape;
    Tensor loss = sum(&tape, x);
    tape.backward(loss);
  }
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 2.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor x = Tensor::zeros({2}, true);
  Tape tape;
  Tensor y = relu(&tape, x);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
}

TEST_CASE("maxpool/upsample round trip replicates pooled values per block") {
  std::mt19937 rng(3);
  Tensor x = random_tensor({2, 6, 4}, rng, false);
  Tensor up = upsample2x(nullptr, maxpool2x2(nullptr, x));
  CHECK(up.shape() == x.shape());
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < 6; y += 2)
      for (int xx = 0; xx < 4; xx += 2) {
        const double v = up[(c * 6 + y) * 4 + xx];
        CHECK(up[(c * 6 + y) * 4 + xx + 1] == v);
        CHECK(up[(c * 6 + y + 1) * 4 + xx] == v);
        CHECK(up[(c * 6 + y + 1) * 4 + xx + 1] == v);
        double m = x[(c * 6 + y) * 4 + xx];
        m = std::max(m, x[(c * 6 + y) * 4 + xx + 1]);
        m = std::max(m, x[(c * 6 + y + 1) * 4 + xx]);
        m = std::max(m, x[(c * 6 + y + 1) * 4 + xx + 1]);
        CHECK(v == m);
      }
}

TEST_CASE("maxpool ties break to the first index in row-major order") {
  Tensor x = Tensor::from({1, 2, 2}, {5.0, 5.0, 5.0, 5.0}, true);
  Tape tape;
  Tensor loss = sum(&tape, maxpool2x2(&tape, x));
  tape.backward(loss);
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 0.0);
  CHECK(x.grad()[3] == 0.0);
}

TEST_CASE("softmax channels normalizes and cross-entropy hits closed forms") {
  // uniform prediction over C=5: loss = ln 5 per pixel
  Tensor logits = Tensor::zeros({5, 2, 2}, true);
  Tape tape;
  Tensor p = softmax_channels(&tape, logits);
  for (int px = 0; px < 4; ++px) {
    double s = 0.0;
    for (int c = 0; c < 5; ++c) s += p[c * 4 + px];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  Tensor target = Tensor::zeros({5, 2, 2});
  for (int px = 0; px < 4; ++px) target[0 * 4 + px] = 1.0;
  Tensor loss = cross_entropy(&tape, p, target);
  CHECK(loss.item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  // gradient at uniform prediction: (1/C - y) / num_pixels per pixel-channel
  tape.backward(loss);
  for (int c = 0; c < 5; ++c)
    for (int px = 0; px < 4; ++px) {
      const double y = c == 0 ? 1.0 : 0.0;
      CHECK(logits.grad()[c * 4 + px] ==
            doctest::Approx((0.2 - y) / 4.0).epsilon(1e-10));
    }
}

TEST_CASE("cross-entropy of a confident correct prediction tends to zero") {
  Tensor logits = Tensor::zeros({2, 1, 1});
  logits[0] = 40.0;
  Tensor p = softmax_channels(nullptr, logits);
  Tensor target = Tensor::from({2, 1, 1}, {1.0, 0.0});
  CHECK(cross_entropy(nullptr, p, target).item() < 1e-12);
}

TEST_CASE("cross-entropy rejects non-one-hot targets") {
  Tensor p = Tensor::from({2, 1, 1}, {0.5, 0.5});
  CHECK_THROWS_AS(cross_entropy(nullptr, p, Tensor::from({2, 1, 1}, {0.3, 0.7})),
                  std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(nullptr, p, Tensor::from({2, 1, 1}, {1.0, 1.0})),
                  std::invalid_argument);
}

TEST_CASE("universal finite-difference gradient property per op") {
  std::mt19937 rng(11);
  // conv -> relu -> pool -> upsample -> concat -> softmax -> cross-entropy
  Tensor x = random_tensor({2, 4, 4}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor w2 = random_tensor({2, 6, 1, 1}, rng);
  Tensor target = Tensor::zeros({2, 4, 4});
  for (int px = 0; px < 16; ++px) target[(px % 2) * 16 + px] = 1.0;

  auto fwd = [&](Tape* t) {
    Tensor h1 = relu(t, conv2d(t, x, w));
    Tensor h2 = upsample2x(t, maxpool2x2(t, h1));
    Tensor h3 = concat_channels(t, {h1, h2});
    Tensor logits = conv2d(t, h3, w2);
    return cross_entropy(t, softmax_channels(t, logits), target);
  };
  CHECK(max_rel_grad_error(x, fwd) < 1e-4);
  CHECK(max_rel_grad_error(w, fwd) < 1e-4);
  CHECK(max_rel_grad_error(w2, fwd) < 1e-4);

  // elementwise ops
  Tensor a = random_tensor({3, 2, 2}, rng);
  Tensor b = random_tensor({3, 2, 2}, rng);
  auto fwd2 = [&](Tape* t) {
    return sum(t, mul(t, add(t, a, b), scale(t, a, 0.7)));
  };
  CHECK(max_rel_grad_error(a, fwd2) < 1e-4);
  CHECK(max_rel_grad_error(b, fwd2) < 1e-4);

  // weighted sum of scalars
  Tensor ws = random_tensor({3}, rng);
  Tensor s0 = random_tensor({1}, rng);
  Tensor s1 = random_tensor({1}, rng);
  Tensor s2 = random_tensor({1}, rng);
  auto fwd3 = [&](Tape* t) { return weighted_sum(t, ws, {s0, s1, s2}); };
  CHECK(max_rel_grad_error(ws, fwd3) < 1e-4);
  CHECK(max_rel_grad_error(s1, fwd3) < 1e-4);
}

TEST_CASE("determinism: identical seeds give bit-identical values and grads") {
  auto run = [](unsigned seed) {
    std::mt19937 rng(seed);
    Tensor x = random_tensor({2, 4, 4}, rng);
    Tensor w = random_tensor({2, 2, 3, 3}, rng);
    Tape tape;
    Tensor loss = sum(&tape, relu(&tape, conv2d(&tape, x, w)));
    tape.backward(loss);
    std::vector<double> out{loss.item()};
    for (int i = 0; i < w.size(); ++i) out.push_back(w.grad()[i]);
    return out;
  };
  CHECK(run(42) == run(42));
}
