#include <doctest.h>

#include <cmath>
#include <random>

#include "seu/data.hpp"
#include "seu/equivariance.hpp"
#include "seu/seunet.hpp"

using namespace seu;

namespace {

SEUNetConfig small_config() {
  SEUNetConfig cfg;
  cfg.gamma = 3;
  cfg.order = 1;
  cfg.classes = 4;
  cfg.channels = {6, 12, 24};  // depth 2
  return cfg;
}

Tensor random_image(int c, int h, int w, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  Tensor t = Tensor::zeros({c, h, w});
  for (int i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

}  // namespace

TEST_CASE("layer depth factors follow the encoder/bottleneck/decoder schedule") {
  // depth 2 -> 10 conv layers: enc d=0,0,1,1; bottleneck 2,2; dec 1,1,0,0
  const std::vector<int> expect = {0, 0, 1, 1, 2, 2, 1, 1, 0, 0};
  CHECK(layer_depth_factors(2) == expect);
  CHECK(static_cast<int>(layer_depth_factors(4).size()) == 18);
}

TEST_CASE("default sigma schedule widens with depth and stays ordered") {
  const auto sched = default_sigma_schedule(2, 3);
  REQUIRE(sched.size() == 10);
  for (const auto& layer : sched) {
    REQUIRE(layer.size() == 3);
    for (size_t k = 0; k + 1 < layer.size(); ++k) {
      CHECK(layer[k].lower < layer[k].upper);
      CHECK(layer[k].upper <= layer[k + 1].lower);  // disjoint, ordered
    }
  }
  // group k at depth factor d is centered on (0.4 + 0.5 k) * 2^(d/3)
  const double c00 = 0.5 * (sched[0][0].lower + sched[0][0].upper);
  CHECK(c00 == doctest::Approx(0.4));
  const double c41 = 0.5 * (sched[4][1].lower + sched[4][1].upper);
  CHECK(c41 == doctest::Approx(0.9 * std::pow(2.0, 2.0 / 3.0)));
}

TEST_CASE("eta_tilde is bounded and sums to (gamma+1)/2 scaled") {
  for (unsigned seed = 0; seed < 5; ++seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> d(-4.0, 4.0);
    const int gamma = 5;
    Tensor raw = Tensor::zeros({gamma});
    for (int i = 0; i < gamma; ++i) raw[i] = d(rng);
    Tensor eta = eta_tilde(nullptr, raw);
    double total = 0.0;
    for (int i = 0; i < gamma; ++i) {
      CHECK(eta[i] >= 1.0 / (2.0 * gamma));
      CHECK(eta[i] <= (gamma + 1.0) / (2.0 * gamma));
      total += eta[i];
    }
    CHECK(total == doctest::Approx(1.0));  // softmax sums to 1 => total = 1
  }
}

TEST_CASE("equal logits give every head weight 1/gamma") {
  Tensor raw = Tensor::from({4}, {0.7, 0.7, 0.7, 0.7});
  Tensor eta = eta_tilde(nullptr, raw);
  for (int i = 0; i < 4; ++i) CHECK(eta[i] == doctest::Approx(0.25));
}

TEST_CASE("eta_tilde gradient matches finite differences") {
  Tensor raw = Tensor::from({3}, {0.2, -1.0, 0.5}, /*requires_grad=*/true);
  Tensor probe = Tensor::from({3}, {1.0, -2.0, 0.7});
  auto loss_of = [&](Tape* t) {
    return sum(t, mul(t, eta_tilde(t, raw), probe));
  };
  Tape tape;
  Tensor loss = loss_of(&tape);
  tape.backward(loss);
  for (int i = 0; i < 3; ++i) {
    const double keep = raw[i], h = 1e-6;
    raw[i] = keep + h;
    const double hi = loss_of(nullptr).item();
    raw[i] = keep - h;
    const double lo = loss_of(nullptr).item();
    raw[i] = keep;
    CHECK(raw.grad()[i] == doctest::Approx((hi - lo) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("forward produces gamma normalized probability maps") {
  std::mt19937 rng(3);
  SEUNet net(small_config(), rng);
  Tensor img = random_image(1, 16, 16, 11);
  SEUNetOutput out = net.forward(nullptr, img);
  REQUIRE(out.probs.size() == 3);
  REQUIRE(out.trunk.size() == 3);
  for (const Tensor& p : out.probs) {
    REQUIRE(p.dim(0) == 4);
    REQUIRE(p.dim(1) == 16);
    REQUIRE(p.dim(2) == 16);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        double s = 0.0;
        for (int c = 0; c < 4; ++c) s += p[(c * 16 + y) * 16 + x];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
      }
  }
  CHECK(out.trunk[0].dim(0) == 2);  // channels[0] / gamma
}

TEST_CASE("input dims must be divisible by 2^depth") {
  std::mt19937 rng(3);
  SEUNet net(small_config(), rng);
  CHECK_THROWS_AS(net.forward(nullptr, random_image(1, 15, 16, 1)),
                  std::invalid_argument);
}

TEST_CASE("zeroed head yields the uniform class distribution") {
  std::mt19937 rng(7);
  SEUNet net(small_config(), rng);
  // find head 0 through parameters() and null it
  for (auto& [name, t] : net.parameters())
    if (name == "head0")
      for (int i = 0; i < t.size(); ++i) t[i] = 0.0;
  SEUNetOutput out = net.forward(nullptr, random_image(1, 8, 8, 2));
  for (int i = 0; i < out.probs[0].size(); ++i)
    CHECK(out.probs[0][i] == doctest::Approx(0.25));
}

TEST_CASE("perturbing group k sigmas changes only pathway k") {
  std::mt19937 rng(9);
  SEUNetConfig cfg = small_config();
  cfg.sigma_mode = SigmaMode::kConstrained;
  SEUNet net(cfg, rng);
  Tensor img = random_image(1, 16, 16, 21);
  SEUNetOutput before = net.forward(nullptr, img);
  for (ScaleFilterBank& bank : net.banks()) bank.sigmas()[1].raw()[0] = 1.2;
  SEUNetOutput after = net.forward(nullptr, img);
  double diff1 = 0.0;
  for (int i = 0; i < before.probs[1].size(); ++i)
    diff1 += std::abs(before.probs[1][i] - after.probs[1][i]);
  CHECK(diff1 > 1e-6);  // its own head moved
  for (int k : {0, 2})
    for (int i = 0; i < before.probs[static_cast<size_t>(k)].size(); ++i)
      CHECK(before.probs[static_cast<size_t>(k)][i] ==
            after.probs[static_cast<size_t>(k)][i]);
}

TEST_CASE("combined loss with one perfect head has the closed form") {
  // gamma heads, equal eta (raw zeros): head 0 predicts the target with
  // certainty, the rest are uniform over C classes =>
  // loss = (1/gamma)*0 + ((gamma-1)/gamma) * ln C ... scaled by eta_tilde,
  // which for equal raw logits is exactly 1/gamma each.
  std::mt19937 rng(13);
  SEUNetConfig cfg = small_config();
  SEUNet net(cfg, rng);
  const int C = cfg.classes, H = 4, W = 4;
  std::vector<int> mask(H * W, 2);
  Tensor target = one_hot(mask, H, W, C);
  std::vector<Tensor> probs;
  Tensor perfect = Tensor::zeros({C, H, W});
  for (int i = 0; i < H * W; ++i) perfect[2 * H * W + i] = 1.0;
  probs.push_back(perfect);
  for (int k = 1; k < cfg.gamma; ++k)
    probs.push_back(Tensor::from({C, H, W},
                                 std::vector<double>(C * H * W, 1.0 / C)));
  Tensor loss = net.combined_loss(nullptr, probs, target);
  const double expect = (cfg.gamma - 1.0) / cfg.gamma * std::log(double(C));
  CHECK(loss.item() == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("combined loss gradient reaches alpha, sigma, heads and eta") {
  std::mt19937 rng(17);
  SEUNetConfig cfg = small_config();
  SEUNet net(cfg, rng);
  Tensor img = random_image(1, 8, 8, 31);
  std::vector<int> mask(64);
  for (int i = 0; i < 64; ++i) mask[i] = i % cfg.classes;
  Tensor target = one_hot(mask, 8, 8, cfg.classes);
  Tape tape;
  SEUNetOutput out = net.forward(&tape, img);
  Tensor loss = net.combined_loss(&tape, out.probs, target);
  tape.backward(loss);
  double ga = 0, gs = 0, gh = 0, ge = 0;
  for (auto& [name, t] : net.parameters()) {
    double n = 0.0;
    for (int i = 0; i < t.size(); ++i) n += std::abs(t.grad()[i]);
    if (name.find("alpha") != std::string::npos) ga += n;
    else if (name.find("sigma") != std::string::npos) gs += n;
    else if (name.find("head") != std::string::npos) gh += n;
    else if (name == "eta_raw") ge += n;
  }
  CHECK(ga > 0.0);
  CHECK(gs > 0.0);
  CHECK(gh > 0.0);
  CHECK(ge > 0.0);
}

TEST_CASE("single conv layer is approximately equivariant when sigma follows the scale") {
  // One first-layer smoothing bank (order 0, so no derivative amplitude
  // factors) on a smooth image: rescaling the input by s and the filter
  // sigma by s should commute with the convolution up to interpolation
  // error, and mismatched sigma should be visibly worse.
  std::mt19937 rng(19);
  std::vector<SigmaInterval> iv = {{1.4, 1.8}};
  ScaleFilterBank bank(1, 1, 2, 0, iv, SigmaMode::kFixed, true, rng);
  std::vector<Tensor> images;
  for (unsigned s = 0; s < 6; ++s) images.push_back(make_blob_image(32, 32, s));
  const double s = 2.0;
  FeatureExtractor phi = [&](const Tensor& x) {
    return bank.forward(nullptr, {x})[0];
  };
  FeatureExtractor phi_matched = [&](const Tensor& x) {
    return bank.forward(nullptr, {x}, s)[0];
  };
  ScaleError matched = equivariance_error(phi, phi_matched, images, s);
  ScaleError mismatched = equivariance_error(phi, phi, images, s);
  CHECK(matched.error < 0.05);
  CHECK(matched.error * 3.0 < mismatched.error);
}

TEST_CASE("parameter budget is well below the plain baseline") {
  std::mt19937 rng_a(23), rng_b(23);
  SEUNetConfig a = small_config();
  SEUNet net(a, rng_a);
  PlainUNetConfig b;
  b.classes = a.classes;
  b.channels = a.channels;
  PlainUNet cnn(b, rng_b);
  CHECK(net.parameter_count() * 2 < cnn.parameter_count());
  // parameter_count agrees with the parameters() view
  int total = 0;
  for (auto& [name, t] : net.parameters()) total += t.size();
  CHECK(total == net.parameter_count());
}

TEST_CASE("plain baseline forward shapes and normalization") {
  std::mt19937 rng(29);
  PlainUNetConfig cfg;
  cfg.classes = 3;
  cfg.channels = {4, 8, 16};
  PlainUNet cnn(cfg, rng);
  Tensor img = random_image(1, 12, 12, 41);
  PlainUNet::Output out = cnn.forward(nullptr, img);
  REQUIRE(out.probs.dim(0) == 3);
  REQUIRE(out.probs.dim(1) == 12);
  for (int p = 0; p < 144; ++p) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += out.probs[c * 144 + p];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}
