#include <doctest.h>

#include <cmath>
#include <random>

#include "seu/equivariance.hpp"
#include "seu/scale_space.hpp"

using namespace seu;

namespace {

Tensor constant_image(int h, int w, double v) {
  return Tensor::from({1, h, w}, std::vector<double>(static_cast<size_t>(h) * w, v));
}

// Single [1,1,tau,tau] Gaussian smoothing filter at the given sigma.
Tensor gaussian_filter(double sigma) {
  GaussianBasis b = build_basis(sigma, 0);
  return Tensor::from({1, 1, b.size, b.size}, b.kernels.at({0, 0}));
}

}  // namespace

TEST_CASE("rescale at s=1 is an exact copy") {
  Tensor img = make_blob_image(17, 23, 3);
  Tensor out = rescale(img, 1.0);
  CHECK_FALSE(out.same_storage(img));
  for (int i = 0; i < img.size(); ++i) CHECK(out[i] == img[i]);
}

TEST_CASE("rescale output dims round half away from zero") {
  Tensor img = constant_image(10, 10, 1.0);
  CHECK(rescale(img, 0.5).dim(1) == 5);
  CHECK(rescale(img, 2.0).dim(2) == 20);
  Tensor odd = constant_image(7, 7, 1.0);
  CHECK(rescale(odd, 0.5).dim(1) == 4);  // lround(3.5) = 4
  CHECK_THROWS_AS(rescale(img, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(rescale(img, -1.0), std::invalid_argument);
}

TEST_CASE("rescale preserves a constant image exactly") {
  Tensor img = constant_image(12, 12, 0.37);
  for (double s : {0.5, 0.75, 1.6, 2.0}) {
    Tensor out = rescale(img, s);
    for (int i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(0.37));
  }
}

TEST_CASE("bilinear rescale is linear in pixel coordinates") {
  // A ramp f(x,y) = x survives interior bilinear interpolation exactly.
  const int n = 16;
  Tensor img = Tensor::zeros({1, n, n});
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) img[y * n + x] = x;
  Tensor up = rescale(img, 2.0);
  for (int y = 4; y < 2 * n - 4; ++y)
    for (int x = 4; x < 2 * n - 4; ++x)
      CHECK(up[y * 2 * n + x] == doctest::Approx((x + 0.5) / 2.0 - 0.5).epsilon(1e-12));
}

TEST_CASE("down-up round trip keeps smooth images close") {
  double worst = 0.0;
  for (unsigned seed = 0; seed < 8; ++seed) {
    Tensor img = make_blob_image(32, 32, seed, /*min_radius=*/4.0);
    Tensor back = rescale(rescale(img, 0.5), 2.0);
    double d2 = 0.0, r2 = 0.0;
    for (int i = 0; i < img.size(); ++i) {
      d2 += (img[i] - back[i]) * (img[i] - back[i]);
      r2 += img[i] * img[i];
    }
    worst = std::max(worst, d2 / r2);
  }
  CHECK(worst < 0.02);
}

TEST_CASE("label rescale is nearest neighbour and never invents labels") {
  std::vector<int> labels(36);
  for (int i = 0; i < 36; ++i) labels[i] = i % 3;
  int oh = 0, ow = 0;
  std::vector<int> up = rescale_labels(labels, 6, 6, 2.0, &oh, &ow);
  CHECK(oh == 12);
  CHECK(ow == 12);
  for (int v : up) CHECK((v >= 0 && v <= 2));
  // block structure: output pixel (y,x) samples input (round((y+.5)/2-.5))
  CHECK(up[0 * 12 + 0] == labels[0]);
  CHECK(up[11 * 12 + 11] == labels[5 * 6 + 5]);
}

TEST_CASE("identity extractor has zero equivariance error") {
  std::vector<Tensor> images;
  for (unsigned s = 0; s < 4; ++s) images.push_back(make_blob_image(24, 24, s));
  FeatureExtractor id = [](const Tensor& x) { return x; };
  for (double s : {0.5, 2.0}) {
    ScaleError e = equivariance_error(id, id, images, s);
    CHECK(e.skipped == 0);
    CHECK(e.error < 1e-20);
  }
}

TEST_CASE("zero-feature extractor is counted as skipped") {
  std::vector<Tensor> images = {make_blob_image(16, 16, 1)};
  FeatureExtractor zero = [](const Tensor& x) {
    return Tensor::zeros(x.shape());
  };
  ScaleError e = equivariance_error(zero, zero, images, 2.0);
  CHECK(e.skipped == 1);
  CHECK(e.error == 0.0);
}

TEST_CASE("sigma-matched Gaussian pair beats the mismatched pairs") {
  // Filters at sigma = 1, 2, 4. Scaling the image by s = 2 matches filter k
  // with filter k+1; the pair matrix must pick that off-diagonal band.
  std::vector<Tensor> filters = {gaussian_filter(1.0), gaussian_filter(2.0),
                                 gaussian_filter(4.0)};
  std::vector<Tensor> images;
  for (unsigned s = 0; s < 10; ++s)
    images.push_back(make_blob_image(32, 32, 100 + s, /*min_radius=*/4.0));
  PairMatrix m = pair_error_matrix(filters, images, 2.0);
  REQUIRE(m.gamma == 3);
  // matched pairs (0,1) and (1,2) beat every same-filter diagonal entry
  CHECK(m.at(0, 1) < m.at(0, 0));
  CHECK(m.at(0, 1) < m.at(1, 1));
  CHECK(m.at(1, 2) < m.at(1, 1));
  CHECK(m.at(1, 2) < m.at(2, 2));
  // and the global argmin lies on that band
  CHECK(m.argmin_kp == m.argmin_k + 1);
}

TEST_CASE("pair matrix at s=1 has its minimum on the diagonal") {
  std::vector<Tensor> filters = {gaussian_filter(1.0), gaussian_filter(2.5)};
  std::vector<Tensor> images;
  for (unsigned s = 0; s < 6; ++s)
    images.push_back(make_blob_image(24, 24, 200 + s));
  PairMatrix m = pair_error_matrix(filters, images, 1.0);
  CHECK(m.at(0, 0) < 1e-18);  // S_1 is the identity, same filter both sides
  CHECK(m.at(1, 1) < 1e-18);
  CHECK(m.argmin_k == m.argmin_kp);
}

TEST_CASE("equivariance pipeline is deterministic") {
  std::vector<Tensor> images = {make_blob_image(20, 20, 7)};
  std::vector<Tensor> filters = {gaussian_filter(1.5), gaussian_filter(3.0)};
  PairMatrix a = pair_error_matrix(filters, images, 2.0);
  PairMatrix b = pair_error_matrix(filters, images, 2.0);
  for (size_t i = 0; i < a.errors.size(); ++i) CHECK(a.errors[i] == b.errors[i]);
}

TEST_CASE("blob image generation is seeded and bounded") {
  Tensor a = make_blob_image(16, 16, 42);
  Tensor b = make_blob_image(16, 16, 42);
  Tensor c = make_blob_image(16, 16, 43);
  for (int i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  double diff = 0.0;
  for (int i = 0; i < a.size(); ++i) diff += std::abs(a[i] - c[i]);
  CHECK(diff > 1e-6);
  for (int i = 0; i < a.size(); ++i) CHECK(a[i] >= 0.0);
}
