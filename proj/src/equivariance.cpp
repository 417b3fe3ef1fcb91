#include "seu/equivariance.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "seu/ops.hpp"

namespace seu {

namespace {

int rounded_dim(int d, double s) {
  return static_cast<int>(std::lround(d * s));
}

// Crop both tensors to their common [C, minH, minW] window (top-left) and
// return |a - b|^2 and |a|^2.
void cropped_sq_norms(const Tensor& a, const Tensor& b, double* diff2,
                      double* ref2) {
  const int c = std::min(a.dim(0), b.dim(0));
  const int h = std::min(a.dim(1), b.dim(1));
  const int w = std::min(a.dim(2), b.dim(2));
  double d2 = 0.0, r2 = 0.0;
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double va = a[(ch * a.dim(1) + y) * a.dim(2) + x];
        const double vb = b[(ch * b.dim(1) + y) * b.dim(2) + x];
        d2 += (va - vb) * (va - vb);
        r2 += va * va;
      }
  *diff2 = d2;
  *ref2 = r2;
}

}  // namespace

Tensor rescale(const Tensor& image, double s) {
  if (image.ndim() != 3)
    throw std::invalid_argument("rescale: expected a [C,H,W] tensor");
  if (!(s > 0.0)) throw std::invalid_argument("rescale: scale must be positive");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const int oh = rounded_dim(h, s), ow = rounded_dim(w, s);
  if (oh < 1 || ow < 1)
    throw std::invalid_argument("rescale: output dims degenerate at s=" +
                                std::to_string(s));
  if (s == 1.0) {
    Tensor out = Tensor::zeros(image.shape());
    for (int i = 0; i < image.size(); ++i) out[i] = image[i];
    return out;
  }
  Tensor out = Tensor::zeros({c, oh, ow});
  for (int y = 0; y < oh; ++y) {
    const double sy = (y + 0.5) / s - 0.5;
    const int y0 = static_cast<int>(std::floor(sy));
    const double fy = sy - y0;
    const int ya = std::clamp(y0, 0, h - 1), yb = std::clamp(y0 + 1, 0, h - 1);
    for (int x = 0; x < ow; ++x) {
      const double sx = (x + 0.5) / s - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const double fx = sx - x0;
      const int xa = std::clamp(x0, 0, w - 1), xb = std::clamp(x0 + 1, 0, w - 1);
      for (int ch = 0; ch < c; ++ch) {
        const double* ip = image.data() + ch * h * w;
        const double v = (1 - fy) * ((1 - fx) * ip[ya * w + xa] + fx * ip[ya * w + xb]) +
                         fy * ((1 - fx) * ip[yb * w + xa] + fx * ip[yb * w + xb]);
        out[(ch * oh + y) * ow + x] = v;
      }
    }
  }
  return out;
}

std::vector<int> rescale_labels(const std::vector<int>& labels, int h, int w,
                                double s, int* out_h, int* out_w) {
  const int oh = rounded_dim(h, s), ow = rounded_dim(w, s);
  if (oh < 1 || ow < 1)
    throw std::invalid_argument("rescale_labels: output dims degenerate");
  std::vector<int> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    const int sy = std::clamp(static_cast<int>(std::lround((y + 0.5) / s - 0.5)), 0, h - 1);
    for (int x = 0; x < ow; ++x) {
      const int sx = std::clamp(static_cast<int>(std::lround((x + 0.5) / s - 0.5)), 0, w - 1);
      out[static_cast<size_t>(y) * ow + x] = labels[static_cast<size_t>(sy) * w + sx];
    }
  }
  *out_h = oh;
  *out_w = ow;
  return out;
}

ScaleError equivariance_error(const FeatureExtractor& phi,
                              const FeatureExtractor& phi_scaled,
                              const std::vector<Tensor>& images, double s) {
  ScaleError res;
  double acc = 0.0;
  int used = 0;
  for (const Tensor& f : images) {
    Tensor lhs = rescale(phi(f), s);
    Tensor rhs = phi_scaled(rescale(f, s));
    double d2 = 0.0, r2 = 0.0;
    cropped_sq_norms(lhs, rhs, &d2, &r2);
    if (r2 <= 0.0) {
      ++res.skipped;
      continue;
    }
    acc += d2 / r2;
    ++used;
  }
  res.error = used > 0 ? acc / used : 0.0;
  return res;
}

PairMatrix pair_error_matrix(const std::vector<Tensor>& filters,
                             const std::vector<Tensor>& images, double s) {
  const int gamma = static_cast<int>(filters.size());
  PairMatrix m;
  m.gamma = gamma;
  m.errors.assign(static_cast<size_t>(gamma) * gamma, 0.0);
  for (int k = 0; k < gamma; ++k)
    for (int kp = 0; kp < gamma; ++kp) {
      auto fk = [&](const Tensor& f) { return conv2d(nullptr, f, filters[static_cast<size_t>(k)]); };
      auto fkp = [&](const Tensor& f) { return conv2d(nullptr, f, filters[static_cast<size_t>(kp)]); };
      m.errors[static_cast<size_t>(k * gamma + kp)] =
          equivariance_error(fk, fkp, images, s).error;
    }
  double best = m.errors[0];
  for (int k = 0; k < gamma; ++k)
    for (int kp = 0; kp < gamma; ++kp)
      if (m.at(k, kp) < best) {
        best = m.at(k, kp);
        m.argmin_k = k;
        m.argmin_kp = kp;
      }
  return m;
}

Tensor make_blob_image(int h, int w, unsigned seed, double min_radius) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h);
  std::uniform_real_distribution<double> ur(min_radius, min_radius * 3.0);
  std::uniform_real_distribution<double> ua(0.3, 1.0);
  Tensor img = Tensor::zeros({1, h, w});
  const int blobs = 6 + static_cast<int>(rng() % 5);
  for (int b = 0; b < blobs; ++b) {
    const double cx = ux(rng), cy = uy(rng), r = ur(rng), a = ua(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        img[y * w + x] += a * std::exp(-d2 / (2.0 * r * r));
      }
  }
  return img;
}

}  // namespace seu
