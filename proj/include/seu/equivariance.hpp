#pragma once

// Image rescaling operator S_s and the equivariance-error metrics: the
// per-scale error Delta_s over a feature extractor and the gamma x gamma
// per-filter-pair error matrix.

#include <functional>
#include <vector>

#include "seu/tensor.hpp"

namespace seu {

// Bilinear rescale with pixel-center alignment, [C,H,W] ->
// [C,round(sH),round(sW)]. s > 1 up-scales.
Tensor rescale(const Tensor& image, double s);

// Nearest-neighbour rescale of an integer label map, row-major H*W.
std::vector<int> rescale_labels(const std::vector<int>& labels, int h, int w,
                                double s, int* out_h, int* out_w);

using FeatureExtractor = std::function<Tensor(const Tensor&)>;

struct ScaleError {
  double error = 0.0;   // Delta_s
  int skipped = 0;      // images excluded for a zero-norm denominator
};

// Delta_s = mean over images of |S_s phi(f) - phi_s(S_s f)|^2 / |S_s phi(f)|^2.
// Operands are cropped to common dims when rounding disagrees by a pixel.
ScaleError equivariance_error(const FeatureExtractor& phi,
                              const FeatureExtractor& phi_scaled,
                              const std::vector<Tensor>& images, double s);

// Entry (k, k') compares S_s(F_k * f) against F_k' * S_s(f).
struct PairMatrix {
  int gamma = 0;
  std::vector<double> errors;  // row-major gamma x gamma
  int argmin_k = 0, argmin_kp = 0;
  double at(int k, int kp) const { return errors[static_cast<size_t>(k * gamma + kp)]; }
};

PairMatrix pair_error_matrix(const std::vector<Tensor>& filters,
                             const std::vector<Tensor>& images, double s);

struct EquivarianceReport {
  std::vector<double> scale_factors;
  std::vector<ScaleError> per_scale_error;
  std::vector<PairMatrix> pair_matrices;  // empty when not requested
};

// Smooth band-limited test image: a sum of Gaussian blobs whose radii stay
// above min_radius, so interpolation error does not dominate the metric.
Tensor make_blob_image(int h, int w, unsigned seed, double min_radius = 3.0);

}  // namespace seu
