#pragma once

// One layer's gamma groups of convolution filters, each a shared-coefficient
// linear combination of Gaussian derivative kernels at a per-group
// range-constrained sigma. Sigma latents are trainable scalars whose
// gradients flow through the analytic kernel derivative.

#include <random>
#include <string>
#include <vector>

#include "seu/scale_space.hpp"
#include "seu/tensor.hpp"

namespace seu {

enum class SigmaMode { kConstrained, kFixed, kFree };

SigmaMode sigma_mode_from_string(const std::string& s);
std::string to_string(SigmaMode m);

// Trainable scale parameter. In constrained mode the latent is squashed
// by tanh into (lower, upper); in fixed mode value() is the interval
// midpoint with zero latent gradient; in free mode value() is
// softplus(raw) + 0.3 so the filter support never collapses below 3.
class SigmaParam {
 public:
  SigmaParam() = default;
  SigmaParam(double lower, double upper, SigmaMode mode);

  double value() const;
  double dvalue_draw() const;  // d value / d raw at the current latent

  Tensor& raw() { return raw_; }
  const Tensor& raw() const { return raw_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  SigmaMode mode() const { return mode_; }

 private:
  Tensor raw_;  // scalar latent, initialized to 0 (interval midpoint)
  double lower_ = 0.0;
  double upper_ = 1.0;
  SigmaMode mode_ = SigmaMode::kConstrained;
};

struct SigmaInterval {
  double lower = 0.0;
  double upper = 1.0;
};

class ScaleFilterBank {
 public:
  // When first_layer is true every group convolves the full input image
  // (in_channels is the image channel count); otherwise in_channels is the
  // per-group channel count of the incoming feature maps.
  ScaleFilterBank(int gamma, int in_channels, int out_channels_per_group,
                  int order, const std::vector<SigmaInterval>& intervals,
                  SigmaMode mode, bool first_layer, std::mt19937& rng);

  // Current filter stack for every group, [out_pg, in, tau_k, tau_k].
  // Differentiable through alpha and the sigma latents when tape != nullptr.
  // sigma_scale multiplies every realized sigma; the equivariance protocol
  // uses it to evaluate the scale-matched filter variant.
  std::vector<Tensor> realize_filters(Tape* tape, double sigma_scale = 1.0) const;

  // Per-group convolution with size-preserving zero padding. Input is one
  // tensor per group, or a single tensor when first_layer (broadcast).
  std::vector<Tensor> forward(Tape* tape, const std::vector<Tensor>& input,
                              double sigma_scale = 1.0) const;

  int gamma() const { return gamma_; }
  int order() const { return order_; }
  int in_channels() const { return in_channels_; }
  int out_channels_per_group() const { return out_pg_; }
  bool first_layer() const { return first_layer_; }

  Tensor& alpha() { return alpha_; }
  const Tensor& alpha() const { return alpha_; }
  std::vector<SigmaParam>& sigmas() { return sigmas_; }
  const std::vector<SigmaParam>& sigmas() const { return sigmas_; }

  int parameter_count() const;

 private:
  int gamma_ = 1;
  int in_channels_ = 1;
  int out_pg_ = 1;
  int order_ = 1;
  bool first_layer_ = false;
  Tensor alpha_;  // [basis_count, out_pg, in_channels], shared across groups
  std::vector<SigmaParam> sigmas_;
};

}  // namespace seu
