#pragma once

// Scale-equivariant UNet: encoder/decoder of scale-group convolution blocks
// with gamma isolated scale pathways, per-group 1x1 prediction heads and the
// bounded weighted multi-head loss. Also the plain-convolution UNet baseline
// used for comparisons.

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "seu/filter_bank.hpp"
#include "seu/ops.hpp"

namespace seu {

struct SEUNetConfig {
  int gamma = 5;
  int order = 1;
  int in_channels = 1;
  int classes = 2;
  // Total channels per level; channels[0..n-2] are encoder levels (each
  // followed by a 2x2 max-pool), channels[n-1] is the bottleneck. Every
  // entry must be divisible by gamma.
  std::vector<int> channels = {15, 30, 60, 120, 240};
  SigmaMode sigma_mode = SigmaMode::kConstrained;
  // Per conv-layer sigma intervals (one vector of gamma intervals per layer,
  // encoder first, then bottleneck, then decoder). Empty selects the default
  // schedule that widens sigma with depth and mirrors in the decoder.
  std::vector<std::vector<SigmaInterval>> layer_intervals;

  int depth() const { return static_cast<int>(channels.size()) - 1; }
  int conv_layer_count() const { return 4 * depth() + 2; }
};

// Depth factor of each conv layer under the encoder-increasing /
// decoder-decreasing schedule; index matches layer order in the model.
std::vector<int> layer_depth_factors(int depth);

// Interval for group k at encoder depth-factor d: (0.4 + 0.5k) * 2^(d/3) +- 0.2.
std::vector<std::vector<SigmaInterval>> default_sigma_schedule(int depth, int gamma);

// eta_tilde(raw) = (softmax(raw) + 1/gamma) / 2, elementwise; differentiable.
Tensor eta_tilde(Tape* tape, const Tensor& eta_raw);

struct SEUNetOutput {
  std::vector<Tensor> probs;  // gamma maps, each [classes, H, W]
  std::vector<Tensor> trunk;  // gamma last-decoder feature groups
};

class SEUNet {
 public:
  SEUNet(const SEUNetConfig& config, std::mt19937& rng);

  // sigma_scale rescales every realized sigma; used by the equivariance
  // protocol to evaluate the scale-matched variant of the trunk.
  SEUNetOutput forward(Tape* tape, const Tensor& image,
                       double sigma_scale = 1.0) const;

  // Weighted multi-head cross-entropy; target is one-hot [classes, H, W].
  Tensor combined_loss(Tape* tape, const std::vector<Tensor>& probs,
                       const Tensor& target) const;

  std::vector<std::pair<std::string, Tensor>> parameters();
  const SEUNetConfig& config() const { return cfg_; }
  Tensor& eta_raw() { return eta_raw_; }
  const Tensor& eta_raw() const { return eta_raw_; }

  // Realized sigma of every conv layer, [layer][group]; for logging and
  // the range-confinement checks.
  std::vector<std::vector<double>> sigma_values() const;

  std::vector<ScaleFilterBank>& banks() { return banks_; }
  const std::vector<ScaleFilterBank>& banks() const { return banks_; }

  int parameter_count() const;

 private:
  SEUNetConfig cfg_;
  // All conv layers in forward order: encoder (2 per level), bottleneck (2),
  // decoder (2 per level).
  std::vector<ScaleFilterBank> banks_;
  std::vector<Tensor> heads_;  // gamma weights [classes, out_pg, 1, 1]
  Tensor eta_raw_;             // [gamma]
};

struct PlainUNetConfig {
  int in_channels = 1;
  int classes = 2;
  std::vector<int> channels = {15, 30, 60, 120, 240};
  int kernel = 3;

  int depth() const { return static_cast<int>(channels.size()) - 1; }
};

// Conventional UNet with ordinary trainable square kernels and a single head.
class PlainUNet {
 public:
  PlainUNet(const PlainUNetConfig& config, std::mt19937& rng);

  // Returns softmax probabilities [classes, H, W]; trunk features of the
  // last decoder layer are exposed for equivariance measurement.
  struct Output {
    Tensor probs;
    Tensor trunk;
  };
  Output forward(Tape* tape, const Tensor& image) const;
  Tensor loss(Tape* tape, const Tensor& probs, const Tensor& target) const;

  std::vector<std::pair<std::string, Tensor>> parameters();
  const PlainUNetConfig& config() const { return cfg_; }
  int parameter_count() const;

 private:
  PlainUNetConfig cfg_;
  std::vector<Tensor> weights_;  // conv weights in forward order
  Tensor head_;
};

}  // namespace seu
