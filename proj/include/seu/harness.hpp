#pragma once

// Everything around the math: model construction from a config, the Adam
// training loop, multi-scale evaluation, model-level checkpoint IO and the
// equivariance report for trained models.

#include <memory>
#include <string>
#include <vector>

#include "seu/config.hpp"
#include "seu/data.hpp"
#include "seu/equivariance.hpp"
#include "seu/inference.hpp"
#include "seu/seunet.hpp"

namespace seu {

// Worker-thread cap from SE_THREADS (default 1).
int thread_cap();

struct Model {
  ExperimentConfig config;
  std::shared_ptr<SEUNet> seunet;  // exactly one of these is set
  std::shared_ptr<PlainUNet> cnn;

  bool is_seunet() const { return seunet != nullptr; }
  std::vector<std::pair<std::string, Tensor>> parameters() const;
  int head_count() const { return is_seunet() ? config.gamma : 1; }
};

Model build_model(const ExperimentConfig& cfg);

struct TrainLog {
  std::vector<double> epoch_loss;
  std::vector<std::vector<double>> epoch_eta;  // eta_tilde per epoch (seunet)
  // sigma values [epoch][layer][group] (seunet)
  std::vector<std::vector<std::vector<double>>> epoch_sigma;
  // The training pipeline applies no input rescaling; tests introspect this.
  std::vector<std::string> augmentations;
};

// Trains on the scale-1 training set only. Throws NumericError with a
// parameter-norm dump if the loss goes non-finite, and if a constrained
// sigma ever leaves its interval.
TrainLog train_model(Model& model, const Dataset& data);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

struct ScaleMetrics {
  double scale = 1.0;
  std::vector<double> per_head;  // mIoU per prediction head
  double arithm = 0.0, pdist = 0.0, pens = 0.0;
};

std::vector<ScaleMetrics> evaluate_multiscale(
    const Model& model, const std::vector<SyntheticSample>& test,
    const std::vector<double>& scales, int classes);

// Probability maps for one (already padded-compatible or arbitrary) sample
// at test scale s; outputs are cropped back to the rescaled image dims.
std::vector<Tensor> predict_probability_maps(const Model& model,
                                             const Tensor& image);

// Delta_s of the last trunk layer over the given scales. For the SEUNet the
// scale-matched variant re-realizes every filter at sigma * s; the plain CNN
// has no sigma to remap, so its variant is the extractor itself.
EquivarianceReport model_equivariance(const Model& model,
                                      const std::vector<SyntheticSample>& images,
                                      const std::vector<double>& scales);

// Edge-replicating pad of a [C,H,W] tensor up to multiples of `divisor`.
Tensor pad_to_multiple(const Tensor& image, int divisor);

}  // namespace seu
