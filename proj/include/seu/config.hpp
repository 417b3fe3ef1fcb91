#pragma once

// Experiment configuration: a flat key = value document. Unknown keys are
// rejected so typos fail loudly.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "seu/data.hpp"
#include "seu/filter_bank.hpp"

namespace seu {

// Exit code 2 at the CLI boundary.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exit code 3 at the CLI boundary (NaN loss, diverged training, ...).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint version/corruption problems.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  unsigned seed = 0;
  std::string model = "seunet";  // "seunet" | "cnn"
  int gamma = 5;
  int order = 1;
  std::string sigma_mode = "constrained";
  std::vector<int> channels = {15, 30, 60, 120};
  int classes = 5;
  int in_channels = 1;

  DatasetSpec dataset;

  int epochs = 30;
  int batch_size = 8;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;

  std::vector<double> test_scales;  // empty -> 17-point 2^(1/4) grid
  std::string checkpoint_out = "model.ckpt";

  // Optional per-layer overrides of the default sigma schedule, keyed by
  // conv layer index; each entry holds gamma intervals.
  std::map<int, std::vector<SigmaInterval>> sigma_bounds;

  int depth() const { return static_cast<int>(channels.size()) - 1; }
  void validate() const;
};

// 0.25 .. 4 in ratio 2^(1/4) steps, 17 values.
std::vector<double> default_test_scales();

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_text(const ExperimentConfig& cfg);

}  // namespace seu
