#pragma once

// Synthetic multi-scale segmentation data. "blobs" is a nuclei-like binary
// task; "regions" is a 5-class task where classes differ by texture
// wavelength, so test-time rescaling shifts class appearance and scale
// structure actually matters.

#include <random>
#include <string>
#include <vector>

#include "seu/tensor.hpp"

namespace seu {

struct SyntheticSample {
  Tensor image;             // [1, H, W], values in [0, 1]
  std::vector<int> mask;    // row-major H*W class labels
  int h = 0, w = 0;
};

struct DatasetSpec {
  std::string generator = "regions";  // "blobs" | "regions"
  int image_size = 64;
  int train_samples = 200;
  int test_samples = 50;
  int classes = 5;  // forced to 2 for "blobs"
};

struct Dataset {
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> test;
  int classes = 2;
};

Dataset generate_dataset(const DatasetSpec& spec, unsigned seed);

// One-hot [classes, H, W] target from a label mask.
Tensor one_hot(const std::vector<int>& mask, int h, int w, int classes);

}  // namespace seu
