#pragma once

// Fusion of the gamma per-head probability maps into one label map, and
// IoU metrics. All argmax ties break toward the lowest index.

#include <string>
#include <vector>

#include "seu/tensor.hpp"

namespace seu {

enum class FuseStrategy { kArithm, kPDist, kPEns };

FuseStrategy fuse_strategy_from_string(const std::string& s);

struct LabelMap {
  int h = 0, w = 0;
  std::vector<int> labels;  // row-major
};

// Per-pixel argmax of the head-averaged probabilities.
LabelMap fuse_arithm(const std::vector<Tensor>& maps);

// Per-pixel selection of the head with the largest top1-top2 margin.
LabelMap fuse_pdist(const std::vector<Tensor>& maps);

// Per-pixel softmax-of-margins weighted average, then argmax.
LabelMap fuse_pens(const std::vector<Tensor>& maps);

LabelMap fuse(const std::vector<Tensor>& maps, FuseStrategy strategy);

// Argmax labels of a single head.
LabelMap head_labels(const Tensor& map);

struct IoUResult {
  std::vector<double> per_class;   // NaN for classes absent from both maps
  std::vector<bool> present;
  double mean = 0.0;               // over present classes
};

IoUResult miou(const LabelMap& pred, const LabelMap& truth, int num_classes);

}  // namespace seu
