#pragma once

// Differentiable tensor operations for the segmentation network.
// Every op optionally records its backward rule on a Tape; pass
// tape == nullptr for inference-only evaluation.

#include "seu/tensor.hpp"

namespace seu {

// Cross-correlation of a [C_in,H,W] input with a [C_out,C_in,tau,tau]
// weight, zero padding of (tau-1)/2, output [C_out,H,W].
Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& weight);

Tensor relu(Tape* tape, const Tensor& x);

// [C,H,W] -> [C,H/2,W/2]; ties broken by first index in row-major order.
Tensor maxpool2x2(Tape* tape, const Tensor& x);

// [C,H,W] -> [C,2H,2W], nearest neighbour.
Tensor upsample2x(Tape* tape, const Tensor& x);

// Concatenate along the channel axis; all inputs share H and W.
Tensor concat_channels(Tape* tape, const std::vector<Tensor>& xs);

// Per-pixel softmax over the channel axis of a [C,H,W] tensor.
Tensor softmax_channels(Tape* tape, const Tensor& logits);

// Mean over pixels of -sum_c y_c log(max(p_c, 1e-12)); target one-hot.
Tensor cross_entropy(Tape* tape, const Tensor& probs, const Tensor& target);

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& x, double k);
Tensor sum(Tape* tape, const Tensor& x);

// sum_k weights[k] * scalars[k]; weights is a vector tensor of matching length.
Tensor weighted_sum(Tape* tape, const Tensor& weights,
                    const std::vector<Tensor>& scalars);

}  // namespace seu
