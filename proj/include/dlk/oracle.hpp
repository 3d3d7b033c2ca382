#pragma once

#include <span>
#include <vector>

#include "dlk/kernels.hpp"
#include "dlk/numerics.hpp"

// Sequential scalar references for every kernel. conv_ref mirrors the
// kernel's accumulation order per output cell, so it matches bit-exactly;
// the reductions run in natural linear order instead of the tree, so
// softmax_ref and reduce_ref(Sum) agree only within reassociation
// tolerance. Deliberately naive, used as ground truth by tests and the
// oracle-diff command.
namespace dlk::oracle {

Grid2D conv_ref(const Grid2D& image, const Grid2D& filter);
Grid2D pool_ref(const Grid2D& conv_out, float bias_B);

std::vector<float> affine_ref(const Grid2D& X, std::span<const float> w,
                              std::span<const float> b);
std::vector<float> dense_ref(const Grid2D& X, std::span<const float> w,
                             std::span<const float> b);
std::vector<float> softmax_ref(const Grid2D& X, std::span<const float> w,
                               std::span<const float> b);
std::vector<float> relu_ref(std::span<const float> values);

float reduce_ref(std::span<const float> values, ReduceOp op);

}  // namespace dlk::oracle
