#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dlk/model.hpp"
#include "dlk/numerics.hpp"

namespace dlk {

// Per-layer record of a forward pass: the layer's output buffer (stacked
// feature maps flattened to one row when a conv layer has several filters)
// and its wall time.
struct LayerTrace {
  std::string name;
  Grid2D output;
  std::uint64_t micros = 0;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
};

// Runs every layer on the threadgroup executor and returns the final
// softmax distribution. Bit-identical for every worker count.
std::pair<std::vector<float>, ForwardTrace> forward(const ModelSpec& model,
                                                    const Grid2D& image,
                                                    std::size_t workers = 1);

// The same pass composed from the sequential oracle kernels.
std::vector<float> forward_oracle(const ModelSpec& model, const Grid2D& image);

struct Classification {
  std::size_t label = 0;
  float confidence = 0.0f;
};

// argmax of forward; ties break toward the lowest index.
Classification classify(const ModelSpec& model, const Grid2D& image,
                        std::size_t workers = 1);

std::size_t argmax_lowest(std::span<const float> values);

}  // namespace dlk
