#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "dlk/errors.hpp"

namespace dlk {

enum class Activation { Tanh, Relu, None };

std::string activation_name(Activation a);

// One convolution filter and its fused-pool bias B; a layer with several
// filters produces one feature map per filter.
struct ConvFilter {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> weights;  // row-major height*width
  float bias = 0.0f;

  friend bool operator==(const ConvFilter&, const ConvFilter&) = default;
};

struct ConvLayer {
  std::vector<ConvFilter> filters;
  bool pool = false;  // fused 2x2 max-pool + tanh after the convolution

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  Activation activation = Activation::Tanh;
  std::vector<float> weights;  // row-major outputs x inputs
  std::vector<float> bias;     // length outputs

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct SoftmaxLayer {
  std::size_t inputs = 0;
  std::size_t classes = 0;
  std::vector<float> weights;  // row-major classes x inputs
  std::vector<float> bias;     // length classes

  friend bool operator==(const SoftmaxLayer&, const SoftmaxLayer&) = default;
};

using LayerSpec = std::variant<ConvLayer, DenseLayer, SoftmaxLayer>;

// Validated in-memory form of a `.dlk.json` model file.
struct ModelSpec {
  std::string name;
  std::size_t input_height = 0;
  std::size_t input_width = 0;
  std::vector<LayerSpec> layers;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Shape of the activation flowing between layers: 2-D right after the
// input or a single-filter conv, flat otherwise.
struct ActivationShape {
  bool is_2d = false;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t flat = 0;
};

// Output shape of layer `index`; also used by the pipeline to size buffers.
ActivationShape input_shape(const ModelSpec& spec);
ActivationShape layer_output_shape(const ActivationShape& in, const LayerSpec& layer,
                                   std::size_t index);

// Checks every invariant: positive dims, exact weight lengths, finite
// weights, layer-to-layer shape chaining, even conv dims under pooling,
// and a final softmax layer.
void validate_model(const ModelSpec& spec);

// Parses and fully validates a JSON model document. Throws ParseError,
// SchemaError (path-qualified), ShapeError or ValueError.
ModelSpec load_model(const std::string& text);
ModelSpec load_model_file(const std::filesystem::path& path);

// Serializes a valid spec; load_model(save_model(s)) == s, weights included
// bit for bit. Output bytes are deterministic.
std::string save_model(const ModelSpec& spec);
void save_model_file(const ModelSpec& spec, const std::filesystem::path& path);

// Layer plan for the random-model generator.
struct TopologyConv {
  std::size_t filters = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  bool pool = false;
};
struct TopologyDense {
  std::size_t units = 0;
  Activation activation = Activation::Tanh;
};
struct TopologySoftmax {
  std::size_t classes = 0;
};
using TopologyLayer = std::variant<TopologyConv, TopologyDense, TopologySoftmax>;

struct TopologySpec {
  std::size_t input_height = 0;
  std::size_t input_width = 0;
  std::vector<TopologyLayer> layers;
};

// Grammar: "28x28; conv 1x5x5 pool; dense 64 tanh; softmax 10" — layers
// separated by ';', first entry the input size. dense takes an optional
// activation (tanh, relu, none; default tanh), conv an optional "pool".
TopologySpec parse_topology(const std::string& text);

// Deterministic per seed; weights and biases uniform in [-0.5, 0.5).
ModelSpec generate_random_model(std::uint64_t seed, const TopologySpec& topology);

}  // namespace dlk
