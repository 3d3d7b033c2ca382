#include "dlk/pipeline.hpp"

#include <chrono>
#include <variant>

#include "dlk/kernels.hpp"
#include "dlk/oracle.hpp"

namespace dlk {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_input(const ModelSpec& model, const Grid2D& image) {
  validate_model(model);
  if (image.ydim() != model.input_height || image.xdim() != model.input_width) {
    throw ShapeError("image is " + std::to_string(image.ydim()) + "x" +
                     std::to_string(image.xdim()) + " but model '" + model.name +
                     "' expects " + std::to_string(model.input_height) + "x" +
                     std::to_string(model.input_width));
  }
}

Grid2D concat_rows(const std::vector<Grid2D>& maps) {
  std::size_t total = 0;
  for (const Grid2D& m : maps) total += m.size();
  Grid2D out(1, total);
  std::size_t at = 0;
  for (const Grid2D& m : maps) {
    for (const ComplexScalar& v : m.flat()) out[at++] = v;
  }
  return out;
}

std::string layer_label(const LayerSpec& layer, std::size_t index) {
  const char* kind = std::visit(overloaded{[](const ConvLayer&) { return "conv"; },
                                           [](const DenseLayer&) { return "dense"; },
                                           [](const SoftmaxLayer&) { return "softmax"; }},
                                layer);
  return kind + std::to_string(index + 1);
}

}  // namespace

std::pair<std::vector<float>, ForwardTrace> forward(const ModelSpec& model,
                                                    const Grid2D& image,
                                                    std::size_t workers) {
  check_input(model, image);
  if (workers == 0) throw ShapeError("worker count must be positive");

  ForwardTrace trace;
  Grid2D current = image;

  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Grid2D next = std::visit(
        overloaded{
            [&](const ConvLayer& layer) {
              std::vector<Grid2D> maps;
              maps.reserve(layer.filters.size());
              for (const ConvFilter& f : layer.filters) {
                ConvPoolConfig cfg{current,
                                   grid_from_reals(f.height, f.width, f.weights),
                                   f.bias, layer.pool};
                BufferSet out = run(conv_program(cfg), conv_buffers(cfg), workers);
                maps.push_back(out.at(layer.pool ? "pool" : "conv"));
              }
              // One filter keeps its 2-D map; several stack flattened in
              // filter order, each row-major.
              if (maps.size() == 1) return std::move(maps.front());
              return concat_rows(maps);
            },
            [&](const DenseLayer& layer) {
              AffineConfig cfg{grid_from_reals(layer.outputs, layer.inputs, layer.weights),
                               current.reals(), layer.bias};
              const bool fused_tanh = layer.activation == Activation::Tanh;
              BufferSet out = run(fused_tanh ? dense_tanh_program(cfg) : affine_program(cfg),
                                  affine_buffers(cfg), workers);
              Grid2D result = out.at("result");
              if (layer.activation == Activation::Relu) {
                BufferSet rectified =
                    run(relu_program(result.size()), relu_buffers(result), workers);
                result = rectified.at("out");
              }
              return result;
            },
            [&](const SoftmaxLayer& layer) {
              AffineConfig cfg{grid_from_reals(layer.classes, layer.inputs, layer.weights),
                               current.reals(), layer.bias};
              BufferSet out = run(softmax_program(cfg), softmax_buffers(cfg), workers);
              return out.at("softmax");
            },
        },
        model.layers[i]);
    const auto stop = std::chrono::steady_clock::now();
    current = std::move(next);
    trace.layers.push_back(
        {layer_label(model.layers[i], i), current,
         static_cast<std::uint64_t>(
             std::chrono::duration_cast<std::chrono::microseconds>(stop - start).count())});
  }

  return {current.reals(), std::move(trace)};
}

std::vector<float> forward_oracle(const ModelSpec& model, const Grid2D& image) {
  check_input(model, image);
  Grid2D current = image;

  for (const LayerSpec& spec : model.layers) {
    current = std::visit(
        overloaded{
            [&](const ConvLayer& layer) {
              std::vector<Grid2D> maps;
              maps.reserve(layer.filters.size());
              for (const ConvFilter& f : layer.filters) {
                Grid2D conv = oracle::conv_ref(
                    current, grid_from_reals(f.height, f.width, f.weights));
                maps.push_back(layer.pool ? oracle::pool_ref(conv, f.bias)
                                          : std::move(conv));
              }
              if (maps.size() == 1) return std::move(maps.front());
              return concat_rows(maps);
            },
            [&](const DenseLayer& layer) {
              const Grid2D X = grid_from_reals(layer.outputs, layer.inputs, layer.weights);
              std::vector<float> values;
              switch (layer.activation) {
                case Activation::Tanh:
                  values = oracle::dense_ref(X, current.reals(), layer.bias);
                  break;
                case Activation::None:
                  values = oracle::affine_ref(X, current.reals(), layer.bias);
                  break;
                case Activation::Relu: {
                  const auto affine = oracle::affine_ref(X, current.reals(), layer.bias);
                  values = oracle::relu_ref(affine);
                  break;
                }
              }
              return grid_from_reals(1, values.size(), values);
            },
            [&](const SoftmaxLayer& layer) {
              const Grid2D X = grid_from_reals(layer.classes, layer.inputs, layer.weights);
              const auto probs = oracle::softmax_ref(X, current.reals(), layer.bias);
              return grid_from_reals(1, probs.size(), probs);
            },
        },
        spec);
  }
  return current.reals();
}

std::size_t argmax_lowest(std::span<const float> values) {
  if (values.empty()) throw ShapeError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Classification classify(const ModelSpec& model, const Grid2D& image, std::size_t workers) {
  const auto [probs, trace] = forward(model, image, workers);
  const std::size_t label = argmax_lowest(probs);
  return {label, probs[label]};
}

}  // namespace dlk
