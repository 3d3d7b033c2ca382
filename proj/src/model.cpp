#include "dlk/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace dlk {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

const json& require_field(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError("at " + path + ": missing field '" + key + "'");
  }
  return *it;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& path) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (item.key() == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw SchemaError("at " + path + ": unknown field '" + item.key() + "'");
    }
  }
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError("at " + path + ": expected an object");
}

std::size_t get_count(const json& obj, const char* key, const std::string& path) {
  const json& v = require_field(obj, key, path);
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    throw SchemaError("at " + path + "." + key + ": expected a positive integer, got " +
                      v.dump());
  }
  return v.get<std::size_t>();
}

float get_weight(const json& v, const std::string& path) {
  if (!v.is_number()) {
    throw SchemaError("at " + path + ": expected a number, got " + v.dump());
  }
  const float f = static_cast<float>(v.get<double>());
  if (!std::isfinite(f)) {
    throw ValueError("at " + path + ": " + v.dump() + " is not finite as a 32-bit float");
  }
  return f;
}

std::vector<float> get_weight_array(const json& obj, const char* key,
                                    std::size_t expected, const std::string& path) {
  const json& arr = require_field(obj, key, path);
  const std::string p = path + "." + key;
  if (!arr.is_array()) throw SchemaError("at " + p + ": expected an array of numbers");
  if (arr.size() != expected) {
    throw SchemaError("at " + p + ": expected " + std::to_string(expected) +
                      " numbers, got " + std::to_string(arr.size()));
  }
  std::vector<float> out;
  out.reserve(arr.size());
  std::size_t i = 0;
  for (const json& v : arr) {
    out.push_back(get_weight(v, p + "[" + std::to_string(i) + "]"));
    ++i;
  }
  return out;
}

Activation parse_activation(const json& v, const std::string& path) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "none") return Activation::None;
  }
  throw SchemaError("at " + path + ": expected \"tanh\", \"relu\" or \"none\", got " +
                    v.dump());
}

ConvLayer parse_conv(const json& obj, const std::string& path) {
  reject_unknown(obj, {"type", "filters", "pool"}, path);
  const json& filters = require_field(obj, "filters", path);
  if (!filters.is_array() || filters.empty()) {
    throw SchemaError("at " + path + ".filters: expected a non-empty array");
  }
  ConvLayer layer;
  std::size_t i = 0;
  for (const json& f : filters) {
    const std::string fp = path + ".filters[" + std::to_string(i) + "]";
    expect_object(f, fp);
    reject_unknown(f, {"height", "width", "bias", "weights"}, fp);
    ConvFilter filter;
    filter.height = get_count(f, "height", fp);
    filter.width = get_count(f, "width", fp);
    filter.bias = get_weight(require_field(f, "bias", fp), fp + ".bias");
    filter.weights = get_weight_array(f, "weights", filter.height * filter.width, fp);
    layer.filters.push_back(std::move(filter));
    ++i;
  }
  if (auto it = obj.find("pool"); it != obj.end()) {
    const std::string pp = path + ".pool";
    expect_object(*it, pp);
    reject_unknown(*it, {"size", "activation"}, pp);
    if (get_count(*it, "size", pp) != 2) {
      throw SchemaError("at " + pp + ".size: only 2x2 pooling is supported");
    }
    const json& act = require_field(*it, "activation", pp);
    if (!act.is_string() || act.get<std::string>() != "tanh") {
      throw SchemaError("at " + pp + ".activation: only \"tanh\" is supported, got " +
                        act.dump());
    }
    layer.pool = true;
  }
  return layer;
}

DenseLayer parse_dense(const json& obj, const std::string& path) {
  reject_unknown(obj, {"type", "inputs", "outputs", "activation", "weights", "bias"}, path);
  DenseLayer layer;
  layer.inputs = get_count(obj, "inputs", path);
  layer.outputs = get_count(obj, "outputs", path);
  layer.activation = parse_activation(require_field(obj, "activation", path),
                                      path + ".activation");
  layer.weights = get_weight_array(obj, "weights", layer.inputs * layer.outputs, path);
  layer.bias = get_weight_array(obj, "bias", layer.outputs, path);
  return layer;
}

SoftmaxLayer parse_softmax(const json& obj, const std::string& path) {
  reject_unknown(obj, {"type", "inputs", "classes", "weights", "bias"}, path);
  SoftmaxLayer layer;
  layer.inputs = get_count(obj, "inputs", path);
  layer.classes = get_count(obj, "classes", path);
  layer.weights = get_weight_array(obj, "weights", layer.inputs * layer.classes, path);
  layer.bias = get_weight_array(obj, "bias", layer.classes, path);
  return layer;
}

// Emits the double whose JSON text is the shortest decimal naming this
// float; parsing that text back and narrowing recovers the float exactly.
double json_number_for(float f) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), f);
  double d = 0.0;
  std::from_chars(buf, res.ptr, d);
  if (static_cast<float>(d) == f) return d;
  return static_cast<double>(f);
}

json weights_json(const std::vector<float>& weights) {
  json arr = json::array();
  for (float v : weights) arr.push_back(json_number_for(v));
  return arr;
}

void check_finite(const std::vector<float>& weights, const std::string& path) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i])) {
      throw ValueError("at " + path + "[" + std::to_string(i) + "]: weight is not finite");
    }
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\n\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\n\r");
  return s.substr(b, e - b + 1);
}

// "5x5" or "1x5x5" -> parts, all positive.
std::vector<std::size_t> parse_dims(const std::string& token, std::size_t expected,
                                    const std::string& context) {
  std::vector<std::size_t> parts;
  std::size_t pos = 0;
  while (pos <= token.size()) {
    const std::size_t next = token.find('x', pos);
    const std::string digits =
        token.substr(pos, next == std::string::npos ? next : next - pos);
    std::size_t value = 0;
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (res.ec != std::errc() || res.ptr != digits.data() + digits.size() || value == 0) {
      throw ParseError("topology: bad dimension '" + token + "' in '" + context + "'");
    }
    parts.push_back(value);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (parts.size() != expected) {
    throw ParseError("topology: '" + token + "' in '" + context + "' needs " +
                     std::to_string(expected) + " dimensions");
  }
  return parts;
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::None: return "none";
  }
  throw InternalError("unreachable activation");
}

ActivationShape input_shape(const ModelSpec& spec) {
  return {true, spec.input_height, spec.input_width,
          spec.input_height * spec.input_width};
}

ActivationShape layer_output_shape(const ActivationShape& in, const LayerSpec& layer,
                                   std::size_t index) {
  const std::string at = "layers[" + std::to_string(index) + "]";
  return std::visit(
      overloaded{
          [&](const ConvLayer& conv) -> ActivationShape {
            if (!in.is_2d) {
              throw ShapeError(at + ": conv needs a 2-D input, but the previous layer " +
                               "produces a flat vector of " + std::to_string(in.flat));
            }
            if (conv.filters.empty()) {
              throw SchemaError("at " + at + ".filters: expected a non-empty array");
            }
            ActivationShape single{};
            std::size_t total = 0;
            for (std::size_t f = 0; f < conv.filters.size(); ++f) {
              const ConvFilter& cf = conv.filters[f];
              const std::string fat = at + ".filters[" + std::to_string(f) + "]";
              if (cf.height == 0 || cf.width == 0) {
                throw ShapeError(fat + ": filter dims must be positive");
              }
              if (cf.height > in.height || cf.width > in.width) {
                throw ShapeError(fat + ": filter " + std::to_string(cf.height) + "x" +
                                 std::to_string(cf.width) + " does not fit in input " +
                                 std::to_string(in.height) + "x" +
                                 std::to_string(in.width));
              }
              std::size_t ch = in.height - cf.height + 1;
              std::size_t cw = in.width - cf.width + 1;
              if (conv.pool) {
                if (ch % 2 != 0 || cw % 2 != 0) {
                  throw ShapeError(fat + ": 2x2 pooling needs even conv output dims, got " +
                                   std::to_string(ch) + "x" + std::to_string(cw));
                }
                ch /= 2;
                cw /= 2;
              }
              single = {true, ch, cw, ch * cw};
              total += ch * cw;
            }
            if (conv.filters.size() == 1) return single;
            return {false, 0, 0, total};
          },
          [&](const DenseLayer& dense) -> ActivationShape {
            if (dense.inputs != in.flat) {
              throw ShapeError(at + ": dense declares " + std::to_string(dense.inputs) +
                               " inputs but the previous layer produces " +
                               std::to_string(in.flat));
            }
            return {false, 0, 0, dense.outputs};
          },
          [&](const SoftmaxLayer& softmax) -> ActivationShape {
            if (softmax.inputs != in.flat) {
              throw ShapeError(at + ": softmax declares " + std::to_string(softmax.inputs) +
                               " inputs but the previous layer produces " +
                               std::to_string(in.flat));
            }
            return {false, 0, 0, softmax.classes};
          },
      },
      layer);
}

void validate_model(const ModelSpec& spec) {
  if (spec.name.empty()) throw SchemaError("at $.name: expected a non-empty string");
  if (spec.input_height == 0 || spec.input_width == 0) {
    throw ShapeError("at $.input: dims must be positive, got " +
                     std::to_string(spec.input_height) + "x" +
                     std::to_string(spec.input_width));
  }
  if (spec.layers.empty()) throw SchemaError("at $.layers: expected a non-empty array");

  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::string at = "$.layers[" + std::to_string(i) + "]";
    std::visit(
        overloaded{
            [&](const ConvLayer& conv) {
              for (std::size_t f = 0; f < conv.filters.size(); ++f) {
                const ConvFilter& cf = conv.filters[f];
                const std::string fat = at + ".filters[" + std::to_string(f) + "]";
                if (cf.weights.size() != cf.height * cf.width) {
                  throw SchemaError("at " + fat + ".weights: expected " +
                                    std::to_string(cf.height * cf.width) +
                                    " numbers, got " + std::to_string(cf.weights.size()));
                }
                check_finite(cf.weights, fat + ".weights");
                if (!std::isfinite(cf.bias)) {
                  throw ValueError("at " + fat + ".bias: weight is not finite");
                }
              }
            },
            [&](const DenseLayer& dense) {
              if (dense.weights.size() != dense.inputs * dense.outputs) {
                throw SchemaError("at " + at + ".weights: expected " +
                                  std::to_string(dense.inputs * dense.outputs) +
                                  " numbers, got " + std::to_string(dense.weights.size()));
              }
              if (dense.bias.size() != dense.outputs) {
                throw SchemaError("at " + at + ".bias: expected " +
                                  std::to_string(dense.outputs) + " numbers, got " +
                                  std::to_string(dense.bias.size()));
              }
              check_finite(dense.weights, at + ".weights");
              check_finite(dense.bias, at + ".bias");
            },
            [&](const SoftmaxLayer& softmax) {
              if (softmax.weights.size() != softmax.inputs * softmax.classes) {
                throw SchemaError("at " + at + ".weights: expected " +
                                  std::to_string(softmax.inputs * softmax.classes) +
                                  " numbers, got " + std::to_string(softmax.weights.size()));
              }
              if (softmax.bias.size() != softmax.classes) {
                throw SchemaError("at " + at + ".bias: expected " +
                                  std::to_string(softmax.classes) + " numbers, got " +
                                  std::to_string(softmax.bias.size()));
              }
              check_finite(softmax.weights, at + ".weights");
              check_finite(softmax.bias, at + ".bias");
            },
        },
        spec.layers[i]);
  }

  ActivationShape shape = input_shape(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    shape = layer_output_shape(shape, spec.layers[i], i);
  }
  if (!std::holds_alternative<SoftmaxLayer>(spec.layers.back())) {
    throw ShapeError("layers[" + std::to_string(spec.layers.size() - 1) +
                     "]: the final layer must be softmax");
  }
}

ModelSpec load_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  expect_object(doc, "$");
  reject_unknown(doc, {"name", "input", "layers"}, "$");

  ModelSpec spec;
  const json& name = require_field(doc, "name", "$");
  if (!name.is_string() || name.get<std::string>().empty()) {
    throw SchemaError("at $.name: expected a non-empty string");
  }
  spec.name = name.get<std::string>();

  const json& input = require_field(doc, "input", "$");
  expect_object(input, "$.input");
  reject_unknown(input, {"height", "width"}, "$.input");
  spec.input_height = get_count(input, "height", "$.input");
  spec.input_width = get_count(input, "width", "$.input");

  const json& layers = require_field(doc, "layers", "$");
  if (!layers.is_array() || layers.empty()) {
    throw SchemaError("at $.layers: expected a non-empty array");
  }
  std::size_t i = 0;
  for (const json& layer : layers) {
    const std::string path = "$.layers[" + std::to_string(i) + "]";
    expect_object(layer, path);
    const json& type = require_field(layer, "type", path);
    if (!type.is_string()) {
      throw SchemaError("at " + path + ".type: expected a string");
    }
    const std::string kind = type.get<std::string>();
    if (kind == "conv") {
      spec.layers.emplace_back(parse_conv(layer, path));
    } else if (kind == "dense") {
      spec.layers.emplace_back(parse_dense(layer, path));
    } else if (kind == "softmax") {
      spec.layers.emplace_back(parse_softmax(layer, path));
    } else {
      throw SchemaError("at " + path + ".type: unknown layer type \"" + kind + "\"");
    }
    ++i;
  }

  validate_model(spec);
  return spec;
}

ModelSpec load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return load_model(text.str());
}

std::string save_model(const ModelSpec& spec) {
  validate_model(spec);
  json doc;
  doc["name"] = spec.name;
  doc["input"] = {{"height", spec.input_height}, {"width", spec.input_width}};
  json layers = json::array();
  for (const LayerSpec& layer : spec.layers) {
    layers.push_back(std::visit(
        overloaded{
            [](const ConvLayer& conv) {
              json j;
              j["type"] = "conv";
              json filters = json::array();
              for (const ConvFilter& f : conv.filters) {
                json jf;
                jf["height"] = f.height;
                jf["width"] = f.width;
                jf["bias"] = json_number_for(f.bias);
                jf["weights"] = weights_json(f.weights);
                filters.push_back(std::move(jf));
              }
              j["filters"] = std::move(filters);
              if (conv.pool) j["pool"] = {{"size", 2}, {"activation", "tanh"}};
              return j;
            },
            [](const DenseLayer& dense) {
              json j;
              j["type"] = "dense";
              j["inputs"] = dense.inputs;
              j["outputs"] = dense.outputs;
              j["activation"] = activation_name(dense.activation);
              j["weights"] = weights_json(dense.weights);
              j["bias"] = weights_json(dense.bias);
              return j;
            },
            [](const SoftmaxLayer& softmax) {
              json j;
              j["type"] = "softmax";
              j["inputs"] = softmax.inputs;
              j["classes"] = softmax.classes;
              j["weights"] = weights_json(softmax.weights);
              j["bias"] = weights_json(softmax.bias);
              return j;
            },
        },
        layer));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(2) + "\n";
}

void save_model_file(const ModelSpec& spec, const std::filesystem::path& path) {
  const std::string text = save_model(spec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing model file '" + path.string() + "'");
}

TopologySpec parse_topology(const std::string& text) {
  std::vector<std::string> segments;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find(';', pos);
    segments.push_back(trim(text.substr(pos, next == std::string::npos ? next : next - pos)));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  while (!segments.empty() && segments.back().empty()) segments.pop_back();
  if (segments.empty()) throw ParseError("topology: empty description");

  TopologySpec topo;
  const auto input = parse_dims(segments[0], 2, segments[0]);
  topo.input_height = input[0];
  topo.input_width = input[1];

  for (std::size_t i = 1; i < segments.size(); ++i) {
    const std::string& seg = segments[i];
    std::istringstream ss(seg);
    std::string kind;
    ss >> kind;
    if (kind == "conv") {
      std::string dims;
      if (!(ss >> dims)) throw ParseError("topology: conv needs FxHxW in '" + seg + "'");
      const auto parts = parse_dims(dims, 3, seg);
      TopologyConv conv{parts[0], parts[1], parts[2], false};
      std::string tail;
      if (ss >> tail) {
        if (tail != "pool") throw ParseError("topology: unexpected '" + tail + "' in '" + seg + "'");
        conv.pool = true;
      }
      topo.layers.emplace_back(conv);
    } else if (kind == "dense") {
      std::size_t units = 0;
      if (!(ss >> units) || units == 0) {
        throw ParseError("topology: dense needs a positive unit count in '" + seg + "'");
      }
      TopologyDense dense{units, Activation::Tanh};
      std::string act;
      if (ss >> act) {
        if (act == "tanh") dense.activation = Activation::Tanh;
        else if (act == "relu") dense.activation = Activation::Relu;
        else if (act == "none") dense.activation = Activation::None;
        else throw ParseError("topology: unknown activation '" + act + "' in '" + seg + "'");
      }
      topo.layers.emplace_back(dense);
    } else if (kind == "softmax") {
      std::size_t classes = 0;
      if (!(ss >> classes) || classes == 0) {
        throw ParseError("topology: softmax needs a positive class count in '" + seg + "'");
      }
      topo.layers.emplace_back(TopologySoftmax{classes});
    } else {
      throw ParseError("topology: unknown layer kind '" + kind + "' in '" + seg + "'");
    }
    std::string rest;
    if (ss >> rest) throw ParseError("topology: unexpected '" + rest + "' in '" + seg + "'");
  }
  return topo;
}

ModelSpec generate_random_model(std::uint64_t seed, const TopologySpec& topology) {
  std::mt19937_64 eng(seed);
  // Top 24 bits of each draw, mapped onto [-0.5, 0.5). Implementation-
  // defined distributions are avoided so the bytes are stable everywhere.
  auto next = [&eng]() {
    return static_cast<float>(eng() >> 40) * 0x1p-24f - 0.5f;
  };
  auto fill = [&next](std::size_t count) {
    std::vector<float> values(count);
    for (float& v : values) v = next();
    return values;
  };

  ModelSpec spec;
  spec.name = "random-" + std::to_string(seed);
  spec.input_height = topology.input_height;
  spec.input_width = topology.input_width;
  if (spec.input_height == 0 || spec.input_width == 0) {
    throw ShapeError("topology input dims must be positive");
  }

  ActivationShape shape = input_shape(spec);
  for (std::size_t i = 0; i < topology.layers.size(); ++i) {
    std::visit(
        overloaded{
            [&](const TopologyConv& conv) {
              ConvLayer layer;
              layer.pool = conv.pool;
              for (std::size_t f = 0; f < conv.filters; ++f) {
                layer.filters.push_back(
                    {conv.height, conv.width, fill(conv.height * conv.width), next()});
              }
              spec.layers.emplace_back(std::move(layer));
            },
            [&](const TopologyDense& dense) {
              DenseLayer layer;
              layer.inputs = shape.flat;
              layer.outputs = dense.units;
              layer.activation = dense.activation;
              layer.weights = fill(layer.inputs * layer.outputs);
              layer.bias = fill(layer.outputs);
              spec.layers.emplace_back(std::move(layer));
            },
            [&](const TopologySoftmax& softmax) {
              SoftmaxLayer layer;
              layer.inputs = shape.flat;
              layer.classes = softmax.classes;
              layer.weights = fill(layer.inputs * layer.classes);
              layer.bias = fill(layer.classes);
              spec.layers.emplace_back(std::move(layer));
            },
        },
        topology.layers[i]);
    shape = layer_output_shape(shape, spec.layers.back(), i);
  }
  validate_model(spec);
  return spec;
}

}  // namespace dlk
