#include "dlk/oracle.hpp"

#include <cmath>

namespace dlk::oracle {

namespace {

void check_affine_shapes(const Grid2D& X, std::span<const float> w,
                         std::span<const float> b) {
  if (X.xdim() != w.size()) {
    throw ShapeError("weight matrix has " + std::to_string(X.xdim()) +
                     " columns but the input activation has " +
                     std::to_string(w.size()) + " elements");
  }
  if (X.ydim() != b.size()) {
    throw ShapeError("weight matrix has " + std::to_string(X.ydim()) +
                     " rows but the bias has " + std::to_string(b.size()) +
                     " elements");
  }
}

}  // namespace

Grid2D conv_ref(const Grid2D& image, const Grid2D& filter) {
  if (filter.ydim() > image.ydim() || filter.xdim() > image.xdim()) {
    throw ShapeError("filter " + std::to_string(filter.ydim()) + "x" +
                     std::to_string(filter.xdim()) + " does not fit in image " +
                     std::to_string(image.ydim()) + "x" + std::to_string(image.xdim()));
  }
  const std::size_t fy = filter.ydim();
  const std::size_t fx = filter.xdim();
  Grid2D out(image.ydim() - fy + 1, image.xdim() - fx + 1);
  for (std::size_t y = 0; y < out.ydim(); ++y) {
    for (std::size_t x = 0; x < out.xdim(); ++x) {
      float acc = 0.0f;
      for (std::size_t q = 0; q < fy; ++q) {
        for (std::size_t r = 0; r < fx; ++r) {
          acc += image.at(y + q, x + r).real * filter.at(fy - 1 - q, fx - 1 - r).real;
        }
      }
      out.at(y, x).real = acc;
    }
  }
  return out;
}

Grid2D pool_ref(const Grid2D& conv_out, float bias_B) {
  if (conv_out.ydim() % 2 != 0 || conv_out.xdim() % 2 != 0) {
    throw ShapeError("2x2 pooling needs even dims, got " +
                     std::to_string(conv_out.ydim()) + "x" +
                     std::to_string(conv_out.xdim()));
  }
  Grid2D out(conv_out.ydim() / 2, conv_out.xdim() / 2);
  for (std::size_t y = 0; y < out.ydim(); ++y) {
    for (std::size_t x = 0; x < out.xdim(); ++x) {
      const float v1 = std::fmax(conv_out.at(2 * y, 2 * x).real,
                                 conv_out.at(2 * y, 2 * x + 1).real);
      const float v2 = std::fmax(v1, conv_out.at(2 * y + 1, 2 * x).real);
      const float m = std::fmax(v2, conv_out.at(2 * y + 1, 2 * x + 1).real);
      out.at(y, x).real = tanh_f32(m + bias_B);
    }
  }
  return out;
}

std::vector<float> affine_ref(const Grid2D& X, std::span<const float> w,
                              std::span<const float> b) {
  check_affine_shapes(X, w, b);
  std::vector<float> out(b.size());
  for (std::size_t row = 0; row < X.ydim(); ++row) {
    float acc = b[row];
    for (std::size_t i = 0; i < X.xdim(); ++i) {
      acc += X.at(row, i).real * w[i];
    }
    out[row] = acc;
  }
  return out;
}

std::vector<float> dense_ref(const Grid2D& X, std::span<const float> w,
                             std::span<const float> b) {
  std::vector<float> out = affine_ref(X, w, b);
  for (float& v : out) v = tanh_f32(v);
  return out;
}

std::vector<float> softmax_ref(const Grid2D& X, std::span<const float> w,
                               std::span<const float> b) {
  std::vector<float> logits = affine_ref(X, w, b);
  const float peak = reduce_ref(logits, ReduceOp::Max);
  std::vector<float> e(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) e[i] = std::exp(logits[i] - peak);
  const float total = reduce_ref(e, ReduceOp::Sum);
  for (float& v : e) v /= total;
  return e;
}

std::vector<float> relu_ref(std::span<const float> values) {
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::fmax(values[i], 0.0f);
  return out;
}

float reduce_ref(std::span<const float> values, ReduceOp op) {
  if (values.empty()) throw ShapeError("reduction needs at least one element");
  float acc = values[0];
  for (std::size_t i = 1; i < values.size(); ++i) {
    acc = op == ReduceOp::Max ? std::fmax(acc, values[i]) : acc + values[i];
  }
  return acc;
}

}  // namespace dlk::oracle
