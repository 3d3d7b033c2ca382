#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dlk/errors.hpp"

namespace dlk {

// Scalar carried by every buffer. Kernels compute on `real` only; `imag`
// is storage that every operation preserves bit-exactly.
struct ComplexScalar {
  float real = 0.0f;
  float imag = 0.0f;
};

// 32-bit hyperbolic tangent, the activation used by the conv/pool and
// dense kernels. Saturates instead of erroring.
inline float tanh_f32(float x) { return std::tanh(x); }

// Row-major 2-D buffer of ComplexScalar. Element (y, x) lives at flat
// index y*xdim + x.
class Grid2D {
 public:
  Grid2D() = default;

  Grid2D(std::size_t ydim, std::size_t xdim) : ydim_(ydim), xdim_(xdim) {
    if (ydim == 0 || xdim == 0) {
      throw ShapeError("Grid2D dimensions must be positive, got " +
                       std::to_string(ydim) + "x" + std::to_string(xdim));
    }
    data_.resize(ydim * xdim);
  }

  std::size_t ydim() const { return ydim_; }
  std::size_t xdim() const { return xdim_; }
  std::size_t size() const { return data_.size(); }

  ComplexScalar& at(std::size_t y, std::size_t x) {
    check_yx(y, x);
    return data_[y * xdim_ + x];
  }
  const ComplexScalar& at(std::size_t y, std::size_t x) const {
    check_yx(y, x);
    return data_[y * xdim_ + x];
  }

  // Flat access, unchecked; executor-side access is bounds-checked there.
  ComplexScalar& operator[](std::size_t i) { return data_[i]; }
  const ComplexScalar& operator[](std::size_t i) const { return data_[i]; }

  std::span<ComplexScalar> flat() { return data_; }
  std::span<const ComplexScalar> flat() const { return data_; }

  // Flat read-back of the real parts, row-major.
  std::vector<float> reals() const {
    std::vector<float> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = data_[i].real;
    return out;
  }

 private:
  void check_yx(std::size_t y, std::size_t x) const {
    if (y >= ydim_ || x >= xdim_) {
      throw ShapeError("Grid2D access (" + std::to_string(y) + ", " +
                       std::to_string(x) + ") outside " + std::to_string(ydim_) +
                       "x" + std::to_string(xdim_));
    }
  }

  std::size_t ydim_ = 0;
  std::size_t xdim_ = 0;
  std::vector<ComplexScalar> data_;
};

// Builds a grid from row-major real values; imaginary parts are zero.
Grid2D grid_from_reals(std::size_t ydim, std::size_t xdim,
                       std::span<const float> values);

}  // namespace dlk
