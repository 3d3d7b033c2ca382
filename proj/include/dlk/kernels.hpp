#pragma once

#include <span>
#include <string>
#include <vector>

#include "dlk/executor.hpp"
#include "dlk/numerics.hpp"

namespace dlk {

// Valid (unpadded, unstrided) convolution with a flipped filter, plus the
// optional fused 2x2 max-pool + tanh phase that runs after the barrier.
//
// conv_program binds buffers: "image", "filter", "conv" and, when pool is
// set, "pool". conv_buffers builds that set with zeroed outputs.
struct ConvPoolConfig {
  Grid2D image;
  Grid2D filter;
  float bias_B = 0.0f;
  bool pool = false;

  std::size_t conv_ydim() const { return image.ydim() - filter.ydim() + 1; }
  std::size_t conv_xdim() const { return image.xdim() - filter.xdim() + 1; }
  std::size_t pool_ydim() const { return conv_ydim() / 2; }
  std::size_t pool_xdim() const { return conv_xdim() / 2; }
};

ThreadgroupProgram conv_program(const ConvPoolConfig& cfg);
BufferSet conv_buffers(const ConvPoolConfig& cfg);

// The fused pool phase on its own: threads at even (y, x) reduce their 2x2
// window of "conv" and write tanh(max + bias_B) into "pool". Requires even
// conv dims.
Phase maxpool_tanh_phase(const ConvPoolConfig& cfg);

// One affine layer: X is the weight matrix with one row per output and w
// is the shared input activation. result[id] = b[id] + sum_i X(id,i)*w[i].
//
// Affine-family programs bind "X", "w", "b", "result"; softmax_program
// additionally binds "softmax", "array_sum" and "shared_max".
struct AffineConfig {
  Grid2D X;               // result_count x x_xdim
  std::vector<float> w;   // length x_xdim
  std::vector<float> b;   // length result_count

  std::size_t result_count() const { return X.ydim(); }
  std::size_t x_xdim() const { return X.xdim(); }
};

// Affine followed by tanh in the same phase.
ThreadgroupProgram dense_tanh_program(const AffineConfig& cfg);
// Affine with no activation; compose with relu_program for a rectified layer.
ThreadgroupProgram affine_program(const AffineConfig& cfg);
BufferSet affine_buffers(const AffineConfig& cfg);

// Element-wise rectifier over buffers "in" -> "out".
ThreadgroupProgram relu_program(std::size_t n);
BufferSet relu_buffers(const Grid2D& in);

// Affine, then a numerically-stable softmax over the outputs: recursive-
// doubling max reduction, exp(result - max), recursive-doubling sum
// reduction, normalization. The distribution lands in "softmax".
ThreadgroupProgram softmax_program(const AffineConfig& cfg);
BufferSet softmax_buffers(const AffineConfig& cfg);

enum class ReduceOp { Max, Sum };

// Appends the recursive-doubling phases that reduce buffer[0..n) in place:
// for stride i = 2, 4, ..., bit_ceil(n), thread id with id % i == 0 and
// id + i/2 < n combines cells id and id + i/2. Missing partners past the
// end contribute the identity, so after the last stride cell 0 holds the
// reduction for any n >= 1.
void append_reduce_tree_phases(ThreadgroupProgram& program, std::string buffer,
                               std::size_t n, ReduceOp op, const std::string& name_prefix);

// Standalone tree reduction of `values`, run on the executor.
ThreadgroupProgram reduce_tree_program(std::size_t n, ReduceOp op);
BufferSet reduce_tree_buffers(std::span<const float> values);
float reduce_tree(std::span<const float> values, ReduceOp op);

}  // namespace dlk
