#include "dlk/kernels.hpp"

#include <bit>
#include <cmath>

namespace dlk {

namespace {

void validate_conv(const ConvPoolConfig& cfg) {
  if (cfg.filter.ydim() > cfg.image.ydim() || cfg.filter.xdim() > cfg.image.xdim()) {
    throw ShapeError("filter " + std::to_string(cfg.filter.ydim()) + "x" +
                     std::to_string(cfg.filter.xdim()) + " does not fit in image " +
                     std::to_string(cfg.image.ydim()) + "x" +
                     std::to_string(cfg.image.xdim()));
  }
  if (cfg.pool && (cfg.conv_ydim() % 2 != 0 || cfg.conv_xdim() % 2 != 0)) {
    throw ShapeError("2x2 pooling needs even convolution output dims, got " +
                     std::to_string(cfg.conv_ydim()) + "x" +
                     std::to_string(cfg.conv_xdim()));
  }
}

void validate_affine(const AffineConfig& cfg) {
  if (cfg.X.xdim() != cfg.w.size()) {
    throw ShapeError("weight matrix has " + std::to_string(cfg.X.xdim()) +
                     " columns but the input activation has " +
                     std::to_string(cfg.w.size()) + " elements");
  }
  if (cfg.X.ydim() != cfg.b.size()) {
    throw ShapeError("weight matrix has " + std::to_string(cfg.X.ydim()) +
                     " rows but the bias has " + std::to_string(cfg.b.size()) +
                     " elements");
  }
}

// result[id] = b[id] + sum_i X[id*x_xdim + i] * w[i], ascending i.
WriteRecord affine_write(std::size_t id, const PhaseView& shared, std::size_t x_xdim) {
  float acc = shared.read("b", id);
  for (std::size_t i = 0; i < x_xdim; ++i) {
    acc += shared.read("X", id * x_xdim + i) * shared.read("w", i);
  }
  return {"result", id, acc};
}

Phase affine_phase(const AffineConfig& cfg, bool fuse_tanh) {
  const std::size_t x_xdim = cfg.x_xdim();
  return {fuse_tanh ? "dense" : "affine",
          [x_xdim, fuse_tanh](std::size_t id, const PhaseView& shared) {
            WriteRecord rec = affine_write(id, shared, x_xdim);
            if (fuse_tanh) rec.value = tanh_f32(rec.value);
            return std::vector<WriteRecord>{rec};
          }};
}

}  // namespace

ThreadgroupProgram conv_program(const ConvPoolConfig& cfg) {
  validate_conv(cfg);
  const std::size_t conv_xdim = cfg.conv_xdim();
  const std::size_t image_xdim = cfg.image.xdim();
  const std::size_t filter_ydim = cfg.filter.ydim();
  const std::size_t filter_xdim = cfg.filter.xdim();

  ThreadgroupProgram program;
  program.thread_count = cfg.conv_ydim() * conv_xdim;
  program.add_phase("conv", [=](std::size_t id, const PhaseView& shared) {
    const std::size_t y = id / conv_xdim;
    const std::size_t x = id % conv_xdim;
    float acc = 0.0f;
    for (std::size_t q = 0; q < filter_ydim; ++q) {
      const std::size_t mm = filter_ydim - 1 - q;  // flipped filter row
      for (std::size_t r = 0; r < filter_xdim; ++r) {
        const std::size_t nn = filter_xdim - 1 - r;
        const std::size_t ii = y + q;
        const std::size_t jj = x + r;
        acc += shared.read("image", ii * image_xdim + jj) *
               shared.read("filter", mm * filter_xdim + nn);
      }
    }
    return std::vector<WriteRecord>{{"conv", id, acc}};
  });
  if (cfg.pool) program.phases.push_back(maxpool_tanh_phase(cfg));
  return program;
}

Phase maxpool_tanh_phase(const ConvPoolConfig& cfg) {
  validate_conv(cfg);
  if (cfg.conv_ydim() % 2 != 0 || cfg.conv_xdim() % 2 != 0) {
    throw ShapeError("2x2 pooling needs even convolution output dims, got " +
                     std::to_string(cfg.conv_ydim()) + "x" +
                     std::to_string(cfg.conv_xdim()));
  }
  const std::size_t conv_xdim = cfg.conv_xdim();
  const std::size_t pool_xdim = cfg.pool_xdim();
  const float bias = cfg.bias_B;
  return {"pool", [=](std::size_t id, const PhaseView& shared) {
            const std::size_t y = id / conv_xdim;
            const std::size_t x = id % conv_xdim;
            if (y % 2 != 0 || x % 2 != 0) return std::vector<WriteRecord>{};
            const std::size_t pool_pos = (y / 2) * pool_xdim + (x / 2);
            const float v1 = std::fmax(shared.read("conv", id), shared.read("conv", id + 1));
            const float v2 = std::fmax(v1, shared.read("conv", id + conv_xdim));
            const float max_pool_value =
                std::fmax(v2, shared.read("conv", id + conv_xdim + 1));
            return std::vector<WriteRecord>{
                {"pool", pool_pos, tanh_f32(max_pool_value + bias)}};
          }};
}

BufferSet conv_buffers(const ConvPoolConfig& cfg) {
  validate_conv(cfg);
  BufferSet buffers;
  buffers.add("image", cfg.image);
  buffers.add("filter", cfg.filter);
  buffers.add("conv", Grid2D(cfg.conv_ydim(), cfg.conv_xdim()));
  if (cfg.pool) buffers.add("pool", Grid2D(cfg.pool_ydim(), cfg.pool_xdim()));
  return buffers;
}

ThreadgroupProgram dense_tanh_program(const AffineConfig& cfg) {
  validate_affine(cfg);
  ThreadgroupProgram program;
  program.thread_count = cfg.result_count();
  program.phases.push_back(affine_phase(cfg, /*fuse_tanh=*/true));
  return program;
}

ThreadgroupProgram affine_program(const AffineConfig& cfg) {
  validate_affine(cfg);
  ThreadgroupProgram program;
  program.thread_count = cfg.result_count();
  program.phases.push_back(affine_phase(cfg, /*fuse_tanh=*/false));
  return program;
}

BufferSet affine_buffers(const AffineConfig& cfg) {
  validate_affine(cfg);
  BufferSet buffers;
  buffers.add("X", cfg.X);
  buffers.add("w", grid_from_reals(1, cfg.w.size(), cfg.w));
  buffers.add("b", grid_from_reals(1, cfg.b.size(), cfg.b));
  buffers.add("result", Grid2D(1, cfg.result_count()));
  return buffers;
}

ThreadgroupProgram relu_program(std::size_t n) {
  if (n == 0) throw ShapeError("relu needs at least one element");
  ThreadgroupProgram program;
  program.thread_count = n;
  program.add_phase("relu", [](std::size_t id, const PhaseView& shared) {
    return std::vector<WriteRecord>{{"out", id, std::fmax(shared.read("in", id), 0.0f)}};
  });
  return program;
}

BufferSet relu_buffers(const Grid2D& in) {
  BufferSet buffers;
  buffers.add("in", in);
  buffers.add("out", Grid2D(in.ydim(), in.xdim()));
  return buffers;
}

void append_reduce_tree_phases(ThreadgroupProgram& program, std::string buffer,
                               std::size_t n, ReduceOp op,
                               const std::string& name_prefix) {
  if (n == 0) throw ShapeError("reduction needs at least one element");
  const std::size_t m = std::bit_ceil(n);
  for (std::size_t i = 2; i <= m; i *= 2) {
    const std::size_t half = i / 2;
    program.add_phase(
        name_prefix + ".stride" + std::to_string(i),
        [buffer, i, half, n, op](std::size_t id, const PhaseView& shared) {
          if (id % i != 0 || id + half >= n) return std::vector<WriteRecord>{};
          const float left = shared.read(buffer, id);
          const float right = shared.read(buffer, id + half);
          const float combined = op == ReduceOp::Max ? std::fmax(left, right) : left + right;
          return std::vector<WriteRecord>{{buffer, id, combined}};
        });
  }
}

ThreadgroupProgram reduce_tree_program(std::size_t n, ReduceOp op) {
  if (n == 0) throw ShapeError("reduction needs at least one element");
  ThreadgroupProgram program;
  program.thread_count = n;
  append_reduce_tree_phases(program, "values", n, op,
                            op == ReduceOp::Max ? "max" : "sum");
  return program;
}

BufferSet reduce_tree_buffers(std::span<const float> values) {
  if (values.empty()) throw ShapeError("reduction needs at least one element");
  BufferSet buffers;
  buffers.add("values", grid_from_reals(1, values.size(), values));
  return buffers;
}

float reduce_tree(std::span<const float> values, ReduceOp op) {
  BufferSet result = run(reduce_tree_program(values.size(), op),
                         reduce_tree_buffers(values));
  return result.at("values")[0].real;
}

ThreadgroupProgram softmax_program(const AffineConfig& cfg) {
  validate_affine(cfg);
  const std::size_t n = cfg.result_count();

  ThreadgroupProgram program;
  program.thread_count = n;
  program.phases.push_back(affine_phase(cfg, /*fuse_tanh=*/false));

  // Max reduction over the logits: copy into the softmax scratch, reduce
  // in place, then publish the winner to shared_max[0].
  program.add_phase("max.seed", [](std::size_t id, const PhaseView& shared) {
    return std::vector<WriteRecord>{{"softmax", id, shared.read("result", id)}};
  });
  append_reduce_tree_phases(program, "softmax", n, ReduceOp::Max, "max");
  program.add_phase("max.collect", [](std::size_t id, const PhaseView& shared) {
    if (id != 0) return std::vector<WriteRecord>{};
    return std::vector<WriteRecord>{{"shared_max", 0, shared.read("softmax", 0)}};
  });

  // e = exp(result - max), overwriting the scratch with the e-values.
  program.add_phase("exp", [](std::size_t id, const PhaseView& shared) {
    const float e = std::exp(shared.read("result", id) - shared.read("shared_max", 0));
    return std::vector<WriteRecord>{{"softmax", id, e}};
  });

  // Sum reduction over the e-values, accumulated in array_sum.
  program.add_phase("sum.seed", [](std::size_t id, const PhaseView& shared) {
    return std::vector<WriteRecord>{{"array_sum", id, shared.read("softmax", id)}};
  });
  append_reduce_tree_phases(program, "array_sum", n, ReduceOp::Sum, "sum");

  // dist = e / sum(e). Max subtraction makes one e-value exactly 1, so the
  // normalizer is at least 1; anything less is a kernel bug.
  program.add_phase("normalize", [](std::size_t id, const PhaseView& shared) {
    const float total = shared.read("array_sum", 0);
    if (!(total >= 1.0f)) {
      throw InternalError("softmax normalizer " + std::to_string(total) +
                          " fell below 1 for thread " + std::to_string(id));
    }
    return std::vector<WriteRecord>{
        {"softmax", id, shared.read("softmax", id) / total}};
  });
  return program;
}

BufferSet softmax_buffers(const AffineConfig& cfg) {
  BufferSet buffers = affine_buffers(cfg);
  const std::size_t n = cfg.result_count();
  buffers.add("softmax", Grid2D(1, n));
  buffers.add("array_sum", Grid2D(1, n));
  buffers.add("shared_max", Grid2D(1, 1));
  return buffers;
}

}  // namespace dlk
