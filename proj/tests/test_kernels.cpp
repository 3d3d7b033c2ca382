#include <doctest.h>

#include <cmath>
#include <vector>

#include "dlk/kernels.hpp"
#include "dlk/oracle.hpp"
#include "support.hpp"

using namespace dlk;

namespace {

Grid2D run_conv(const ConvPoolConfig& cfg, std::size_t workers = 1) {
  BufferSet out = run(conv_program(cfg), conv_buffers(cfg), workers);
  return out.at(cfg.pool ? "pool" : "conv");
}

std::vector<float> run_affine_kind(const AffineConfig& cfg, bool tanh_fused,
                                   std::size_t workers = 1) {
  BufferSet out = run(tanh_fused ? dense_tanh_program(cfg) : affine_program(cfg),
                      affine_buffers(cfg), workers);
  return out.at("result").reals();
}

std::vector<float> run_softmax(const AffineConfig& cfg, std::size_t workers = 1) {
  BufferSet out = run(softmax_program(cfg), softmax_buffers(cfg), workers);
  return out.at("softmax").reals();
}

// Softmax over bare logits: zero weights on a single dummy input, logits
// as the bias.
AffineConfig logits_config(const std::vector<float>& logits) {
  return {Grid2D(logits.size(), 1), {0.0f}, logits};
}

Grid2D constant_grid(std::size_t ydim, std::size_t xdim, float value) {
  return grid_from_reals(ydim, xdim, std::vector<float>(ydim * xdim, value));
}

}  // namespace

TEST_CASE("conv: all-ones 3x3 image with all-ones 2x2 filter") {
  ConvPoolConfig cfg{constant_grid(3, 3, 1.0f), constant_grid(2, 2, 1.0f), 0.0f, false};
  Grid2D out = run_conv(cfg);
  CHECK(out.ydim() == 2);
  CHECK(out.xdim() == 2);
  for (float v : out.reals()) CHECK(v == 4.0f);
}

TEST_CASE("conv: hand-expanded flipped-filter product") {
  // image [[1,2],[3,4]], filter [[a,b],[c,d]] -> 1x1 output 1d + 2c + 3b + 4a
  const std::vector<float> image{1, 2, 3, 4};
  const std::vector<float> filter{5, 7, 11, 13};  // a b c d
  ConvPoolConfig cfg{grid_from_reals(2, 2, image), grid_from_reals(2, 2, filter), 0.0f,
                     false};
  Grid2D out = run_conv(cfg);
  CHECK(out.size() == 1);
  CHECK(out[0].real == 1.0f * 13.0f + 2.0f * 11.0f + 3.0f * 7.0f + 4.0f * 5.0f);
}

TEST_CASE("conv: zero filter annihilates any image") {
  auto rng = test::make_rng(21);
  ConvPoolConfig cfg{test::random_grid(rng, 5, 6), constant_grid(2, 3, 0.0f), 0.0f, false};
  for (float v : run_conv(cfg).reals()) CHECK(v == 0.0f);
}

TEST_CASE("conv: corner-delta filter reproduces the top-left window") {
  auto rng = test::make_rng(22);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t iy = test::uniform_index(rng, 2, 9);
    const std::size_t ix = test::uniform_index(rng, 2, 9);
    const std::size_t fy = test::uniform_index(rng, 1, iy);
    const std::size_t fx = test::uniform_index(rng, 1, ix);
    Grid2D filter(fy, fx);
    filter.at(fy - 1, fx - 1).real = 1.0f;
    Grid2D image = test::random_grid(rng, iy, ix);
    Grid2D out = run_conv({image, filter, 0.0f, false});
    for (std::size_t y = 0; y < out.ydim(); ++y) {
      for (std::size_t x = 0; x < out.xdim(); ++x) {
        CHECK(out.at(y, x).real == image.at(y, x).real);
      }
    }
  }
}

TEST_CASE("conv: oversized filter is a shape error") {
  ConvPoolConfig cfg{constant_grid(2, 2, 1.0f), constant_grid(3, 2, 1.0f), 0.0f, false};
  CHECK_THROWS_AS(conv_program(cfg), ShapeError);
  CHECK_THROWS_AS(conv_buffers(cfg), ShapeError);
}

TEST_CASE("conv matches the sequential oracle bit-exactly") {
  auto rng = test::make_rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t iy = test::uniform_index(rng, 1, 12);
    const std::size_t ix = test::uniform_index(rng, 1, 12);
    const std::size_t fy = test::uniform_index(rng, 1, iy);
    const std::size_t fx = test::uniform_index(rng, 1, ix);
    Grid2D image = test::random_grid(rng, iy, ix);
    Grid2D filter = test::random_grid(rng, fy, fx);
    const auto expect = oracle::conv_ref(image, filter).reals();
    const auto got = run_conv({image, filter, 0.0f, false}).reals();
    REQUIRE(got.size() == expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == expect[i]);
  }
}

TEST_CASE("fused pool: 2x2 window maxes then tanh") {
  // 1x1 filter [1] makes conv output == image, so pooling is inspectable.
  const std::vector<float> image{1, 2, 3, 4};
  ConvPoolConfig cfg{grid_from_reals(2, 2, image), constant_grid(1, 1, 1.0f), 0.0f, true};
  Grid2D pool = run_conv(cfg);
  CHECK(pool.size() == 1);
  CHECK(pool[0].real == doctest::Approx(0.9993292997390670).epsilon(1e-6));  // tanh(4)
}

TEST_CASE("fused pool: equal values pool to tanh of the value") {
  ConvPoolConfig cfg{constant_grid(4, 6, 0.25f), constant_grid(1, 1, 1.0f), 0.0f, true};
  Grid2D pool = run_conv(cfg);
  CHECK(pool.ydim() == 2);
  CHECK(pool.xdim() == 3);
  for (float v : pool.reals()) CHECK(v == tanh_f32(0.25f));
}

TEST_CASE("fused pool: bias-only path") {
  ConvPoolConfig cfg{constant_grid(2, 2, 0.0f), constant_grid(1, 1, 1.0f), 5.0f, true};
  Grid2D pool = run_conv(cfg);
  CHECK(pool[0].real == doctest::Approx(0.9999092042625951).epsilon(1e-6));  // tanh(5)
}

TEST_CASE("fused pool: odd conv dims are rejected at construction") {
  ConvPoolConfig cfg{constant_grid(3, 3, 1.0f), constant_grid(1, 1, 1.0f), 0.0f, true};
  CHECK_THROWS_AS(conv_program(cfg), ShapeError);
  CHECK_THROWS_AS(maxpool_tanh_phase(cfg), ShapeError);
}

TEST_CASE("fused pool matches pool_ref on random shapes") {
  auto rng = test::make_rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t fy = test::uniform_index(rng, 1, 4);
    const std::size_t fx = test::uniform_index(rng, 1, 4);
    const std::size_t cy = 2 * test::uniform_index(rng, 1, 4);
    const std::size_t cx = 2 * test::uniform_index(rng, 1, 4);
    Grid2D image = test::random_grid(rng, cy + fy - 1, cx + fx - 1);
    Grid2D filter = test::random_grid(rng, fy, fx);
    const float bias = test::uniform(rng, -1.0f, 1.0f);
    ConvPoolConfig cfg{image, filter, bias, true};
    const auto expect = oracle::pool_ref(oracle::conv_ref(image, filter), bias).reals();
    const auto got = run_conv(cfg).reals();
    REQUIRE(got.size() == expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == expect[i]);
  }
}

TEST_CASE("pool outputs stay strictly inside (-1, 1) for moderate sums") {
  auto rng = test::make_rng(25);
  for (int trial = 0; trial < 20; ++trial) {
    Grid2D image = test::random_grid(rng, 6, 6, -0.5f, 0.5f);
    Grid2D filter = test::random_grid(rng, 3, 3, -0.5f, 0.5f);
    ConvPoolConfig cfg{image, filter, test::uniform(rng, -1.0f, 1.0f), true};
    for (float v : run_conv(cfg).reals()) {
      CHECK(v > -1.0f);
      CHECK(v < 1.0f);
    }
  }
}

TEST_CASE("dense: identity weights pass the activation through tanh") {
  AffineConfig cfg{grid_from_reals(2, 2, std::vector<float>{1, 0, 0, 1}),
                   {3.0f, 5.0f},
                   {0.0f, 0.0f}};
  const auto out = run_affine_kind(cfg, true);
  CHECK(out[0] == doctest::Approx(0.9950547536867305).epsilon(1e-6));  // tanh(3)
  CHECK(out[1] == doctest::Approx(0.9999092042625951).epsilon(1e-6));  // tanh(5)
}

TEST_CASE("dense: zero weights leave only the bias") {
  AffineConfig cfg{Grid2D(2, 3), {1.0f, 2.0f, 3.0f}, {0.5f, -0.5f}};
  const auto out = run_affine_kind(cfg, true);
  CHECK(out[0] == tanh_f32(0.5f));
  CHECK(out[1] == tanh_f32(-0.5f));
}

TEST_CASE("dense: linear scan sum") {
  AffineConfig cfg{constant_grid(1, 3, 1.0f), {1.0f, 2.0f, 3.0f}, {0.0f}};
  const auto out = run_affine_kind(cfg, true);
  CHECK(out[0] == tanh_f32(6.0f));
}

TEST_CASE("dense: shape mismatches are rejected") {
  CHECK_THROWS_AS(dense_tanh_program({Grid2D(2, 3), {1.0f, 2.0f}, {0.0f, 0.0f}}),
                  ShapeError);
  CHECK_THROWS_AS(dense_tanh_program({Grid2D(2, 3), {1.0f, 2.0f, 3.0f}, {0.0f}}),
                  ShapeError);
}

TEST_CASE("dense matches dense_ref bit-exactly") {
  auto rng = test::make_rng(26);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t outputs = test::uniform_index(rng, 1, 9);
    const std::size_t inputs = test::uniform_index(rng, 1, 17);
    AffineConfig cfg{test::random_grid(rng, outputs, inputs),
                     test::random_values(rng, inputs, -1.0f, 1.0f),
                     test::random_values(rng, outputs, -1.0f, 1.0f)};
    const auto expect = oracle::dense_ref(cfg.X, cfg.w, cfg.b);
    const auto got = run_affine_kind(cfg, true);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == expect[i]);
  }
}

TEST_CASE("relu examples") {
  auto run_relu = [](const std::vector<float>& in) {
    BufferSet out = run(relu_program(in.size()), relu_buffers(grid_from_reals(1, in.size(), in)));
    return out.at("out").reals();
  };
  CHECK(run_relu({-1.0f, 0.0f, 2.0f}) == std::vector<float>{0.0f, 0.0f, 2.0f});
  CHECK(run_relu({-3.0f, -0.5f, -2.0f}) == std::vector<float>{0.0f, 0.0f, 0.0f});
  const std::vector<float> nonneg{0.0f, 1.0f, 0.25f, 7.0f};
  CHECK(run_relu(nonneg) == nonneg);
}

TEST_CASE("reduce_tree: worked example") {
  const std::vector<float> values{3, 1, 4, 1, 5, 9, 2, 6};
  CHECK(reduce_tree(values, ReduceOp::Max) == 9.0f);
  CHECK(reduce_tree(values, ReduceOp::Sum) == 31.0f);
}

TEST_CASE("reduce_tree: single element is the identity") {
  const std::vector<float> one{42.5f};
  CHECK(reduce_tree(one, ReduceOp::Max) == 42.5f);
  CHECK(reduce_tree(one, ReduceOp::Sum) == 42.5f);
}

TEST_CASE("reduce_tree matches the linear scan across sizes") {
  auto rng = test::make_rng(27);
  for (std::size_t n = 1; n <= 32; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto values = test::random_values(rng, n, 0.0f, 1.0f);
      CHECK(reduce_tree(values, ReduceOp::Max) == oracle::reduce_ref(values, ReduceOp::Max));
      const float tree = reduce_tree(values, ReduceOp::Sum);
      const float linear = oracle::reduce_ref(values, ReduceOp::Sum);
      CHECK(std::abs(tree - linear) <= 1e-6f * std::abs(linear));
    }
  }
}

TEST_CASE("softmax: single class is certainty") {
  CHECK(run_softmax(logits_config({-3.7f})) == std::vector<float>{1.0f});
}

TEST_CASE("softmax: uniform logits spread evenly") {
  const auto out = run_softmax(logits_config(std::vector<float>(10, 0.73f)));
  for (float v : out) CHECK(v == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("softmax: two-class closed form") {
  const auto out = run_softmax(logits_config({0.0f, std::log(3.0f)}));
  CHECK(out[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(out[1] == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("softmax: normalization, shift invariance, argmax preservation") {
  auto rng = test::make_rng(28);
  for (std::size_t n : {1u, 2u, 3u, 5u, 10u, 16u, 17u}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto logits = test::random_values(rng, n, -5.0f, 5.0f);
      const auto probs = run_softmax(logits_config(logits));

      float sum = 0.0f;
      for (float v : probs) {
        CHECK(v > 0.0f);
        CHECK(v <= 1.0f);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0f) <= 1e-6f);

      const float shift = test::uniform(rng, -50.0f, 50.0f);
      auto shifted = logits;
      for (float& v : shifted) v += shift;
      const auto probs_shifted = run_softmax(logits_config(shifted));
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(probs_shifted[i] - probs[i]) <= 1e-6f);
      }

      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (logits[i] > logits[best]) best = i;
      }
      for (float v : probs) CHECK(probs[best] >= v);
    }
  }
}

TEST_CASE("softmax matches softmax_ref within reduction tolerance") {
  auto rng = test::make_rng(29);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t classes = test::uniform_index(rng, 1, 12);
    const std::size_t inputs = test::uniform_index(rng, 1, 9);
    AffineConfig cfg{test::random_grid(rng, classes, inputs),
                     test::random_values(rng, inputs, -1.0f, 1.0f),
                     test::random_values(rng, classes, -1.0f, 1.0f)};
    const auto expect = oracle::softmax_ref(cfg.X, cfg.w, cfg.b);
    const auto got = run_softmax(cfg);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got[i] - expect[i]) < 1e-6f);
    }
  }
}

TEST_CASE("kernels are deterministic across worker counts") {
  auto rng = test::make_rng(30);
  ConvPoolConfig conv_cfg{test::random_grid(rng, 9, 9), test::random_grid(rng, 2, 2),
                          0.1f, true};
  const auto conv_base = run_conv(conv_cfg, 1).reals();
  AffineConfig soft_cfg{test::random_grid(rng, 10, 6),
                        test::random_values(rng, 6, -1.0f, 1.0f),
                        test::random_values(rng, 10, -1.0f, 1.0f)};
  const auto soft_base = run_softmax(soft_cfg, 1);
  for (std::size_t workers : {2u, 3u, 7u, 16u}) {
    CHECK(run_conv(conv_cfg, workers).reals() == conv_base);
    CHECK(run_softmax(soft_cfg, workers) == soft_base);
  }
}

TEST_CASE("all shipped kernel programs are race-free") {
  auto rng = test::make_rng(31);
  ConvPoolConfig conv_cfg{test::random_grid(rng, 8, 8), test::random_grid(rng, 3, 3),
                          0.5f, true};
  CHECK(check_races(conv_program(conv_cfg), conv_buffers(conv_cfg)).empty());

  AffineConfig affine_cfg{test::random_grid(rng, 7, 5),
                          test::random_values(rng, 5, -1.0f, 1.0f),
                          test::random_values(rng, 7, -1.0f, 1.0f)};
  CHECK(check_races(dense_tanh_program(affine_cfg), affine_buffers(affine_cfg)).empty());
  CHECK(check_races(relu_program(9), relu_buffers(test::random_grid(rng, 1, 9))).empty());
  CHECK(check_races(softmax_program(affine_cfg), softmax_buffers(affine_cfg)).empty());
}

TEST_CASE("kernels never touch imaginary parts") {
  auto rng = test::make_rng(32);

  ConvPoolConfig conv_cfg{test::random_grid(rng, 6, 6), test::random_grid(rng, 3, 3),
                          0.2f, true};
  BufferSet conv_in = conv_buffers(conv_cfg);
  for (std::size_t s = 0; s < conv_in.count(); ++s) {
    test::seed_imag(conv_in.grid_of(s), rng);
  }
  const auto before = test::imag_bits(conv_in);
  BufferSet conv_out = run(conv_program(conv_cfg), conv_in, 4);
  CHECK(test::imag_bits(conv_out) == before);

  AffineConfig soft_cfg{test::random_grid(rng, 6, 4),
                        test::random_values(rng, 4, -1.0f, 1.0f),
                        test::random_values(rng, 6, -1.0f, 1.0f)};
  BufferSet soft_in = softmax_buffers(soft_cfg);
  for (std::size_t s = 0; s < soft_in.count(); ++s) {
    test::seed_imag(soft_in.grid_of(s), rng);
  }
  const auto soft_before = test::imag_bits(soft_in);
  BufferSet soft_out = run(softmax_program(soft_cfg), soft_in, 3);
  CHECK(test::imag_bits(soft_out) == soft_before);
}
