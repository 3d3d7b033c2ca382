// Shared test helpers: deterministic random data and synthetic IDX files.
#pragma once

#include <bit>
#include <cstdint>
#include <random>
#include <vector>

#include "dlk/executor.hpp"
#include "dlk/numerics.hpp"

namespace dlk::test {

inline std::mt19937 make_rng(std::uint32_t seed) { return std::mt19937(seed); }

// Uniform in [lo, hi) from the generator's raw bits, so results do not
// depend on the standard library's distribution implementation.
inline float uniform(std::mt19937& rng, float lo, float hi) {
  const float u = static_cast<float>(rng() >> 8) * 0x1p-24f;
  return lo + u * (hi - lo);
}

inline std::size_t uniform_index(std::mt19937& rng, std::size_t lo, std::size_t hi) {
  return lo + rng() % (hi - lo + 1);  // inclusive bounds; bias immaterial for tests
}

inline std::vector<float> random_values(std::mt19937& rng, std::size_t count, float lo,
                                        float hi) {
  std::vector<float> out(count);
  for (float& v : out) v = uniform(rng, lo, hi);
  return out;
}

inline Grid2D random_grid(std::mt19937& rng, std::size_t ydim, std::size_t xdim,
                          float lo = -1.0f, float hi = 1.0f) {
  return grid_from_reals(ydim, xdim, random_values(rng, ydim * xdim, lo, hi));
}

inline void seed_imag(Grid2D& grid, std::mt19937& rng) {
  for (ComplexScalar& v : grid.flat()) v.imag = uniform(rng, -10.0f, 10.0f);
}

inline std::vector<std::uint32_t> imag_bits(const BufferSet& buffers) {
  std::vector<std::uint32_t> bits;
  for (std::size_t s = 0; s < buffers.count(); ++s) {
    for (const ComplexScalar& v : buffers.grid_of(s).flat()) {
      bits.push_back(std::bit_cast<std::uint32_t>(v.imag));
    }
  }
  return bits;
}

inline void append_u32_be(std::vector<std::uint8_t>& out, std::uint32_t value) {
  out.push_back(static_cast<std::uint8_t>(value >> 24));
  out.push_back(static_cast<std::uint8_t>(value >> 16));
  out.push_back(static_cast<std::uint8_t>(value >> 8));
  out.push_back(static_cast<std::uint8_t>(value));
}

// Test-only IDX writers; production code only reads the format.
inline std::vector<std::uint8_t> build_idx_images(std::uint32_t count, std::uint32_t rows,
                                                  std::uint32_t cols,
                                                  const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> out;
  append_u32_be(out, 0x00000803);
  append_u32_be(out, count);
  append_u32_be(out, rows);
  append_u32_be(out, cols);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

inline std::vector<std::uint8_t> build_idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  append_u32_be(out, 0x00000801);
  append_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

}  // namespace dlk::test
