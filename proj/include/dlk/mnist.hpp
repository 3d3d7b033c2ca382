#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dlk/numerics.hpp"

namespace dlk {

// Parsed IDX image file: pixel bytes normalized to reals in [0, 1].
struct MnistImages {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Grid2D> images;
};

struct MnistLabels {
  std::vector<std::uint8_t> labels;  // each in [0, 9]
};

// IDX containers are big-endian: magic 0x00000803 (images: count, rows,
// cols, then count*rows*cols bytes) or 0x00000801 (labels: count, then
// count bytes).
MnistImages read_idx_images(std::span<const std::uint8_t> bytes);
MnistLabels read_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
MnistImages load_idx_images(const std::filesystem::path& path);
MnistLabels load_idx_labels(const std::filesystem::path& path);

}  // namespace dlk
