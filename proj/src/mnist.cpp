#include "dlk/mnist.hpp"

#include <cstdio>
#include <fstream>

#include "dlk/errors.hpp"

namespace dlk {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

std::string hex_magic(std::uint32_t value) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08x", value);
  return buf;
}

void check_header(std::span<const std::uint8_t> bytes, std::size_t header_size,
                  std::uint32_t expected_magic, const char* what) {
  if (bytes.size() < header_size) {
    throw ParseError(std::string("truncated IDX ") + what + " header: expected at least " +
                     std::to_string(header_size) + " bytes, got " +
                     std::to_string(bytes.size()));
  }
  const std::uint32_t magic = read_u32_be(bytes, 0);
  if (magic != expected_magic) {
    throw ParseError(std::string("bad IDX magic ") + hex_magic(magic) + ", expected " +
                     hex_magic(expected_magic) + " for " + what);
  }
}

void check_payload(std::size_t expected, std::size_t actual, const char* what) {
  if (expected != actual) {
    throw ParseError(std::string("IDX ") + what + " payload size mismatch: expected " +
                     std::to_string(expected) + " bytes, got " + std::to_string(actual));
  }
}

}  // namespace

MnistImages read_idx_images(std::span<const std::uint8_t> bytes) {
  check_header(bytes, 16, kImageMagic, "images");
  const std::size_t count = read_u32_be(bytes, 4);
  const std::size_t rows = read_u32_be(bytes, 8);
  const std::size_t cols = read_u32_be(bytes, 12);
  if (count > 0 && (rows == 0 || cols == 0)) {
    throw ParseError("IDX images: dims must be positive, got " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  }
  check_payload(count * rows * cols, bytes.size() - 16, "images");

  MnistImages out;
  out.rows = rows;
  out.cols = cols;
  out.images.reserve(count);
  std::size_t at = 16;
  for (std::size_t n = 0; n < count; ++n) {
    Grid2D grid(rows, cols);
    for (std::size_t i = 0; i < rows * cols; ++i) {
      grid[i].real = static_cast<float>(bytes[at++]) / 255.0f;
    }
    out.images.push_back(std::move(grid));
  }
  return out;
}

MnistLabels read_idx_labels(std::span<const std::uint8_t> bytes) {
  check_header(bytes, 8, kLabelMagic, "labels");
  const std::size_t count = read_u32_be(bytes, 4);
  check_payload(count, bytes.size() - 8, "labels");

  MnistLabels out;
  out.labels.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const std::uint8_t label = bytes[8 + n];
    if (label > 9) {
      throw ValueError("IDX labels: label " + std::to_string(label) + " at index " +
                       std::to_string(n) + " exceeds 9");
    }
    out.labels.push_back(label);
  }
  return out;
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

MnistImages load_idx_images(const std::filesystem::path& path) {
  return read_idx_images(read_binary_file(path));
}

MnistLabels load_idx_labels(const std::filesystem::path& path) {
  return read_idx_labels(read_binary_file(path));
}

}  // namespace dlk
