#pragma once

// 8-bit PNM images (P5 greyscale, P6 RGB) and conversion to [-1, 1] tensors.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "stymam/tensor.hpp"

namespace stymam {

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;  // 1 or 3
  std::vector<std::uint8_t> pixels;  // row-major, interleaved

  std::uint8_t at(std::size_t row, std::size_t col, std::size_t ch) const {
    return pixels[(row * width + col) * channels + ch];
  }
};

// Reads binary P5/P6 with maxval 255. Greyscale is expanded to RGB when `force_rgb`.
Image read_pnm(const std::filesystem::path& path, bool force_rgb = true);
void write_ppm(const Image& img, const std::filesystem::path& path);
void write_pgm(const Image& img, const std::filesystem::path& path);

// [H x W x 3] in [-1, 1]: v / 127.5 - 1.
Tensor image_to_tensor(const Image& img);
// Clamps to [-1, 1] and rounds (v + 1) * 127.5 to the nearest integer.
Image tensor_to_image(const Tensor& t);

// Bilinear resize with half-pixel centres and edge clamping.
Tensor resize_bilinear(const Tensor& img, std::size_t height, std::size_t width);
// Edge-replicate on the bottom/right so both extents become multiples of `multiple`.
Tensor pad_to_multiple(const Tensor& img, std::size_t multiple);
Tensor crop(const Tensor& img, std::size_t height, std::size_t width);

// All *.ppm / *.pgm files in `dir` (sorted by name), resized to size x size.
// Throws DataError when the directory is missing or has no images.
std::vector<Tensor> load_image_dir(const std::filesystem::path& dir, std::size_t size);

}  // namespace stymam
