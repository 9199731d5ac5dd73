#pragma once

// Strip zigzag scan orders: serialize an H x W map into a 1D token sequence
// and back.
//
// HorizontalStrips cuts the grid into bands of `strip` rows. Inside a band the
// scan walks column by column, alternating down/up, so every step moves to a
// 4-neighbour. Bands alternate left->right and right->left so each band starts
// in the column where the previous one finished. VerticalStrips is the exact
// transpose of the horizontal construction on the W x H grid.

#include <cstddef>
#include <vector>

#include "stymam/tensor.hpp"

namespace stymam {

enum class StripOrientation { Horizontal, Vertical };

const char* to_string(StripOrientation o);

struct GridCell {
  std::size_t row;
  std::size_t col;
};

class ScanOrder {
 public:
  // Throws ConfigError unless 1 <= strip <= H (horizontal) or W (vertical).
  static ScanOrder build(std::size_t height, std::size_t width, std::size_t strip, StripOrientation orientation);
  // Arbitrary order from an explicit permutation (e.g. plain raster for comparisons).
  // Throws ConfigError if `perm` is not a bijection on the grid.
  static ScanOrder from_perm(std::size_t height, std::size_t width, std::vector<std::size_t> perm);
  static ScanOrder raster(std::size_t height, std::size_t width);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t strip() const { return strip_; }
  StripOrientation orientation() const { return orientation_; }
  std::size_t size() const { return perm_.size(); }

  // perm()[t] is the flat index (row * W + col) visited at time t.
  const std::vector<std::size_t>& perm() const { return perm_; }
  // inv_perm()[flat] is the time at which cell `flat` is visited.
  const std::vector<std::size_t>& inv_perm() const { return inv_perm_; }

  GridCell cell(std::size_t t) const { return {perm_[t] / width_, perm_[t] % width_}; }
  // Index of the strip containing the cell visited at time t.
  std::size_t strip_of(std::size_t t) const;

 private:
  std::size_t height_ = 0, width_ = 0, strip_ = 0;
  StripOrientation orientation_ = StripOrientation::Horizontal;
  std::vector<std::size_t> perm_, inv_perm_;
};

ScanOrder build_strip_zigzag(std::size_t height, std::size_t width, std::size_t strip, StripOrientation orientation);

// The two paths consumed by a DSMB.
struct DualPath {
  ScanOrder horizontal;
  ScanOrder vertical;

  static DualPath build(std::size_t height, std::size_t width, std::size_t strip);
};

// [H x W x C] -> [H*W x C]; row t is the channel vector of cell perm[t].
Tensor serialize(const Tensor& map, const ScanOrder& order);
// [H*W x C] -> [H x W x C]; exact inverse of serialize.
Tensor deserialize(const Tensor& seq, const ScanOrder& order);

}  // namespace stymam
