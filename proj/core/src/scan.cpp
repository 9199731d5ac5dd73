#include "stymam/scan.hpp"

#include <algorithm>

#include "stymam/errors.hpp"
#include "stymam/ops.hpp"

namespace stymam {

const char* to_string(StripOrientation o) { return o == StripOrientation::Horizontal ? "horizontal" : "vertical"; }

namespace {

// Horizontal-strip serpentine over an h x w grid, yielding (row, col) pairs.
template <class Visit>
void horizontal_serpentine(std::size_t h, std::size_t w, std::size_t s, Visit visit) {
  const std::size_t strips = (h + s - 1) / s;
  for (std::size_t k = 0; k < strips; ++k) {
    const std::size_t top = k * s;
    const std::size_t bottom = std::min(top + s, h);  // exclusive
    const bool left_to_right = k % 2 == 0;
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t col = left_to_right ? j : w - 1 - j;
      const bool downward = j % 2 == 0;
      for (std::size_t i = 0; i < bottom - top; ++i) {
        const std::size_t row = downward ? top + i : bottom - 1 - i;
        visit(row, col);
      }
    }
  }
}

}  // namespace

ScanOrder ScanOrder::build(std::size_t height, std::size_t width, std::size_t strip, StripOrientation orientation) {
  if (height == 0 || width == 0) throw ConfigError("scan order needs positive extents");
  const std::size_t limit = orientation == StripOrientation::Horizontal ? height : width;
  if (strip < 1 || strip > limit) {
    throw ConfigError("strip size " + std::to_string(strip) + " out of range [1, " + std::to_string(limit) + "] for " +
                      to_string(orientation) + " strips on " + std::to_string(height) + "x" + std::to_string(width));
  }
  ScanOrder o;
  o.height_ = height;
  o.width_ = width;
  o.strip_ = strip;
  o.orientation_ = orientation;
  o.perm_.reserve(height * width);
  if (orientation == StripOrientation::Horizontal) {
    horizontal_serpentine(height, width, strip, [&](std::size_t r, std::size_t c) { o.perm_.push_back(r * width + c); });
  } else {
    // Transpose: run the horizontal construction on the W x H grid, swap coordinates back.
    horizontal_serpentine(width, height, strip, [&](std::size_t r, std::size_t c) { o.perm_.push_back(c * width + r); });
  }
  o.inv_perm_.assign(o.perm_.size(), 0);
  for (std::size_t t = 0; t < o.perm_.size(); ++t) o.inv_perm_[o.perm_[t]] = t;
  return o;
}

ScanOrder ScanOrder::from_perm(std::size_t height, std::size_t width, std::vector<std::size_t> perm) {
  if (perm.size() != height * width) throw ConfigError("scan permutation has wrong length");
  ScanOrder o;
  o.height_ = height;
  o.width_ = width;
  o.strip_ = height;
  o.inv_perm_.assign(perm.size(), perm.size());
  for (std::size_t t = 0; t < perm.size(); ++t) {
    if (perm[t] >= perm.size() || o.inv_perm_[perm[t]] != perm.size()) {
      throw ConfigError("scan permutation is not a bijection");
    }
    o.inv_perm_[perm[t]] = t;
  }
  o.perm_ = std::move(perm);
  return o;
}

ScanOrder ScanOrder::raster(std::size_t height, std::size_t width) {
  std::vector<std::size_t> perm(height * width);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  return from_perm(height, width, std::move(perm));
}

std::size_t ScanOrder::strip_of(std::size_t t) const {
  const GridCell c = cell(t);
  return (orientation_ == StripOrientation::Horizontal ? c.row : c.col) / strip_;
}

ScanOrder build_strip_zigzag(std::size_t height, std::size_t width, std::size_t strip, StripOrientation orientation) {
  return ScanOrder::build(height, width, strip, orientation);
}

DualPath DualPath::build(std::size_t height, std::size_t width, std::size_t strip) {
  // Maps smaller than the strip collapse to a single strip on both paths.
  const std::size_t s = std::min({strip, height, width});
  return {ScanOrder::build(height, width, s, StripOrientation::Horizontal),
          ScanOrder::build(height, width, s, StripOrientation::Vertical)};
}

Tensor serialize(const Tensor& map, const ScanOrder& order) {
  if (map.rank() != 3 || map.dim(0) != order.height() || map.dim(1) != order.width()) {
    throw DimensionError("serialize: map " + shape_str(map.shape()) + " does not match scan order " +
                         std::to_string(order.height()) + "x" + std::to_string(order.width()));
  }
  const std::size_t c = map.dim(2);
  return gather_rows(reshape(map, {order.size(), c}), order.perm());
}

Tensor deserialize(const Tensor& seq, const ScanOrder& order) {
  if (seq.rank() != 2 || seq.dim(0) != order.size()) {
    throw DimensionError("deserialize: sequence " + shape_str(seq.shape()) + " does not match scan order of length " +
                         std::to_string(order.size()));
  }
  const std::size_t c = seq.dim(1);
  return reshape(gather_rows(seq, order.inv_perm()), {order.height(), order.width(), c});
}

}  // namespace stymam
