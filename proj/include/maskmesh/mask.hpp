#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "maskmesh/errors.hpp"

namespace maskmesh {

/// Row-major pixel grid; rows are image rows (height), columns are image columns (width).
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Bitmap = Grid<std::uint8_t>;
using ProbMask = Grid<float>;

/// Binary mask as row-major run lengths. Runs alternate background/foreground and
/// the first run is always background (possibly zero-length). Interior runs are
/// never zero-length and the runs sum to width * height.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;

  bool operator==(const RleMask&) const = default;

  std::int64_t pixel_count() const { return std::int64_t{width} * height; }

  /// All-background mask of the given size.
  static RleMask empty(int width, int height);
};

/// Pixel-aligned box, half-open on the far edges: [x0, x1) x [y0, y1).
struct PixelBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool operator==(const PixelBox&) const = default;
};

/// Throws CorruptRle when the run layout is malformed.
void validate(const RleMask& mask);

RleMask rle_encode(const Bitmap& bitmap);
Bitmap rle_decode(const RleMask& mask);

/// Foreground pixel count, computed from the runs.
std::int64_t area(const RleMask& mask);

std::int64_t intersection_area(const RleMask& a, const RleMask& b);

/// |a ∩ b| / |a ∪ b|, with iou(∅, ∅) = 1.
double iou(const RleMask& a, const RleMask& b);

RleMask mask_union(const RleMask& a, const RleMask& b);

/// Nearest-neighbour resize; source pixel for target x is floor((x + 0.5) * src / dst).
RleMask resample_nearest(const RleMask& mask, int width, int height);

RleMask box_mask(int width, int height, PixelBox box);

/// Centroid (x, y) of the foreground in pixel-centre coordinates; (0, 0) when empty.
Eigen::Vector2d centroid(const RleMask& mask);

/// 32-bit FNV-1a over the dimensions and runs.
std::uint32_t digest(const RleMask& mask);

/// Foreground iff value >= threshold.
template <typename Derived>
RleMask binarize(const Eigen::ArrayBase<Derived>& probs, double threshold = 0.5) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "binarization threshold must lie in (0, 1)");
  }
  const Bitmap bits =
      (probs.template cast<double>() >= threshold).template cast<std::uint8_t>();
  return rle_encode(bits);
}

}  // namespace maskmesh
