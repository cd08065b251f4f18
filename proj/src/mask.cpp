#include "maskmesh/mask.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>

namespace maskmesh {

namespace {

struct Span {
  std::int64_t begin;
  std::int64_t end;
};

// Foreground spans in linear (row-major) pixel order.
std::vector<Span> foreground_spans(const RleMask& mask) {
  std::vector<Span> spans;
  std::int64_t pos = 0;
  for (std::size_t i = 0; i < mask.counts.size(); ++i) {
    const std::int64_t len = mask.counts[i];
    if (i % 2 == 1) spans.push_back({pos, pos + len});
    pos += len;
  }
  return spans;
}

void require_same_size(const RleMask& a, const RleMask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                    std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

RleMask from_spans(int width, int height, const std::vector<Span>& spans) {
  RleMask out;
  out.width = width;
  out.height = height;
  std::int64_t pos = 0;
  for (const Span& s : spans) {
    if (s.begin >= s.end) continue;
    if (!out.counts.empty() && s.begin == pos) {
      out.counts.back() += static_cast<std::uint32_t>(s.end - s.begin);
    } else {
      out.counts.push_back(static_cast<std::uint32_t>(s.begin - pos));
      out.counts.push_back(static_cast<std::uint32_t>(s.end - s.begin));
    }
    pos = s.end;
  }
  const std::int64_t total = out.pixel_count();
  if (out.counts.empty()) {
    out.counts.push_back(static_cast<std::uint32_t>(total));
  } else if (pos < total) {
    out.counts.push_back(static_cast<std::uint32_t>(total - pos));
  }
  return out;
}

}  // namespace

RleMask RleMask::empty(int width, int height) {
  RleMask m;
  m.width = width;
  m.height = height;
  m.counts = {static_cast<std::uint32_t>(std::int64_t{width} * height)};
  return m;
}

void validate(const RleMask& mask) {
  if (mask.width < 0 || mask.height < 0) {
    throw Error(ErrorCode::CorruptRle, "negative dimensions");
  }
  if (mask.counts.empty()) {
    throw Error(ErrorCode::CorruptRle, "no runs");
  }
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < mask.counts.size(); ++i) {
    if (i > 0 && mask.counts[i] == 0) {
      throw Error(ErrorCode::CorruptRle, "zero-length run at position " + std::to_string(i));
    }
    sum += mask.counts[i];
  }
  if (sum != mask.pixel_count()) {
    throw Error(ErrorCode::CorruptRle, "runs sum to " + std::to_string(sum) + ", expected " +
                                           std::to_string(mask.pixel_count()));
  }
}

RleMask rle_encode(const Bitmap& bitmap) {
  RleMask out;
  out.height = static_cast<int>(bitmap.rows());
  out.width = static_cast<int>(bitmap.cols());
  const std::uint8_t* data = bitmap.data();
  const Eigen::Index n = bitmap.size();
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint8_t v = data[i] != 0 ? 1 : 0;
    if (v != current) {
      out.counts.push_back(run);
      current = v;
      run = 0;
    }
    ++run;
  }
  if (run > 0 || out.counts.empty()) out.counts.push_back(run);
  return out;
}

Bitmap rle_decode(const RleMask& mask) {
  validate(mask);
  Bitmap out = Bitmap::Zero(mask.height, mask.width);
  std::uint8_t* data = out.data();
  std::int64_t pos = 0;
  for (std::size_t i = 0; i < mask.counts.size(); ++i) {
    if (i % 2 == 1) std::fill_n(data + pos, mask.counts[i], std::uint8_t{1});
    pos += mask.counts[i];
  }
  return out;
}

std::int64_t area(const RleMask& mask) {
  std::int64_t total = 0;
  for (std::size_t i = 1; i < mask.counts.size(); i += 2) total += mask.counts[i];
  return total;
}

std::int64_t intersection_area(const RleMask& a, const RleMask& b) {
  require_same_size(a, b);
  const auto sa = foreground_spans(a);
  const auto sb = foreground_spans(b);
  std::int64_t total = 0;
  std::size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    const std::int64_t lo = std::max(sa[i].begin, sb[j].begin);
    const std::int64_t hi = std::min(sa[i].end, sb[j].end);
    if (hi > lo) total += hi - lo;
    if (sa[i].end < sb[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

double iou(const RleMask& a, const RleMask& b) {
  const std::int64_t inter = intersection_area(a, b);
  const std::int64_t uni = area(a) + area(b) - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

RleMask mask_union(const RleMask& a, const RleMask& b) {
  require_same_size(a, b);
  auto spans = foreground_spans(a);
  const auto sb = foreground_spans(b);
  spans.insert(spans.end(), sb.begin(), sb.end());
  std::sort(spans.begin(), spans.end(),
            [](const Span& x, const Span& y) { return x.begin < y.begin; });
  std::vector<Span> merged;
  for (const Span& s : spans) {
    if (!merged.empty() && s.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back(s);
    }
  }
  return from_spans(a.width, a.height, merged);
}

RleMask resample_nearest(const RleMask& mask, int width, int height) {
  if (mask.width == width && mask.height == height) return mask;
  const Bitmap src = rle_decode(mask);
  Bitmap dst(height, width);
  std::vector<Eigen::Index> col_map(static_cast<std::size_t>(width));
  for (int x = 0; x < width; ++x) {
    col_map[x] = static_cast<Eigen::Index>((2 * std::int64_t{x} + 1) * mask.width / (2 * std::int64_t{width}));
  }
  for (int y = 0; y < height; ++y) {
    const auto sy = static_cast<Eigen::Index>((2 * std::int64_t{y} + 1) * mask.height / (2 * std::int64_t{height}));
    for (int x = 0; x < width; ++x) dst(y, x) = src(sy, col_map[x]);
  }
  return rle_encode(dst);
}

RleMask box_mask(int width, int height, PixelBox box) {
  const int x0 = std::clamp(box.x0, 0, width), x1 = std::clamp(box.x1, 0, width);
  const int y0 = std::clamp(box.y0, 0, height), y1 = std::clamp(box.y1, 0, height);
  std::vector<Span> spans;
  if (x1 > x0) {
    for (int y = y0; y < y1; ++y) {
      const std::int64_t row = std::int64_t{y} * width;
      spans.push_back({row + x0, row + x1});
    }
  }
  return from_spans(width, height, spans);
}

Eigen::Vector2d centroid(const RleMask& mask) {
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  std::int64_t n = 0;
  if (mask.width == 0) return sum;
  for (const Span& s : foreground_spans(mask)) {
    for (std::int64_t p = s.begin; p < s.end; ++p) {
      sum.x() += static_cast<double>(p % mask.width) + 0.5;
      sum.y() += static_cast<double>(p / mask.width) + 0.5;
    }
    n += s.end - s.begin;
  }
  if (n == 0) return sum;
  return sum / static_cast<double>(n);
}

std::uint32_t digest(const RleMask& mask) {
  std::uint32_t h = 2166136261u;
  auto mix = [&h](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 16777619u;
    }
  };
  mix(static_cast<std::uint32_t>(mask.width));
  mix(static_cast<std::uint32_t>(mask.height));
  for (std::uint32_t c : mask.counts) mix(c);
  return h;
}

}  // namespace maskmesh
