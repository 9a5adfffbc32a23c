#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "bocr/error.hpp"

namespace bocr {

struct GrayTag {};
struct BinaryTag {};

// Row-major 8-bit raster. The tag keeps luminance images and ink bitmaps
// from being mixed up; both share the same storage layout.
template <class Tag>
class Raster {
 public:
  using value_type = std::uint8_t;

  Raster() = default;

  Raster(int width, int height, value_type fill = 0) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw DimensionError("raster dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  Raster(int width, int height, std::vector<value_type> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width <= 0 || height <= 0) throw DimensionError("raster dimensions must be positive");
    if (data_.size() != static_cast<std::size_t>(width) * height)
      throw DimensionError("raster data length does not match width*height");
    if constexpr (std::is_same_v<Tag, BinaryTag>) {
      if (std::any_of(data_.begin(), data_.end(), [](value_type v) { return v > 1; }))
        throw DimensionError("binary raster values must be 0 or 1");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  value_type& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  value_type operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  // Edge-replicated read.
  value_type clamped(int x, int y) const {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return (*this)(x, y);
  }

  std::span<value_type> row(int y) { return {data_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)}; }
  std::span<const value_type> row(int y) const {
    return {data_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }

  std::vector<value_type>& data() noexcept { return data_; }
  const std::vector<value_type>& data() const noexcept { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<value_type> data_;
};

// Luminance in [0,255].
using GrayImage = Raster<GrayTag>;
// Ink bitmap, 1 = ink, 0 = background.
using BinaryImage = Raster<BinaryTag>;

struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const noexcept { return x + w; }   // exclusive
  int bottom() const noexcept { return y + h; }  // exclusive
  long long area() const noexcept { return static_cast<long long>(w) * h; }
  bool contains(int px, int py) const noexcept { return px >= x && px < right() && py >= y && py < bottom(); }
  bool contains(const Box& o) const noexcept {
    return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
  }
  bool intersects(const Box& o) const noexcept {
    return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
  }

  friend bool operator==(const Box&, const Box&) = default;
};

inline Box unite(const Box& a, const Box& b) {
  if (a.w <= 0 || a.h <= 0) return b;
  if (b.w <= 0 || b.h <= 0) return a;
  const int x0 = std::min(a.x, b.x), y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.right(), b.right()), y1 = std::max(a.bottom(), b.bottom());
  return {x0, y0, x1 - x0, y1 - y0};
}

// Grow by `pad` on every side, then clip to a width x height frame.
inline Box pad_and_clip(const Box& b, int pad, int width, int height) {
  const int x0 = std::max(0, b.x - pad), y0 = std::max(0, b.y - pad);
  const int x1 = std::min(width, b.right() + pad), y1 = std::min(height, b.bottom() + pad);
  return {x0, y0, x1 - x0, y1 - y0};
}

template <class Tag>
Raster<Tag> crop(const Raster<Tag>& img, const Box& b) {
  if (b.w <= 0 || b.h <= 0 || b.x < 0 || b.y < 0 || b.right() > img.width() || b.bottom() > img.height())
    throw DimensionError("crop box outside image");
  Raster<Tag> out(b.w, b.h);
  for (int y = 0; y < b.h; ++y) {
    auto src = img.row(b.y + y).subspan(b.x, b.w);
    std::copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

enum class Axis { Row, Column };

// Per-row or per-column ink counts of a BinaryImage.
struct Projection {
  Axis axis = Axis::Row;
  std::vector<int> sums;

  int max() const { return sums.empty() ? 0 : *std::max_element(sums.begin(), sums.end()); }
};

inline long long ink_count(const BinaryImage& img) {
  long long n = 0;
  for (auto v : img.data()) n += v;
  return n;
}

}  // namespace bocr
