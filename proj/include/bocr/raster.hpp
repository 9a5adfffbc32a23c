#pragma once

// Raster primitives: color conversion, filtering, thresholding, geometry,
// morphology, projections and connected components. Everything here is a
// pure function of its inputs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "bocr/error.hpp"
#include "bocr/image.hpp"

namespace bocr {

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

// Interleaved 8-bit RGB -> luminance with BT.601 weights.
inline GrayImage to_grayscale(std::span<const std::uint8_t> rgb, int width, int height) {
  if (width <= 0 || height <= 0) throw DimensionError("to_grayscale: zero-dimension input");
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw DimensionError("to_grayscale: buffer length does not match 3*width*height");
  GrayImage out(width, height);
  auto& d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double l = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
    d[i] = clamp_u8(l);
  }
  return out;
}

// Binary -> displayable luminance (ink black on white).
inline GrayImage render(const BinaryImage& bin) {
  GrayImage out(bin.width(), bin.height());
  std::transform(bin.data().begin(), bin.data().end(), out.data().begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 0 : 255); });
  return out;
}

// Normalized 1-D Gaussian taps, radius ceil(3*sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0)) throw ParameterError("gaussian sigma must be positive");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  for (int i = -r; i <= r; ++i) k[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  const double s = std::accumulate(k.begin(), k.end(), 0.0);
  for (auto& v : k) v /= s;
  return k;
}

namespace detail {

// Separable convolution in double precision with edge replication.
inline std::vector<double> convolve_separable(const std::vector<double>& src, int w, int h,
                                              const std::vector<double>& k) {
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * row[std::clamp(x + i, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

inline std::vector<double> to_double(const GrayImage& img) { return {img.data().begin(), img.data().end()}; }

}  // namespace detail

inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const auto blurred = detail::convolve_separable(detail::to_double(img), img.width(), img.height(), k);
  GrayImage out(img.width(), img.height());
  std::transform(blurred.begin(), blurred.end(), out.data().begin(), clamp_u8);
  return out;
}

// Ink (1) iff luminance < mean(window x window neighborhood) - offset.
// The comparison is done on integer sums so it is exact.
inline BinaryImage adaptive_threshold(const GrayImage& img, int window, int offset) {
  if (window < 3 || window % 2 == 0) throw ParameterError("adaptive_threshold: window must be odd and >= 3");
  const int w = img.width(), h = img.height(), r = window / 2;
  const int pw = w + 2 * r, ph = h + 2 * r;
  // Integral image over the edge-replicated, padded raster.
  std::vector<long long> integral(static_cast<std::size_t>(pw + 1) * (ph + 1), 0);
  for (int y = 0; y < ph; ++y) {
    long long run = 0;
    for (int x = 0; x < pw; ++x) {
      run += img.clamped(x - r, y - r);
      integral[static_cast<std::size_t>(y + 1) * (pw + 1) + x + 1] = integral[static_cast<std::size_t>(y) * (pw + 1) + x + 1] + run;
    }
  }
  const long long n = static_cast<long long>(window) * window;
  BinaryImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Padded coords of window top-left are (x, y); bottom-right exclusive (x+window, y+window).
      const auto at = [&](int px, int py) { return integral[static_cast<std::size_t>(py) * (pw + 1) + px]; };
      const long long sum = at(x + window, y + window) - at(x, y + window) - at(x + window, y) + at(x, y);
      out(x, y) = static_cast<long long>(img(x, y)) * n < sum - static_cast<long long>(offset) * n ? 1 : 0;
    }
  }
  return out;
}

// Rotation about the image center, counter-clockwise on screen for positive
// angles, bilinear interpolation. Samples that fall outside the source take
// `fill`. With `expand` the output grows to hold the whole rotated source.
inline GrayImage rotate(const GrayImage& img, double angle_deg, std::uint8_t fill = 255, bool expand = false) {
  if (angle_deg == 0.0) return img;
  const int w = img.width(), h = img.height();
  const double t = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  int ow = w, oh = h;
  if (expand) {
    ow = static_cast<int>(std::ceil(std::abs(c) * w + std::abs(s) * h - 1e-6));
    oh = static_cast<int>(std::ceil(std::abs(s) * w + std::abs(c) * h - 1e-6));
  }
  GrayImage out(ow, oh, fill);
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double ocx = (ow - 1) / 2.0, ocy = (oh - 1) / 2.0;
  constexpr double eps = 1e-9;
  const std::uint8_t* src = img.data().data();
  for (int y = 0; y < oh; ++y) {
    const double dy = y - ocy;
    // Source position moves by (c, s) per output column.
    double sx = cx - ocx * c - dy * s;
    double sy = cy - ocx * s + dy * c;
    auto row = out.row(y);
    for (int x = 0; x < ow; ++x, sx += c, sy += s) {
      if (sx < -eps || sy < -eps || sx > w - 1 + eps || sy > h - 1 + eps) continue;
      // sx, sy >= -eps here, so truncation is floor up to the clamp.
      const int x0 = std::min(static_cast<int>(sx > 0 ? sx : 0), w - 1);
      const int y0 = std::min(static_cast<int>(sy > 0 ? sy : 0), h - 1);
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = std::clamp(sx - x0, 0.0, 1.0), fy = std::clamp(sy - y0, 0.0, 1.0);
      const std::uint8_t* r0 = src + static_cast<std::size_t>(y0) * w;
      const std::uint8_t* r1 = src + static_cast<std::size_t>(y1) * w;
      const double top = r0[x0] + (r0[x1] - r0[x0]) * fx;
      const double bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
      row[x] = static_cast<std::uint8_t>(top + (bot - top) * fy + 0.5);  // in [0, 255]
    }
  }
  return out;
}

// Bilinear sample with a fill value outside the raster.
inline double sample_bilinear(const GrayImage& img, double sx, double sy, double fill) {
  const int w = img.width(), h = img.height();
  if (sx < 0 || sy < 0 || sx > w - 1 || sy > h - 1) return fill;
  const int x0 = std::min(static_cast<int>(sx), w - 1), y0 = std::min(static_cast<int>(sy), h - 1);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = sx - x0, fy = sy - y0;
  const double top = img(x0, y0) * (1 - fx) + img(x1, y0) * fx;
  const double bot = img(x0, y1) * (1 - fx) + img(x1, y1) * fx;
  return top * (1 - fy) + bot * fy;
}

inline Projection project(const BinaryImage& img, Axis axis) {
  Projection p{axis, std::vector<int>(axis == Axis::Row ? img.height() : img.width(), 0)};
  for (int y = 0; y < img.height(); ++y) {
    const auto row = img.row(y);
    if (axis == Axis::Row) {
      p.sums[y] = static_cast<int>(std::count(row.begin(), row.end(), std::uint8_t{1}));
    } else {
      for (int x = 0; x < img.width(); ++x) p.sums[x] += row[x];
    }
  }
  return p;
}

// Four-stage Canny: Gaussian (sigma 1.4), Sobel, non-maximum suppression over
// four quantized directions, double threshold with 8-connected hysteresis.
inline BinaryImage canny(const GrayImage& img, double low = 50, double high = 150) {
  if (!(low > 0) || !(low < high)) throw ParameterError("canny: require 0 < low < high");
  const int w = img.width(), h = img.height();
  const auto smooth = detail::convolve_separable(detail::to_double(img), w, h, gaussian_kernel(1.4));
  const auto at = [&](int x, int y) {
    return smooth[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };

  std::vector<double> mag(smooth.size());
  std::vector<std::uint8_t> dir(smooth.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
      const double gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) -
                        (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      mag[i] = std::hypot(gx, gy);
      double a = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (a < 0) a += 180.0;
      dir[i] = a < 22.5 || a >= 157.5 ? 0 : a < 67.5 ? 1 : a < 112.5 ? 2 : 3;
    }
  }

  // Neighbor offsets along the gradient for each quantized direction.
  static constexpr std::array<std::array<int, 2>, 4> step{{{1, 0}, {1, 1}, {0, 1}, {-1, 1}}};
  const auto m = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return mag[static_cast<std::size_t>(y) * w + x];
  };
  // 0 none, 1 weak, 2 strong
  std::vector<std::uint8_t> cls(smooth.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double v = mag[i];
      if (v < low) continue;
      const auto [dx, dy] = step[dir[i]];
      if (!(v > m(x + dx, y + dy) && v >= m(x - dx, y - dy))) continue;
      cls[i] = v >= high ? 2 : 1;
    }
  }

  BinaryImage out(w, h);
  std::vector<int> stack;
  for (int i = 0; i < w * h; ++i) {
    if (cls[i] != 2 || out.data()[i]) continue;
    out.data()[i] = 1;
    stack.push_back(i);
    while (!stack.empty()) {
      const int j = stack.back();
      stack.pop_back();
      const int jx = j % w, jy = j / w;
      for (int ny = std::max(0, jy - 1); ny <= std::min(h - 1, jy + 1); ++ny) {
        for (int nx = std::max(0, jx - 1); nx <= std::min(w - 1, jx + 1); ++nx) {
          const int k = ny * w + nx;
          if (cls[k] && !out.data()[k]) {
            out.data()[k] = 1;
            stack.push_back(k);
          }
        }
      }
    }
  }
  return out;
}

enum class Orientation { Horizontal, Vertical };

// 1-D order-statistic filter along `orientation` with edge replication.
// `rank` indexes the sorted window (ascending); the default is the median.
inline BinaryImage rank_filter(const BinaryImage& img, Orientation orientation, int length, int rank = -1) {
  if (length < 3 || length % 2 == 0) throw ParameterError("rank_filter: length must be odd and >= 3");
  if (rank < 0) rank = length / 2;
  if (rank >= length) throw ParameterError("rank_filter: rank must be < length");
  const int w = img.width(), h = img.height(), r = length / 2;
  // The sorted window holds (length - c) zeros then c ones.
  const int need = length - rank;
  BinaryImage out(w, h);
  if (orientation == Orientation::Horizontal) {
    for (int y = 0; y < h; ++y) {
      int c = 0;
      for (int i = -r; i <= r; ++i) c += img.clamped(i, y);
      for (int x = 0; x < w; ++x) {
        out(x, y) = c >= need ? 1 : 0;
        c += img.clamped(x + r + 1, y) - img.clamped(x - r, y);
      }
    }
  } else {
    for (int x = 0; x < w; ++x) {
      int c = 0;
      for (int i = -r; i <= r; ++i) c += img.clamped(x, i);
      for (int y = 0; y < h; ++y) {
        out(x, y) = c >= need ? 1 : 0;
        c += img.clamped(x, y + r + 1) - img.clamped(x, y - r);
      }
    }
  }
  return out;
}

// Binary dilation with a centered kernel_w x kernel_h rectangle. For even
// sizes the extra cell goes right/down.
inline BinaryImage dilate(const BinaryImage& img, int kernel_w, int kernel_h) {
  if (kernel_w < 1 || kernel_h < 1) throw ParameterError("dilate: kernel dims must be >= 1");
  const int w = img.width(), h = img.height();
  const int l = (kernel_w - 1) / 2, rt = kernel_w / 2;
  const int up = (kernel_h - 1) / 2, dn = kernel_h / 2;
  BinaryImage tmp(w, h), out(w, h);
  std::vector<int> pre(w + 1);
  for (int y = 0; y < h; ++y) {
    const auto row = img.row(y);
    for (int x = 0; x < w; ++x) pre[x + 1] = pre[x] + row[x];
    for (int x = 0; x < w; ++x) {
      const int a = std::max(0, x - rt), b = std::min(w, x + l + 1);
      tmp(x, y) = pre[b] - pre[a] > 0 ? 1 : 0;
    }
  }
  std::vector<int> col(h + 1);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y + 1] = col[y] + tmp(x, y);
    for (int y = 0; y < h; ++y) {
      const int a = std::max(0, y - dn), b = std::min(h, y + up + 1);
      out(x, y) = col[b] - col[a] > 0 ? 1 : 0;
    }
  }
  return out;
}

struct Component {
  int id = 0;
  Box box;
  long long count = 0;
};

struct Labeling {
  std::vector<int> labels;  // -1 for background, else component id
  std::vector<Component> components;  // descending pixel count
};

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  int make() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void join(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

// Two-pass 8-connected labeling with union-find. Ids are assigned in raster
// order of each component's first pixel, then components are sorted by
// descending pixel count (ties keep id order).
inline Labeling label_components(const BinaryImage& img) {
  const int w = img.width(), h = img.height();
  std::vector<int> prov(static_cast<std::size_t>(w) * h, -1);
  detail::UnionFind uf;
  const auto lab = [&](int x, int y) { return (x < 0 || y < 0 || x >= w) ? -1 : prov[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!img(x, y)) continue;
      const std::array<int, 4> nb{lab(x - 1, y), lab(x - 1, y - 1), lab(x, y - 1), lab(x + 1, y - 1)};
      int cur = -1;
      for (int n : nb) {
        if (n < 0) continue;
        if (cur < 0) cur = n;
        else uf.join(cur, n);
      }
      if (cur < 0) cur = uf.make();
      prov[static_cast<std::size_t>(y) * w + x] = cur;
    }
  }

  Labeling out;
  out.labels.assign(prov.size(), -1);
  std::vector<int> final_id(uf.parent.size(), -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (prov[i] < 0) continue;
      const int root = uf.find(prov[i]);
      if (final_id[root] < 0) {
        final_id[root] = static_cast<int>(out.components.size());
        out.components.push_back({final_id[root], {x, y, 1, 1}, 0});
      }
      auto& c = out.components[final_id[root]];
      const int x0 = std::min(c.box.x, x), y0 = std::min(c.box.y, y);
      const int x1 = std::max(c.box.right(), x + 1), y1 = std::max(c.box.bottom(), y + 1);
      c.box = {x0, y0, x1 - x0, y1 - y0};
      ++c.count;
      out.labels[i] = c.id;
    }
  }
  std::stable_sort(out.components.begin(), out.components.end(),
                   [](const Component& a, const Component& b) { return a.count > b.count; });
  return out;
}

inline std::vector<Component> connected_components(const BinaryImage& img) {
  return label_components(img).components;
}

// Nearest-neighbor resample of the rows of `img` to `new_height`.
template <class Tag>
Raster<Tag> scale_rows_nearest(const Raster<Tag>& img, int new_height) {
  if (new_height <= 0) throw DimensionError("scale_rows_nearest: height must be positive");
  Raster<Tag> out(img.width(), new_height);
  for (int y = 0; y < new_height; ++y) {
    const int sy = std::min(img.height() - 1, static_cast<int>((y + 0.5) * img.height() / new_height));
    std::copy(img.row(sy).begin(), img.row(sy).end(), out.row(y).begin());
  }
  return out;
}

}  // namespace bocr
