#pragma once

// Page-level normalization: crop to the text region, skew correction, span
// detection and dewarping, denoising and binarization.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "bocr/error.hpp"
#include "bocr/image.hpp"
#include "bocr/optimize.hpp"
#include "bocr/raster.hpp"

namespace bocr {

// ---------------------------------------------------------------------------
// Photometric stages

inline GrayImage denoise(const GrayImage& img, double sigma = 0.8) { return gaussian_blur(img, sigma); }

struct BinarizeOptions {
  int window = 31;
  int offset = 15;
};

inline BinaryImage binarize(const GrayImage& img, const BinarizeOptions& opt = {}) {
  return adaptive_threshold(img, opt.window, opt.offset);
}

// ---------------------------------------------------------------------------
// Cropping

struct CropOptions {
  double canny_low = 50;
  double canny_high = 150;
  // 1-D rank filters keep an edge pixel only if at least `rank_support` edge
  // pixels fall in its `rank_length` window, vertically and then horizontally.
  int rank_length = 21;
  int rank_support = 4;
  int min_component = 10;
  int margin = 5;
};

struct CropReport {
  Box crop_box;
  long long edge_count_before = 0;
  long long edge_count_after = 0;
};

struct CropResult {
  GrayImage image;
  CropReport report;
};

// Canny edges, then vertical and horizontal rank filtering to strip thin
// border lines. Filtered components of at least min_component pixels seed
// the text region; the crop box is the union of the raw edge components
// containing a seed, padded by margin.
inline CropResult crop_to_text(const GrayImage& img, const CropOptions& opt = {}) {
  if (std::min(img.width(), img.height()) < 64) throw DimensionError("crop_to_text: image must be at least 64 px on each side");
  if (opt.rank_support < 1 || opt.rank_support > opt.rank_length)
    throw ParameterError("crop_to_text: rank_support must be in [1, rank_length]");
  const auto edges = canny(img, opt.canny_low, opt.canny_high);
  const int rank = opt.rank_length - opt.rank_support;
  auto filtered = rank_filter(edges, Orientation::Vertical, opt.rank_length, rank);
  filtered = rank_filter(filtered, Orientation::Horizontal, opt.rank_length, rank);
  // Order statistics can switch on pixels next to dense edges; keep only real edges.
  for (std::size_t i = 0; i < filtered.size(); ++i) filtered.data()[i] &= edges.data()[i];

  CropReport report;
  report.edge_count_before = ink_count(edges);
  report.edge_count_after = ink_count(filtered);
  const auto raw = label_components(edges);
  const auto seeds = label_components(filtered);
  std::vector<char> hit(raw.components.size(), 0);
  std::vector<int> index_of(raw.components.size(), -1);
  for (std::size_t i = 0; i < raw.components.size(); ++i) index_of[raw.components[i].id] = static_cast<int>(i);
  std::vector<char> seed_ok(seeds.components.size(), 0);
  for (const auto& c : seeds.components)
    if (c.count >= opt.min_component) seed_ok[c.id] = 1;
  for (std::size_t i = 0; i < seeds.labels.size(); ++i)
    if (seeds.labels[i] >= 0 && seed_ok[seeds.labels[i]]) hit[index_of[raw.labels[i]]] = 1;
  Box box;
  for (std::size_t i = 0; i < raw.components.size(); ++i)
    if (hit[i]) box = unite(box, raw.components[i].box);
  if (box.w <= 0 || box.h <= 0) throw EmptyPageError();
  report.crop_box = pad_and_clip(box, opt.margin, img.width(), img.height());
  return {crop(img, report.crop_box), report};
}

// ---------------------------------------------------------------------------
// Skew

enum class SkewScoring {
  MaxPeak,        // highest row-projection value
  PeakDifference  // largest jump between adjacent rows of the projection
};

struct SkewOptions {
  double range_deg = 5.0;
  double step_deg = 0.25;
  BinarizeOptions binarize;
  SkewScoring scoring = SkewScoring::MaxPeak;
};

struct SkewCandidate {
  double angle = 0;
  double score = 0;
};

struct SkewReport {
  double best_angle = 0;
  double peak_score = 0;
  std::vector<SkewCandidate> scores;  // ascending angle
};

struct SkewResult {
  GrayImage image;
  SkewReport report;
};

inline double skew_score(const BinaryImage& bin, SkewScoring scoring) {
  const auto p = project(bin, Axis::Row);
  if (scoring == SkewScoring::MaxPeak) return p.max();
  int best = 0;
  for (std::size_t i = 1; i < p.sums.size(); ++i) best = std::max(best, std::abs(p.sums[i] - p.sums[i - 1]));
  return best;
}

// Tries every candidate angle in [-range, +range] and keeps the one whose
// binarized row projection scores highest. Ties go to the smallest |angle|,
// negative first. The returned page is enlarged to hold the rotated corners.
inline SkewResult correct_skew(const GrayImage& img, const SkewOptions& opt = {}) {
  if (!(opt.step_deg > 0) || opt.range_deg < 0) throw ParameterError("correct_skew: step must be positive");
  const int n = static_cast<int>(std::floor(opt.range_deg / opt.step_deg + 1e-9));
  SkewReport report;
  for (int i = -n; i <= n; ++i) {
    const double a = i * opt.step_deg;
    report.scores.push_back({a, skew_score(binarize(rotate(img, a), opt.binarize), opt.scoring)});
  }
  std::vector<SkewCandidate> by_preference = report.scores;
  std::stable_sort(by_preference.begin(), by_preference.end(), [](const SkewCandidate& a, const SkewCandidate& b) {
    if (std::abs(a.angle) != std::abs(b.angle)) return std::abs(a.angle) < std::abs(b.angle);
    return a.angle < b.angle;
  });
  SkewCandidate best = by_preference.front();
  for (const auto& c : by_preference)
    if (c.score > best.score) best = c;
  report.best_angle = best.angle;
  report.peak_score = best.score;
  return {rotate(img, best.angle, 255, true), std::move(report)};
}

// ---------------------------------------------------------------------------
// Spans

struct Point2 {
  double x = 0;
  double y = 0;
};

struct Span {
  int line_id = 0;
  std::vector<Point2> keypoints;  // x strictly increasing
};

struct SpanOptions {
  int kernel_w = 21;
  int kernel_h = 3;
  double max_height_factor = 3.0;
  double min_width_fraction = 0.05;
  int step = 20;
};

// Dilate so the words of one line merge, then sample the vertical centroid
// of each line component at fixed column intervals.
inline std::vector<Span> detect_spans(const BinaryImage& bin, const SpanOptions& opt = {}) {
  const auto lab = label_components(dilate(bin, opt.kernel_w, opt.kernel_h));
  std::vector<Component> wide;
  for (const auto& c : lab.components)
    if (c.box.w >= opt.min_width_fraction * bin.width()) wide.push_back(c);
  if (wide.empty()) throw NoTextError("detect_spans: no text lines");
  std::vector<int> heights;
  for (const auto& c : wide) heights.push_back(c.box.h);
  std::nth_element(heights.begin(), heights.begin() + heights.size() / 2, heights.end());
  const double median_h = heights[heights.size() / 2];

  std::vector<std::pair<double, Span>> found;
  for (const auto& c : wide) {
    if (c.box.h > opt.max_height_factor * median_h) continue;
    // Skip the dilation fringe at both ends.
    const int x0 = c.box.x + opt.kernel_w / 2, x1 = c.box.right() - 1 - opt.kernel_w / 2;
    std::vector<int> xs;
    if (x1 - x0 >= opt.step) {
      const int n = (x1 - x0) / opt.step;
      const int start = x0 + ((x1 - x0) - n * opt.step) / 2;
      for (int i = 0; i <= n; ++i) xs.push_back(start + i * opt.step);
    } else {
      xs = {c.box.x, c.box.right() - 1};
      if (x1 > x0) xs = {x0, x1};
    }
    Span span;
    double ysum = 0;
    for (int x : xs) {
      // Centroid of the component's column with interior holes filled.
      int top = -1, bottom = -1;
      for (int y = c.box.y; y < c.box.bottom(); ++y) {
        if (lab.labels[static_cast<std::size_t>(y) * bin.width() + x] == c.id) {
          if (top < 0) top = y;
          bottom = y;
        }
      }
      if (top < 0) continue;
      span.keypoints.push_back({static_cast<double>(x), 0.5 * (top + bottom)});
      ysum += span.keypoints.back().y;
    }
    if (span.keypoints.size() < 2) continue;
    found.emplace_back(ysum / span.keypoints.size(), std::move(span));
  }
  if (found.empty()) throw NoTextError("detect_spans: no text lines");
  std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Span> spans;
  for (auto& [y, s] : found) {
    s.line_id = static_cast<int>(spans.size());
    spans.push_back(std::move(s));
  }
  return spans;
}

// Pooled RMS distance of keypoints from their span's mean row, in pixels.
inline double straightness_rms(const std::vector<Span>& spans) {
  double acc = 0;
  std::size_t n = 0;
  for (const auto& s : spans) {
    double mean = 0;
    for (const auto& p : s.keypoints) mean += p.y;
    mean /= static_cast<double>(s.keypoints.size());
    for (const auto& p : s.keypoints) acc += (p.y - mean) * (p.y - mean);
    n += s.keypoints.size();
  }
  return n ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
}

// ---------------------------------------------------------------------------
// Dewarping

struct DewarpParams {
  double alpha = 0;  // sheet slope at the left page edge
  double beta = 0;   // sheet slope at the right page edge
  std::array<double, 3> rot{};    // Rodrigues vector, radians
  std::array<double, 3> trans{};  // normalized page units
  std::vector<double> span_offsets;
  double focal = 1.2;
};

struct DewarpOptions {
  double focal = 1.2;
  double initial_pitch = 0.3;  // radians; lets sheet depth show up as vertical shift
  double tol = 1e-6;           // px^2
  int max_iter = 3000;
  // Apply the remap only when the fit beats the input by both margins.
  double min_gain_px = 0.25;
  double max_ratio = 0.9;
  // Re-detect spans on the output and fall back to the input if straightness
  // got worse than this factor.
  double verify_factor = 1.05;
  BinarizeOptions verify_binarize;
  double verify_blur_sigma = 0.8;  // 0 skips the blur
  SpanOptions verify_spans;
};

struct DewarpResult {
  GrayImage image;
  double residual = 0;   // RMS px; the input straightness when not applied
  double input_rms = 0;
  bool applied = false;
  bool warning = false;  // optimizer failure or verification fallback
  DewarpParams params;
  int iterations = 0;
};

// Cubic-sheet page surface seen by a scaled-orthographic camera. Page point
// (u, v) lifts to (u, v, z(u)) with z(u) = Wn * g(s), s = (u - u0) / Wn in
// [0,1], and g the cubic with g(0) = g(1) = 0, g'(0) = alpha, g'(1) = beta.
class CubicSheetModel {
 public:
  CubicSheetModel(int width, int height, double focal)
      : width_(width), height_(height), focal_(focal), scale_(2.0 / std::max(width, height)) {
    u0_ = -0.5 * width * scale_;
    wn_ = width * scale_;
  }

  static constexpr std::size_t kGlobalParams = 8;  // rot(3), trans(3), alpha, beta

  double to_norm_x(double px) const { return (px - 0.5 * width_) * scale_; }
  double to_norm_y(double py) const { return (py - 0.5 * height_) * scale_; }
  double to_px_y(double ny) const { return ny / scale_ + 0.5 * height_; }
  double px_per_unit() const { return 1.0 / scale_; }

  void set(const std::vector<double>& p) {
    const double th = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    std::array<double, 3> k{0, 0, 0};
    if (th > 1e-12) k = {p[0] / th, p[1] / th, p[2] / th};
    const double c = std::cos(th), s = std::sin(th), v = 1 - c;
    r_ = {{{c + k[0] * k[0] * v, k[0] * k[1] * v - k[2] * s, k[0] * k[2] * v + k[1] * s},
           {k[1] * k[0] * v + k[2] * s, c + k[1] * k[1] * v, k[1] * k[2] * v - k[0] * s},
           {k[2] * k[0] * v - k[1] * s, k[2] * k[1] * v + k[0] * s, c + k[2] * k[2] * v}}};
    t_ = {p[3], p[4], p[5]};
    alpha_ = p[6];
    beta_ = p[7];
    k_ = p[5] > 1e-6 ? focal_ / p[5] : std::numeric_limits<double>::quiet_NaN();
  }

  bool valid() const { return std::isfinite(k_); }

  double z(double u) const {
    const double s = (u - u0_) / wn_;
    return wn_ * (((alpha_ + beta_) * s - (2 * alpha_ + beta_)) * s + alpha_) * s;
  }
  double dz(double u) const {
    const double s = (u - u0_) / wn_;
    return (3 * (alpha_ + beta_) * s - 2 * (2 * alpha_ + beta_)) * s + alpha_;
  }

  // Page u whose image lands on normalized column x for page row v.
  double solve_u(double x, double v) const {
    double u = x;
    for (int i = 0; i < 6; ++i) {
      const double f = k_ * (r_[0][0] * u + r_[0][1] * v + r_[0][2] * z(u) + t_[0]) - x;
      const double d = k_ * (r_[0][0] + r_[0][2] * dz(u));
      if (std::abs(d) < 1e-9) break;
      const double step = f / d;
      u -= step;
      if (std::abs(step) < 1e-12) break;
    }
    return u;
  }

  // Normalized image row of page point (u, v).
  double image_y(double u, double v) const { return k_ * (r_[1][0] * u + r_[1][1] * v + r_[1][2] * z(u) + t_[1]); }

  // Image row at normalized column x for page row v.
  double row_at(double x, double v) const { return image_y(solve_u(x, v), v); }

  // dy/dv along a fixed image column.
  double drow_dv(double x, double v) const {
    const double u = solve_u(x, v);
    const double du_dv = -r_[0][1] / (r_[0][0] + r_[0][2] * dz(u));
    return k_ * (r_[1][1] + (r_[1][0] + r_[1][2] * dz(u)) * du_dv);
  }

 private:
  int width_, height_;
  double focal_, scale_, u0_ = 0, wn_ = 1;
  std::array<std::array<double, 3>, 3> r_{};
  std::array<double, 3> t_{};
  double alpha_ = 0, beta_ = 0, k_ = 1;
};

namespace detail {

struct NormSpan {
  std::vector<double> x, y;  // normalized
};

// Per-span page row that best explains the span's keypoints (Gauss-Newton on
// the single offset), and the resulting squared residuals in normalized units.
inline double fit_span_offset(const CubicSheetModel& m, const NormSpan& s, double& v, double& sq) {
  for (int it = 0; it < 4; ++it) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double r = s.y[i] - m.row_at(s.x[i], v);
      const double d = m.drow_dv(s.x[i], v);
      num += d * r;
      den += d * d;
    }
    if (!(den > 0)) break;
    v += num / den;
  }
  sq = 0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const double r = s.y[i] - m.row_at(s.x[i], v);
    sq += r * r;
  }
  return v;
}

// Solve small dense normal equations by Gaussian elimination with pivoting.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    if (std::abs(a[c][c]) < 1e-15) continue;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(a[i][i]) >= 1e-15) x[i] = b[i] / a[i][i];
  return x;
}

}  // namespace detail

// Fits a cubic-sheet model to the spans with Nelder-Mead and resamples the
// page so every span midline becomes a horizontal line. Columns are kept in
// place; only rows move.
inline DewarpResult dewarp_page(const GrayImage& img, const std::vector<Span>& spans, const DewarpOptions& opt = {}) {
  DewarpResult result;
  result.image = img;
  result.params.focal = opt.focal;
  result.input_rms = straightness_rms(spans);
  result.residual = result.input_rms;

  std::vector<const Span*> usable;
  for (const auto& s : spans)
    if (s.keypoints.size() >= 3) usable.push_back(&s);
  if (usable.size() < 2) {
    result.residual = 0;
    return result;
  }

  CubicSheetModel model(img.width(), img.height(), opt.focal);
  std::vector<detail::NormSpan> norm;
  std::size_t total_kp = 0;
  for (const auto* s : usable) {
    detail::NormSpan ns;
    for (const auto& p : s->keypoints) {
      ns.x.push_back(model.to_norm_x(p.x));
      ns.y.push_back(model.to_norm_y(p.y));
    }
    total_kp += ns.x.size();
    norm.push_back(std::move(ns));
  }

  // Initial estimate from the average span shape: with pitch phi, the sheet
  // depth appears as a vertical shift of about -sin(phi) * z. Least squares
  // on the cubic basis (plus a tilt term and one offset per span) gives the
  // slopes and roll directly.
  const double phi = opt.initial_pitch;
  const double wn = img.width() * 2.0 / std::max(img.width(), img.height());
  const double u0 = -0.5 * wn;
  const std::size_t ns = norm.size(), dim = 3 + ns;
  std::vector<std::vector<double>> ata(dim, std::vector<double>(dim, 0.0));
  std::vector<double> atb(dim, 0.0);
  for (std::size_t k = 0; k < ns; ++k) {
    for (std::size_t i = 0; i < norm[k].x.size(); ++i) {
      const double s = (norm[k].x[i] - u0) / wn;
      std::vector<double> row(dim, 0.0);
      row[0] = s * s * s - 2 * s * s + s;
      row[1] = s * s * s - s * s;
      row[2] = norm[k].x[i];
      row[3 + k] = 1;
      for (std::size_t a = 0; a < dim; ++a) {
        atb[a] += row[a] * norm[k].y[i];
        for (std::size_t b = 0; b < dim; ++b) ata[a][b] += row[a] * row[b];
      }
    }
  }
  const auto coef = detail::solve_dense(ata, atb);
  const double depth_gain = std::sin(phi) * wn;
  std::vector<double> x0{phi, 0.0, coef[2], 0.0, 0.0, opt.focal, -coef[0] / depth_gain, -coef[1] / depth_gain};

  std::vector<double> offsets(ns, 0.0);
  const auto initial_offsets = [&] {
    for (std::size_t k = 0; k < ns; ++k) {
      double mean = 0;
      for (double y : norm[k].y) mean += y;
      offsets[k] = mean / static_cast<double>(norm[k].y.size()) / std::cos(phi);
    }
  };
  initial_offsets();
  const double px2 = model.px_per_unit() * model.px_per_unit();
  const auto objective = [&](const std::vector<double>& p) {
    CubicSheetModel m(img.width(), img.height(), opt.focal);
    m.set(p);
    if (!m.valid()) return std::numeric_limits<double>::infinity();
    double total = 0;
    for (std::size_t k = 0; k < ns; ++k) {
      double v = offsets[k], sq = 0;
      detail::fit_span_offset(m, norm[k], v, sq);
      if (!std::isfinite(v) || !std::isfinite(sq)) return std::numeric_limits<double>::infinity();
      offsets[k] = v;  // warm start for the next evaluation
      total += sq;
    }
    return total / static_cast<double>(total_kp) * px2;
  };

  Optimum best;
  try {
    NelderMeadOptions nm;
    nm.tol = opt.tol;
    nm.max_iter = opt.max_iter;
    best = minimize(objective, x0, nm);
  } catch (const ParameterError&) {
    result.warning = true;
    return result;
  }
  result.iterations = best.iterations;
  if (!std::isfinite(best.value)) {
    result.warning = true;
    return result;
  }
  // Offsets were warm-started along the way; settle them at the optimum.
  initial_offsets();
  const double fitted = std::sqrt(objective(best.params));
  model.set(best.params);
  result.params.rot = {best.params[0], best.params[1], best.params[2]};
  result.params.trans = {best.params[3], best.params[4], best.params[5]};
  result.params.alpha = best.params[6];
  result.params.beta = best.params[7];
  for (const auto& s : spans) {
    detail::NormSpan one;
    for (const auto& p : s.keypoints) {
      one.x.push_back(model.to_norm_x(p.x));
      one.y.push_back(model.to_norm_y(p.y));
    }
    double mean = 0;
    for (double y : one.y) mean += y;
    double v = one.y.empty() ? 0.0 : mean / static_cast<double>(one.y.size()) / std::cos(phi), sq = 0;
    if (!one.y.empty()) detail::fit_span_offset(model, one, v, sq);
    result.params.span_offsets.push_back(v);
  }
  if (!std::isfinite(fitted)) {
    result.warning = true;
    return result;
  }
  if (!(fitted <= opt.max_ratio * result.input_rms && result.input_rms - fitted >= opt.min_gain_px)) return result;

  // Output row y_out shows page row v where the column-averaged image row of
  // v equals y_out; each column then samples its own image row of v.
  const int w = img.width(), h = img.height();
  std::vector<double> ref_cols;
  for (int x = 0; x < w; x += 8) ref_cols.push_back(model.to_norm_x(x));
  const auto ref_row = [&](double v) {
    double acc = 0;
    for (double x : ref_cols) acc += model.row_at(x, v);
    return acc / static_cast<double>(ref_cols.size());
  };
  const auto ref_slope = [&](double v) {
    double acc = 0;
    for (double x : ref_cols) acc += model.drow_dv(x, v);
    return acc / static_cast<double>(ref_cols.size());
  };
  std::vector<double> v_of_row(h);
  double v = 0;
  for (int y = 0; y < h; ++y) {
    const double target = model.to_norm_y(y);
    for (int it = 0; it < 5; ++it) {
      const double d = ref_slope(v);
      if (!(std::abs(d) > 1e-9)) break;
      const double step = (target - ref_row(v)) / d;
      v += step;
      if (std::abs(step) < 1e-12) break;
    }
    v_of_row[y] = v;
  }
  GrayImage out(w, h, 255);
  for (int x = 0; x < w; ++x) {
    const double nx = model.to_norm_x(x);
    for (int y = 0; y < h; ++y) {
      const double sy = model.to_px_y(model.row_at(nx, v_of_row[y]));
      if (!std::isfinite(sy)) continue;
      out(x, y) = clamp_u8(sample_bilinear(img, x, sy, 255));
    }
  }

  if (opt.verify_factor > 0) {
    double after = std::numeric_limits<double>::infinity();
    try {
      const GrayImage& probe = opt.verify_blur_sigma > 0 ? denoise(out, opt.verify_blur_sigma) : out;
      after = straightness_rms(detect_spans(binarize(probe, opt.verify_binarize), opt.verify_spans));
    } catch (const NoTextError&) {
    }
    if (!(after <= opt.verify_factor * result.input_rms)) {
      result.warning = true;
      return result;
    }
  }
  result.image = std::move(out);
  result.residual = fitted;
  result.applied = true;
  return result;
}

}  // namespace bocr
