#include "vfss/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vfss/error.hpp"
#include "vfss/morphology.hpp"

namespace vfss {

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

/// Separable Gaussian blur with edge clamping, kernel truncated at 4 sigma.
ImageF gaussian_blur(const ImageF& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;

  const int rows = img.rows(), cols = img.cols();
  ImageF tmp(rows, cols), out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * img(r, std::clamp(c + i, 0, cols - 1));
      tmp(r, c) = static_cast<float>(acc);
    }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp(std::clamp(r + i, 0, rows - 1), c);
      out(r, c) = static_cast<float>(acc);
    }
  return out;
}

/// Central differences in the interior, one-sided at the borders.
template <typename Get>
double diff_x(Get get, int r, int c, int cols) {
  if (cols < 2) return 0.0;
  if (c == 0) return get(r, 1) - get(r, 0);
  if (c == cols - 1) return get(r, c) - get(r, c - 1);
  return 0.5 * (get(r, c + 1) - get(r, c - 1));
}

template <typename Get>
double diff_y(Get get, int r, int c, int rows) {
  if (rows < 2) return 0.0;
  if (r == 0) return get(1, c) - get(0, c);
  if (r == rows - 1) return get(r, c) - get(r - 1, c);
  return 0.5 * (get(r + 1, c) - get(r - 1, c));
}

struct EdgeField {
  ImageF g, gx, gy;
  Mask balloon_gate;
};

EdgeField edge_field(const ImageF& frame, const RefineConfig& cfg) {
  EdgeField f;
  f.g = edge_stopping(frame, cfg.gac_smooth_sigma, cfg.gac_edge_scale, cfg.gac_edge_exponent);
  const int rows = frame.rows(), cols = frame.cols();
  f.gx = ImageF(rows, cols);
  f.gy = ImageF(rows, cols);
  f.balloon_gate = Mask(rows, cols, 0);
  auto get = [&](int r, int c) { return double(f.g(r, c)); };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      f.gx(r, c) = static_cast<float>(diff_x(get, r, c, cols));
      f.gy(r, c) = static_cast<float>(diff_y(get, r, c, rows));
      f.balloon_gate(r, c) = f.g(r, c) > cfg.gac_balloon_threshold;
    }
  return f;
}

struct Window {
  int r0, r1, c0, c1;  // half-open
};

std::optional<Window> active_window(const Mask& u, int margin) {
  int r0 = u.rows(), r1 = -1, c0 = u.cols(), c1 = -1;
  for (int r = 0; r < u.rows(); ++r) {
    const auto row = u.row(r);
    for (int c = 0; c < u.cols(); ++c)
      if (row[c]) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  }
  if (r1 < 0) return std::nullopt;
  return Window{std::max(0, r0 - margin), std::min(u.rows(), r1 + margin + 1), std::max(0, c0 - margin),
                std::min(u.cols(), c1 + margin + 1)};
}

inline std::uint8_t at(const Mask& m, int r, int c) { return m.contains(r, c) ? m(r, c) : 0; }

constexpr int kLines[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};

void window_sup_inf(const Mask& in, Mask& out, const Window& w) {
  for (int r = w.r0; r < w.r1; ++r)
    for (int c = w.c0; c < w.c1; ++c) {
      std::uint8_t v = 0;
      if (in(r, c))
        for (const auto& l : kLines)
          if (at(in, r + l[0], c + l[1]) && at(in, r - l[0], c - l[1])) {
            v = 1;
            break;
          }
      out(r, c) = v;
    }
}

void window_inf_sup(const Mask& in, Mask& out, const Window& w) {
  for (int r = w.r0; r < w.r1; ++r)
    for (int c = w.c0; c < w.c1; ++c) {
      std::uint8_t v = 1;
      for (const auto& l : kLines)
        if (!(in(r, c) || at(in, r + l[0], c + l[1]) || at(in, r - l[0], c - l[1]))) {
          v = 0;
          break;
        }
      out(r, c) = v;
    }
}

/// Attachment step on a copy `src` of u, writing into u.
template <typename Range>
void attach(const EdgeField& f, const Mask& src, Mask& u, Range&& rows_cols) {
  const int rows = u.rows(), cols = u.cols();
  auto get = [&](int r, int c) { return double(src(r, c)); };
  rows_cols([&](int r, int c) {
    const double aux = f.gx(r, c) * diff_x(get, r, c, cols) + f.gy(r, c) * diff_y(get, r, c, rows);
    if (aux > 0.0) u(r, c) = 1;
    else if (aux < 0.0) u(r, c) = 0;
  });
}

}  // namespace

void RefineConfig::validate() const {
  if (!(threshold_frac > 0.0 && threshold_frac < 1.0)) throw DataError("threshold_frac must lie in (0, 1)");
  if (k_darkest < 1) throw DataError("k_darkest must be positive");
  if (gac_iterations < 0) throw DataError("gac_iterations must be non-negative");
  if (dilation_radius < 0) throw DataError("dilation_radius must be non-negative");
  if (gac_smooth_sigma < 0.0 || gac_edge_scale < 0.0 || gac_edge_exponent < 0.0)
    throw DataError("GAC edge parameters must be non-negative");
  if (gac_smoothing < 0) throw DataError("gac_smoothing must be non-negative");
  if (!(min_positive_fraction >= 0.0 && min_positive_fraction <= 1.0))
    throw DataError("cam_min_positive_fraction must lie in [0, 1]");
}

Mask binarize_map(const ImageF& map, double threshold_frac) {
  float peak = 0.0f;
  for (float v : map.pixels()) peak = std::max(peak, v);
  if (!(peak > 0.0f)) throw EmptyActivation();
  const double thr = threshold_frac * double(peak);
  Mask out(map.rows(), map.cols(), 0);
  auto src = map.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = double(src[i]) >= thr;
  return out;
}

Mask clean_mask(const Mask& mask, int dilation_radius) {
  if (count_foreground(mask) == 0) throw DataError("cannot clean an empty mask");
  return morph::largest_component(morph::fill_holes(morph::dilate_disk(mask, dilation_radius)));
}

std::vector<Pixel> darkest_k(const ImageF& frame, const Mask& mask, int k) {
  if (frame.rows() != mask.rows() || frame.cols() != mask.cols()) throw DataError("frame and mask sizes differ");
  if (k < 1) throw DataError("k must be positive");
  std::vector<std::pair<float, std::size_t>> cand;
  auto m = mask.pixels();
  auto f = frame.pixels();
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) cand.emplace_back(f[i], i);
  if (cand.empty()) throw DataError("darkest_k needs a nonempty mask");
  const std::size_t take = std::min<std::size_t>(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
  std::vector<Pixel> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.push_back({static_cast<int>(cand[i].second / mask.cols()), static_cast<int>(cand[i].second % mask.cols())});
  return out;
}

ConvexHull convex_hull(const std::vector<Pixel>& points, int rows, int cols) {
  if (points.empty()) throw DataError("convex hull of an empty point set");
  std::vector<Point2> pts;
  pts.reserve(points.size());
  for (const auto& p : points) pts.push_back({double(p.col), double(p.row)});
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());

  ConvexHull hull;
  if (pts.size() <= 2) {
    hull.vertices = pts;
  } else {
    std::vector<Point2> h(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
      while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
      h[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
      while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
      h[k++] = pts[i];
    }
    h.resize(k - 1);
    hull.vertices = std::move(h);
  }

  hull.mask = Mask(rows, cols, 0);
  const auto& v = hull.vertices;
  if (v.size() <= 2) {
    // Degenerate hull: a point or a segment, rasterized 1 px thick.
    const Point2 a = v.front(), b = v.back();
    const int steps = static_cast<int>(std::max(std::abs(b.x - a.x), std::abs(b.y - a.y)));
    for (int s = 0; s <= steps; ++s) {
      const double t = steps ? double(s) / steps : 0.0;
      const int c = static_cast<int>(std::lround(a.x + t * (b.x - a.x)));
      const int r = static_cast<int>(std::lround(a.y + t * (b.y - a.y)));
      if (hull.mask.contains(r, c)) hull.mask(r, c) = 1;
    }
  } else {
    double x0 = v[0].x, x1 = v[0].x, y0 = v[0].y, y1 = v[0].y;
    for (const auto& p : v) {
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    for (int r = std::max(0, int(y0)); r <= std::min(rows - 1, int(y1)); ++r)
      for (int c = std::max(0, int(x0)); c <= std::min(cols - 1, int(x1)); ++c) {
        const Point2 p{double(c), double(r)};
        bool inside = true;
        for (std::size_t i = 0; i < v.size() && inside; ++i) inside = cross(v[i], v[(i + 1) % v.size()], p) >= -1e-9;
        if (inside) hull.mask(r, c) = 1;
      }
  }
  for (const auto& p : points)
    if (hull.mask.contains(p.row, p.col)) hull.mask(p.row, p.col) = 1;
  return hull;
}

ImageF edge_stopping(const ImageF& frame, double sigma, double scale, double exponent) {
  const ImageF s = gaussian_blur(frame, sigma);
  const int rows = frame.rows(), cols = frame.cols();
  ImageF g(rows, cols);
  auto get = [&](int r, int c) { return double(s(r, c)); };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double gx = diff_x(get, r, c, cols), gy = diff_y(get, r, c, rows);
      g(r, c) = static_cast<float>(std::pow(1.0 + scale * (gx * gx + gy * gy), -exponent));
    }
  return g;
}

Mask geodesic_active_contour(const ImageF& frame, const Mask& init, const RefineConfig& config) {
  config.validate();
  if (frame.rows() != init.rows() || frame.cols() != init.cols()) throw DataError("frame and mask sizes differ");
  if (config.gac_iterations == 0) return init;
  const EdgeField f = edge_field(frame, config);
  const int margin = 3 + 2 * config.gac_smoothing;

  Mask u = init;
  Mask tmp = u, tmp2 = u;
  int curv_calls = 0;
  for (int it = 0; it < config.gac_iterations; ++it) {
    const auto win = active_window(u, margin);
    if (!win) break;
    const Window w = *win;
    auto each = [&](auto&& fn) {
      for (int r = w.r0; r < w.r1; ++r)
        for (int c = w.c0; c < w.c1; ++c) fn(r, c);
    };

    if (config.balloon != Balloon::off) {
      tmp = u;
      const bool grow = config.balloon == Balloon::expand;
      each([&](int r, int c) {
        if (!f.balloon_gate(r, c)) return;
        std::uint8_t v = grow ? 0 : 1;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const std::uint8_t n = at(tmp, r + dr, c + dc);
            v = grow ? (v | n) : (v & n);
          }
        u(r, c) = v;
      });
    }

    tmp = u;
    attach(f, tmp, u, each);

    for (int s = 0; s < config.gac_smoothing; ++s, ++curv_calls) {
      tmp = u;
      if (curv_calls % 2 == 0) {
        window_inf_sup(u, tmp, w);
        tmp2 = tmp;
        window_sup_inf(tmp, tmp2, w);
      } else {
        window_sup_inf(u, tmp, w);
        tmp2 = tmp;
        window_inf_sup(tmp, tmp2, w);
      }
      std::swap(u, tmp2);
    }
  }
  return u;
}

Mask geodesic_active_contour_reference(const ImageF& frame, const Mask& init, const RefineConfig& config) {
  config.validate();
  if (frame.rows() != init.rows() || frame.cols() != init.cols()) throw DataError("frame and mask sizes differ");
  if (config.gac_iterations == 0) return init;
  const EdgeField f = edge_field(frame, config);

  Mask u = init;
  int curv_calls = 0;
  for (int it = 0; it < config.gac_iterations; ++it) {
    if (config.balloon != Balloon::off) {
      const Mask aux = config.balloon == Balloon::expand ? morph::dilate3x3(u) : morph::erode3x3(u);
      auto dst = u.pixels();
      auto src = aux.pixels();
      auto gate = f.balloon_gate.pixels();
      for (std::size_t i = 0; i < dst.size(); ++i)
        if (gate[i]) dst[i] = src[i];
    }
    const Mask copy = u;
    attach(f, copy, u, [&](auto&& fn) {
      for (int r = 0; r < u.rows(); ++r)
        for (int c = 0; c < u.cols(); ++c) fn(r, c);
    });
    for (int s = 0; s < config.gac_smoothing; ++s, ++curv_calls)
      u = curv_calls % 2 == 0 ? morph::sup_inf(morph::inf_sup(u)) : morph::inf_sup(morph::sup_inf(u));
  }
  return u;
}

std::pair<Point2, PixelBox> centroid_and_bbox(const Mask& mask) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  PixelBox box{mask.cols(), mask.rows(), -1, -1};
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      sx += c;
      sy += r;
      ++n;
      box.x_min = std::min(box.x_min, c);
      box.x_max = std::max(box.x_max, c);
      box.y_min = std::min(box.y_min, r);
      box.y_max = std::max(box.y_max, r);
    }
  if (n == 0) throw DataError("centroid of an empty mask");
  return {{sx / double(n), sy / double(n)}, box};
}

std::optional<BolusEstimate> localize(const ImageF& frame, const ImageF& map, const RefineConfig& config,
                                      LocalizationStages* stages) {
  config.validate();
  if (frame.rows() != map.rows() || frame.cols() != map.cols())
    throw DataError("frame and activation map must have the same size");
  LocalizationStages local;
  LocalizationStages& s = stages ? *stages : local;
  try {
    s.binary = binarize_map(map, config.threshold_frac);
  } catch (const EmptyActivation&) {
    return std::nullopt;
  }
  s.cleaned = clean_mask(s.binary, config.dilation_radius);
  s.darkest = darkest_k(frame, s.cleaned, config.k_darkest);
  s.hull = convex_hull(s.darkest, frame.rows(), frame.cols());
  s.refined = geodesic_active_contour(frame, s.hull.mask, config);
  if (count_foreground(s.refined) == 0) return std::nullopt;

  BolusEstimate est;
  std::tie(est.centroid, est.bbox) = centroid_and_bbox(s.refined);
  est.mask = s.refined;
  return est;
}

}  // namespace vfss
