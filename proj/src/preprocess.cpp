#include "vfss/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "vfss/error.hpp"

namespace vfss {

namespace {

constexpr int kBins = 256;
using Lut = std::array<std::uint8_t, kBins>;

/// Reflect-101 index into [0, n) for positions up to one period past the end.
int reflect101(int i, int n) { return n == 1 ? 0 : (i < n ? i : 2 * (n - 1) - i); }

/// Histogram of one tile of the frame padded by reflection at the bottom and
/// right, so every tile has the same area.
Lut tile_lut(const Gray8& frame, int r0, int r1, int c0, int c1, double clip_limit) {
  std::array<int, kBins> hist{};
  for (int r = r0; r < r1; ++r) {
    const int rr = reflect101(r, frame.rows());
    for (int c = c0; c < c1; ++c) ++hist[frame(rr, reflect101(c, frame.cols()))];
  }

  const int area = (r1 - r0) * (c1 - c0);
  const int limit = std::max(1, static_cast<int>(clip_limit * area / kBins));
  int clipped = 0;
  for (int& h : hist) {
    if (h > limit) {
      clipped += h - limit;
      h = limit;
    }
  }
  const int batch = clipped / kBins;
  int residual = clipped - batch * kBins;
  for (int& h : hist) h += batch;
  if (residual > 0) {
    const int step = std::max(kBins / residual, 1);
    for (int i = 0; i < kBins && residual > 0; i += step, --residual) ++hist[i];
  }

  Lut lut{};
  const double scale = 255.0 / area;
  int sum = 0;
  for (int i = 0; i < kBins; ++i) {
    sum += hist[i];
    lut[i] = static_cast<std::uint8_t>(std::clamp(std::lround(sum * scale), 0L, 255L));
  }
  return lut;
}

/// Tile index below `x` and interpolation weight toward the next tile.
struct Blend {
  int lo, hi;
  double w;
};

std::vector<Blend> blend_axis(int n, int tiles, int tile) {
  std::vector<double> centers(tiles);
  for (int t = 0; t < tiles; ++t) centers[t] = t * tile + 0.5 * (tile - 1);
  std::vector<Blend> out(n);
  for (int x = 0; x < n; ++x) {
    if (x <= centers.front()) {
      out[x] = {0, 0, 0.0};
    } else if (x >= centers.back()) {
      out[x] = {tiles - 1, tiles - 1, 0.0};
    } else {
      int t = 0;
      while (centers[t + 1] < x) ++t;
      out[x] = {t, t + 1, (x - centers[t]) / (centers[t + 1] - centers[t])};
    }
  }
  return out;
}

}  // namespace

Pixel crop_offset(int rows, int cols, int size) { return {(rows - size) / 2, (cols - size) / 2}; }

Gray8 center_crop(const Gray8& frame, int size) {
  if (size <= 0) throw DataError("crop size must be positive");
  if (frame.rows() < size || frame.cols() < size)
    throw DataError("frame " + std::to_string(frame.rows()) + "x" + std::to_string(frame.cols()) +
                    " is smaller than crop size " + std::to_string(size));
  const Pixel off = crop_offset(frame.rows(), frame.cols(), size);
  Gray8 out(size, size);
  for (int r = 0; r < size; ++r) {
    const auto src = frame.row(off.row + r).subspan(off.col, size);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Gray8 clahe(const Gray8& frame, const ClaheParams& params) {
  if (!(params.clip_limit > 0.0) || params.tiles_x <= 0 || params.tiles_y <= 0)
    throw DataError("CLAHE clip limit and tile grid must be positive");
  const int rows = frame.rows(), cols = frame.cols();
  if (rows < params.tiles_y || cols < params.tiles_x) throw DataError("image smaller than the CLAHE tile grid");

  const int ty = params.tiles_y, tx = params.tiles_x;
  const int th = (rows + ty - 1) / ty, tw = (cols + tx - 1) / tx;
  if (th * ty - rows >= rows || tw * tx - cols >= cols) throw DataError("image too small for the CLAHE tile grid");
  std::vector<Lut> luts(static_cast<std::size_t>(ty) * tx);
  for (int i = 0; i < ty; ++i)
    for (int j = 0; j < tx; ++j)
      luts[i * tx + j] = tile_lut(frame, i * th, (i + 1) * th, j * tw, (j + 1) * tw, params.clip_limit);

  const auto by = blend_axis(rows, ty, th);
  const auto bx = blend_axis(cols, tx, tw);
  Gray8 out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const Blend& v = by[r];
    for (int c = 0; c < cols; ++c) {
      const Blend& h = bx[c];
      const std::uint8_t px = frame(r, c);
      const double top = (1.0 - h.w) * luts[v.lo * tx + h.lo][px] + h.w * luts[v.lo * tx + h.hi][px];
      const double bottom = (1.0 - h.w) * luts[v.hi * tx + h.lo][px] + h.w * luts[v.hi * tx + h.hi][px];
      const double value = (1.0 - v.w) * top + v.w * bottom;
      out(r, c) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
    }
  }
  return out;
}

ImageF normalize(const Gray8& frame, int expected_side) {
  if (frame.rows() != expected_side || frame.cols() != expected_side)
    throw DataError("normalize expects a " + std::to_string(expected_side) + "x" + std::to_string(expected_side) +
                    " frame");
  ImageF out(frame.rows(), frame.cols());
  auto src = frame.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i] / 255.0);
  return out;
}

ImageF resize_bilinear(const ImageF& image, int rows, int cols) {
  if (rows <= 0 || cols <= 0 || image.empty()) throw DataError("invalid resize dimensions");
  if (rows == image.rows() && cols == image.cols()) return image;

  auto axis = [](int out_n, int in_n) {
    std::vector<std::pair<int, double>> a(out_n);
    const double scale = static_cast<double>(in_n) / out_n;
    for (int i = 0; i < out_n; ++i) {
      double s = (i + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in_n - 1));
      const int i0 = std::min(static_cast<int>(s), in_n - 1);
      a[i] = {i0, s - i0};
    }
    return a;
  };
  const auto ay = axis(rows, image.rows());
  const auto ax = axis(cols, image.cols());
  ImageF out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto [y0, fy] = ay[r];
    const int y1 = std::min(y0 + 1, image.rows() - 1);
    for (int c = 0; c < cols; ++c) {
      const auto [x0, fx] = ax[c];
      const int x1 = std::min(x0 + 1, image.cols() - 1);
      const double top = (1.0 - fx) * image(y0, x0) + fx * image(y0, x1);
      const double bottom = (1.0 - fx) * image(y1, x0) + fx * image(y1, x1);
      out(r, c) = static_cast<float>((1.0 - fy) * top + fy * bottom);
    }
  }
  return out;
}

ImageF resize_to_net(const ImageF& frame, int side) {
  if (side < 32) throw DataError("network input side must be at least 32");
  ImageF out = resize_bilinear(frame, side, side);
  for (float& v : out.pixels()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

ImageF preprocess_frame(const Gray8& raw, const ClaheParams& params) {
  return normalize(clahe(center_crop(raw, kCropSide), params), kCropSide);
}

}  // namespace vfss
