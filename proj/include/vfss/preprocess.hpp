#pragma once

#include "vfss/image.hpp"

namespace vfss {

/// Side of the square region cropped from the center of each raw frame.
inline constexpr int kCropSide = 341;

struct ClaheParams {
  double clip_limit = 2.0;  // relative to a uniform histogram, as in common CLAHE implementations
  int tiles_x = 8;
  int tiles_y = 8;
};

struct PreprocessParams {
  ClaheParams clahe;
  int net_side = 224;
};

/// Top-left offset (row, col) of the centered `size` window, floor rule.
Pixel crop_offset(int rows, int cols, int size = kCropSide);

Gray8 center_crop(const Gray8& frame, int size = kCropSide);

/// Contrast-limited adaptive histogram equalization: per-tile histograms
/// clipped at clip_limit * tile_area / 256 with the excess redistributed
/// uniformly, tile mappings blended bilinearly between tile centers.
Gray8 clahe(const Gray8& frame, const ClaheParams& params);

/// Divides by 255. Requires an `expected_side` square frame.
ImageF normalize(const Gray8& frame, int expected_side = kCropSide);

/// Bilinear resize with half-pixel centers and edge clamping.
ImageF resize_bilinear(const ImageF& image, int rows, int cols);

/// Bilinear resize to side x side, clamped to [0, 1]. side >= 32.
ImageF resize_to_net(const ImageF& frame, int side);

/// center_crop -> clahe -> normalize. Returns the 341x341 frame.
ImageF preprocess_frame(const Gray8& raw, const ClaheParams& params);

}  // namespace vfss
