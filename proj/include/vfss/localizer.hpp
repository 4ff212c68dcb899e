#pragma once

#include <optional>
#include <vector>

#include "vfss/cam.hpp"
#include "vfss/image.hpp"

namespace vfss {

enum class Balloon { expand, contract, off };

struct RefineConfig {
  double threshold_frac = 0.5;
  int k_darkest = 100;
  int gac_iterations = 100;
  int dilation_radius = 2;
  double gac_smooth_sigma = 2.0;
  double gac_edge_scale = 100.0;
  double gac_edge_exponent = 0.5;
  /// Balloon force acts only where the edge function exceeds this value.
  double gac_balloon_threshold = 0.9;
  int gac_smoothing = 1;
  Balloon balloon = Balloon::expand;
  /// Frames whose Grad-CAM positive fraction is below this are reported as
  /// not detected (the map is mostly evidence against the class).
  double min_positive_fraction = 0.5;

  void validate() const;
};

/// Inclusive pixel bounding box.
struct PixelBox {
  int x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  bool operator==(const PixelBox&) const = default;
};

struct BolusEstimate {
  Mask mask;
  Point2 centroid;  // x = column, y = row
  PixelBox bbox;
  int frame_id = -1;
};

/// True where map >= threshold_frac * max(map). Throws EmptyActivation for
/// an identically zero map.
Mask binarize_map(const ImageF& map, double threshold_frac);

/// Disk dilation, hole filling, then the largest 8-connected component.
Mask clean_mask(const Mask& mask, int dilation_radius);

/// The k darkest masked pixels (ties in raster order); all of them when the
/// mask holds fewer than k.
std::vector<Pixel> darkest_k(const ImageF& frame, const Mask& mask, int k);

struct ConvexHull {
  /// Counterclockwise in (x = column, y = row) coordinates, i.e. positive
  /// signed area; no collinear vertices.
  std::vector<Point2> vertices;
  Mask mask;
};

/// Hull of pixel centers and its filled mask (pixels whose centers lie in or
/// on the hull). Collinear input is rasterized as a 1-px-thick segment.
ConvexHull convex_hull(const std::vector<Pixel>& points, int rows, int cols);

/// Edge-stopping function g = (1 + scale * |grad(G_sigma * frame)|^2)^(-exponent).
ImageF edge_stopping(const ImageF& frame, double sigma, double scale, double exponent);

/// Morphological geodesic active contour: per iteration a balloon step gated
/// by g, the image-attachment step (sign of grad g . grad u), then
/// `gac_smoothing` passes of the alternating SI o IS / IS o SI curvature
/// operator. Evolution is restricted to a window around the current region,
/// which is exact because every step is local.
Mask geodesic_active_contour(const ImageF& frame, const Mask& init, const RefineConfig& config);

/// Same evolution on the whole frame using the plain morphology operators;
/// kept as the reference for the windowed implementation.
Mask geodesic_active_contour_reference(const ImageF& frame, const Mask& init, const RefineConfig& config);

/// Mean foreground coordinates and tight bounding box. Throws on empty masks.
std::pair<Point2, PixelBox> centroid_and_bbox(const Mask& mask);

/// Every intermediate of localize(), for inspection and tests.
struct LocalizationStages {
  Mask binary;
  Mask cleaned;
  std::vector<Pixel> darkest;
  ConvexHull hull;
  Mask refined;
};

/// binarize -> clean -> darkest_k -> convex_hull -> GAC -> centroid/bbox.
/// `frame` and `map` must both be 341x341 (or any common size).
/// Returns nullopt when the activation map is identically zero.
std::optional<BolusEstimate> localize(const ImageF& frame, const ImageF& map, const RefineConfig& config,
                                      LocalizationStages* stages = nullptr);

}  // namespace vfss
