#pragma once

#include <vector>

#include "vfss/image.hpp"

namespace vfss::morph {

/// Pixels outside the image count as background for every operator here.

Mask dilate_disk(const Mask& mask, int radius);
Mask dilate3x3(const Mask& mask);
Mask erode3x3(const Mask& mask);

/// Sets enclosed background (not 4-connected to the image border) to foreground.
Mask fill_holes(const Mask& mask);

struct Component {
  std::size_t area = 0;
  Pixel first;  // first pixel in raster order
  int label = 0;
};

/// 8-connected foreground components; `labels` receives 1-based labels
/// (0 = background). Components are listed in raster order of first pixel.
std::vector<Component> connected_components(const Mask& mask, Image<int>& labels);

/// Largest 8-connected component; equal areas resolve to the component whose
/// first raster pixel comes first. Empty input gives an empty mask.
Mask largest_component(const Mask& mask);

/// Morphological curvature operators on 3-pixel line segments (horizontal,
/// vertical, both diagonals): sup-inf is the union of line erosions,
/// inf-sup the intersection of line dilations.
Mask sup_inf(const Mask& mask);
Mask inf_sup(const Mask& mask);

}  // namespace vfss::morph
