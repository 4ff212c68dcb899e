#pragma once

#include "vfss/image.hpp"

namespace vfss {

/// Anterior-inferior corners of the C2 and C4 vertebrae, in pixel
/// coordinates of the cropped frame (x right, y down).
struct SpineLandmarks {
  Point2 c2;
  Point2 c4;
};

/// Rigid anatomical frame: origin at C4, y axis along C4 -> C2, x axis
/// perpendicular to it.
///
/// By default unit_x is unit_y rotated by -90 degrees in image coordinates,
/// i.e. (ux, uy) = (vy, -vx) for unit_y = (vx, vy). For an upright spine
/// (unit_y pointing up the image) this makes x' grow toward the left of the
/// image, which is anterior for a left-facing lateral projection. The basis
/// satisfies cross(unit_x, unit_y) = +1. `flip_x` negates unit_x for
/// right-facing projections (the basis then becomes left-handed).
struct SpineTransform {
  Point2 origin;
  Point2 unit_x;
  Point2 unit_y;
  double distance = 0.0;  // |C2 - C4| in px
};

SpineTransform spine_transform(const SpineLandmarks& landmarks, bool flip_x = false);

Point2 to_spine(Point2 p, const SpineTransform& t);

}  // namespace vfss
