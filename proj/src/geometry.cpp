#include "vfss/geometry.hpp"

#include <cmath>

#include "vfss/error.hpp"

namespace vfss {

SpineTransform spine_transform(const SpineLandmarks& landmarks, bool flip_x) {
  const double dx = landmarks.c2.x - landmarks.c4.x;
  const double dy = landmarks.c2.y - landmarks.c4.y;
  const double d = std::hypot(dx, dy);
  if (!(d > 0.0) || !std::isfinite(d)) throw DataError("C2 and C4 landmarks coincide");

  SpineTransform t;
  t.origin = landmarks.c4;
  t.unit_y = {dx / d, dy / d};
  t.unit_x = {t.unit_y.y, -t.unit_y.x};
  if (flip_x) t.unit_x = {-t.unit_x.x, -t.unit_x.y};
  t.distance = d;
  return t;
}

Point2 to_spine(Point2 p, const SpineTransform& t) {
  const double rx = p.x - t.origin.x;
  const double ry = p.y - t.origin.y;
  return {rx * t.unit_x.x + ry * t.unit_x.y, rx * t.unit_y.x + ry * t.unit_y.y};
}

}  // namespace vfss
