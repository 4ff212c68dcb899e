#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "vfss/error.hpp"
#include "vfss/geometry.hpp"

using namespace vfss;

namespace {

Point2 rotate(Point2 p, Point2 center, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double x = p.x - center.x, y = p.y - center.y;
  return {center.x + c * x - s * y, center.y + s * x + c * y};
}

double dist(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

TEST(SpineTransform, AxisAlignedCase) {
  const auto t = spine_transform({{100, 50}, {100, 150}});
  EXPECT_DOUBLE_EQ(t.distance, 100.0);
  const Point2 o = to_spine({100, 150}, t), top = to_spine({100, 50}, t);
  EXPECT_NEAR(o.x, 0, 1e-12);
  EXPECT_NEAR(o.y, 0, 1e-12);
  EXPECT_NEAR(top.x, 0, 1e-12);
  EXPECT_NEAR(top.y, 100, 1e-12);
}

TEST(SpineTransform, HandComputedObliqueCase) {
  const auto t = spine_transform({{0, 0}, {30, 40}});
  EXPECT_DOUBLE_EQ(t.distance, 50.0);
  const Point2 p = to_spine({30, 0}, t);
  EXPECT_NEAR(p.y, 32.0, 1e-12);
  // unit_y = (-0.6, -0.8), unit_x = (vy, -vx) = (-0.8, 0.6); p - c4 = (0, -40).
  EXPECT_NEAR(p.x, -24.0, 1e-12);
  EXPECT_NEAR(to_spine({30, 0}, spine_transform({{0, 0}, {30, 40}}, true)).x, 24.0, 1e-12);
}

TEST(SpineTransform, UprightSpineHasAnteriorToTheLeft) {
  const auto t = spine_transform({{100, 50}, {100, 150}});
  EXPECT_GT(to_spine({60, 150}, t).x, 0.0);
}

TEST(SpineTransform, CoincidentLandmarksThrow) {
  EXPECT_THROW(spine_transform({{5, 5}, {5, 5}}), DataError);
}

TEST(SpineTransform, PropertyIsometryAndLandmarkImages) {
  test::Gen g(31);
  for (int trial = 0; trial < 1000; ++trial) {
    SpineLandmarks lm{g.point(0, 341), g.point(0, 341)};
    if (dist(lm.c2, lm.c4) < 1.0) continue;
    const auto t = spine_transform(lm, g.coin());
    const Point2 p = g.point(-100, 450), q = g.point(-100, 450);
    EXPECT_NEAR(dist(to_spine(p, t), to_spine(q, t)), dist(p, q), 1e-9);
    EXPECT_NEAR(to_spine(lm.c4, t).x, 0, 1e-9);
    EXPECT_NEAR(to_spine(lm.c4, t).y, 0, 1e-9);
    EXPECT_NEAR(to_spine(lm.c2, t).x, 0, 1e-9);
    EXPECT_NEAR(to_spine(lm.c2, t).y, t.distance, 1e-9);
  }
}

TEST(SpineTransform, PropertyRotationInvariance) {
  test::Gen g(32);
  for (int trial = 0; trial < 1000; ++trial) {
    SpineLandmarks lm{g.point(0, 341), g.point(0, 341)};
    if (dist(lm.c2, lm.c4) < 1.0) continue;
    const bool flip = g.coin();
    const Point2 center = g.point(-200, 500), p = g.point(-100, 450);
    const double angle = g.real(-std::numbers::pi, std::numbers::pi);
    const SpineLandmarks rot{rotate(lm.c2, center, angle), rotate(lm.c4, center, angle)};
    const Point2 a = to_spine(p, spine_transform(lm, flip));
    const Point2 b = to_spine(rotate(p, center, angle), spine_transform(rot, flip));
    EXPECT_NEAR(a.x, b.x, 1e-9);
    EXPECT_NEAR(a.y, b.y, 1e-9);
  }
}
