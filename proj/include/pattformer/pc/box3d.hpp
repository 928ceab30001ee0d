#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pattformer/pc/point_cloud.hpp"

namespace pattformer::pc {

/// Oriented box: center, full extents (dx, dy, dz) along the box axes, yaw
/// around +z in radians.
struct Box3D {
  Vec3 center{0, 0, 0};
  Vec3 size{1, 1, 1};
  double yaw = 0.0;
  std::uint32_t class_id = 0;
  double score = 1.0;
};

/// Wraps an angle into (-pi, pi].
double normalize_yaw(double yaw);

/// Point expressed in the box frame (translation then rotation by -yaw).
Vec3 to_box_frame(const Box3D& box, const Vec3& p);

/// Inclusive membership test; `tolerance` absorbs rounding for points placed
/// exactly on a face.
bool box_contains(const Box3D& box, const Vec3& p, double tolerance = 1e-9);

/// BEV footprint corners in counter-clockwise order.
std::array<std::array<double, 2>, 4> bev_corners(const Box3D& box);

}  // namespace pattformer::pc
