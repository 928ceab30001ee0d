#include "pattformer/pc/box3d.hpp"

#include <cmath>
#include <numbers>

namespace pattformer::pc {

double normalize_yaw(double yaw) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double y = std::fmod(yaw, two_pi);
  if (y <= -std::numbers::pi) y += two_pi;
  if (y > std::numbers::pi) y -= two_pi;
  return y;
}

Vec3 to_box_frame(const Box3D& box, const Vec3& p) {
  const double dx = p[0] - box.center[0];
  const double dy = p[1] - box.center[1];
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  return {c * dx + s * dy, -s * dx + c * dy, p[2] - box.center[2]};
}

bool box_contains(const Box3D& box, const Vec3& p, double tolerance) {
  const Vec3 local = to_box_frame(box, p);
  for (int a = 0; a < 3; ++a) {
    if (std::abs(local[a]) > 0.5 * box.size[a] + tolerance) return false;
  }
  return true;
}

std::array<std::array<double, 2>, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double hx = 0.5 * box.size[0], hy = 0.5 * box.size[1];
  const std::array<std::array<double, 2>, 4> local{{{hx, hy}, {-hx, hy}, {-hx, -hy}, {hx, -hy}}};
  std::array<std::array<double, 2>, 4> out{};
  // local order (+,+), (-,+), (-,-), (+,-) is counter-clockwise
  for (int i = 0; i < 4; ++i) {
    out[i] = {box.center[0] + c * local[i][0] - s * local[i][1],
              box.center[1] + s * local[i][0] + c * local[i][1]};
  }
  return out;
}

}  // namespace pattformer::pc
