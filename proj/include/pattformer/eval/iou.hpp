#pragma once

#include <array>
#include <span>
#include <vector>

#include "pattformer/pc/box3d.hpp"

namespace pattformer::eval {

using Point2 = std::array<double, 2>;

/// Shoelace area; positive for counter-clockwise polygons.
double polygon_area(std::span<const Point2> poly);

/// Sutherland-Hodgman clipping of `subject` against the convex,
/// counter-clockwise polygon `clip`.
std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip);

/// IoU of the two yaw-rotated footprints in the ground plane. Zero-area
/// boxes and intersections below 1e-12 give 0.
double bev_rotated_iou(const pc::Box3D& a, const pc::Box3D& b);

/// Greedy class-agnostic suppression. Boxes scoring below score_thresh are
/// dropped; the rest are visited in descending score (ties to the lower
/// index) and kept unless their IoU with a kept box exceeds iou_thresh.
/// Returns kept input indices in visiting order.
std::vector<std::size_t> nms_indices(std::span<const pc::Box3D> boxes, double iou_thresh = 0.4,
                                     double score_thresh = 0.2);
std::vector<pc::Box3D> nms(std::span<const pc::Box3D> boxes, double iou_thresh = 0.4,
                           double score_thresh = 0.2);

}  // namespace pattformer::eval
