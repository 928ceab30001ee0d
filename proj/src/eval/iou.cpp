#include "pattformer/eval/iou.hpp"

#include <algorithm>
#include <numeric>

namespace pattformer::eval {

namespace {

constexpr double kAreaEps = 1e-12;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

Point2 intersect(const Point2& p, const Point2& q, const Point2& a, const Point2& b) {
  // Point on segment p-q where it crosses the line a-b.
  const double dp = cross(a, b, p), dq = cross(a, b, q);
  const double t = dp / (dp - dq);
  return {p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])};
}

}  // namespace

double polygon_area(std::span<const Point2> poly) {
  double s = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % poly.size()];
    s += a[0] * b[1] - a[1] * b[0];
  }
  return 0.5 * s;
}

std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip) {
  std::vector<Point2> out(subject.begin(), subject.end());
  for (std::size_t e = 0; e < clip.size() && !out.empty(); ++e) {
    const Point2& a = clip[e];
    const Point2& b = clip[(e + 1) % clip.size()];
    std::vector<Point2> in;
    in.swap(out);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Point2& p = in[i];
      const Point2& q = in[(i + 1) % in.size()];
      const bool p_in = cross(a, b, p) >= 0, q_in = cross(a, b, q) >= 0;
      if (p_in) out.push_back(p);
      if (p_in != q_in) out.push_back(intersect(p, q, a, b));
    }
  }
  return out;
}

double bev_rotated_iou(const pc::Box3D& a, const pc::Box3D& b) {
  const double area_a = a.size[0] * a.size[1], area_b = b.size[0] * b.size[1];
  if (!(area_a > kAreaEps) || !(area_b > kAreaEps)) return 0.0;
  const auto ca = pc::bev_corners(a), cb = pc::bev_corners(b);
  const auto poly = clip_convex(ca, cb);
  if (poly.size() < 3) return 0.0;
  const double inter = std::abs(polygon_area(poly));
  if (inter < kAreaEps) return 0.0;
  return std::clamp(inter / (area_a + area_b - inter), 0.0, 1.0);
}

std::vector<std::size_t> nms_indices(std::span<const pc::Box3D> boxes, double iou_thresh,
                                     double score_thresh) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (boxes[i].score >= score_thresh) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return boxes[x].score > boxes[y].score; });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool keep = true;
    for (std::size_t k : kept) {
      if (bev_rotated_iou(boxes[i], boxes[k]) > iou_thresh) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(i);
  }
  return kept;
}

std::vector<pc::Box3D> nms(std::span<const pc::Box3D> boxes, double iou_thresh, double score_thresh) {
  std::vector<pc::Box3D> out;
  for (std::size_t i : nms_indices(boxes, iou_thresh, score_thresh)) out.push_back(boxes[i]);
  return out;
}

}  // namespace pattformer::eval
