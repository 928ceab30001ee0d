#include "pattformer/pc/point_cloud.hpp"

#include <cmath>
#include <string>

#include "pattformer/common/errors.hpp"

namespace pattformer::pc {

void PointCloud::validate(std::optional<std::size_t> num_classes) const {
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (double v : coords[i]) {
      if (!std::isfinite(v)) {
        throw InputError("point " + std::to_string(i) + " has a non-finite coordinate");
      }
    }
  }
  if (feats.rows() != coords.size()) {
    throw InputError("feature rows (" + std::to_string(feats.rows()) + ") != point count (" +
                     std::to_string(coords.size()) + ")");
  }
  if (labels) {
    if (labels->size() != coords.size()) {
      throw InputError("label count (" + std::to_string(labels->size()) + ") != point count (" +
                       std::to_string(coords.size()) + ")");
    }
    if (num_classes) {
      for (std::size_t i = 0; i < labels->size(); ++i) {
        if ((*labels)[i] >= *num_classes) {
          throw InputError("label " + std::to_string((*labels)[i]) + " of point " +
                           std::to_string(i) + " outside [0, " + std::to_string(*num_classes) + ")");
        }
      }
    }
  }
}

PointCloud make_cloud(std::vector<Vec3> coords, std::size_t channels) {
  PointCloud cloud;
  cloud.feats = ad::Tensor::matrix(coords.size(), channels);
  cloud.coords = std::move(coords);
  return cloud;
}

PointCloud crop(const PointCloud& cloud, const Vec3& range_min, const Vec3& range_max,
                std::vector<std::size_t>* kept) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.coords[i];
    bool inside = true;
    for (int a = 0; a < 3; ++a) inside = inside && p[a] >= range_min[a] && p[a] <= range_max[a];
    if (inside) keep.push_back(i);
  }
  PointCloud out;
  const std::size_t c = cloud.feats.cols();
  out.feats = ad::Tensor::matrix(keep.size(), c);
  if (cloud.labels) out.labels.emplace();
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.coords.push_back(cloud.coords[keep[r]]);
    for (std::size_t j = 0; j < c; ++j) out.feats(r, j) = cloud.feats(keep[r], j);
    if (cloud.labels) out.labels->push_back((*cloud.labels)[keep[r]]);
  }
  if (kept) *kept = std::move(keep);
  return out;
}

}  // namespace pattformer::pc
