#pragma once

#include <vector>

#include "pattformer/pc/box3d.hpp"
#include "pattformer/pc/point_cloud.hpp"

namespace pattformer::pc {

/// A labelled scan: per-point semantic labels live in cloud.labels, boxes
/// carry detection class ids.
struct SceneSample {
  PointCloud cloud;
  std::vector<Box3D> boxes;
};

}  // namespace pattformer::pc
