#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pattformer/ad/tensor.hpp"

namespace pattformer::pc {

using Vec3 = std::array<double, 3>;

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

/// Coordinates (meters), per-point features and optional semantic labels.
struct PointCloud {
  std::vector<Vec3> coords;
  ad::Tensor feats;  // N x C
  std::optional<std::vector<std::uint32_t>> labels;

  std::size_t size() const { return coords.size(); }
  bool empty() const { return coords.empty(); }
  std::size_t channels() const { return feats.cols(); }

  /// Throws InputError on non-finite coordinates, a feature row count that
  /// differs from the point count, or labels outside [0, num_classes).
  void validate(std::optional<std::size_t> num_classes = std::nullopt) const;
};

/// Builds a cloud with an N x channels zero feature matrix.
PointCloud make_cloud(std::vector<Vec3> coords, std::size_t channels = 1);

/// Keeps the points with range_min <= p <= range_max componentwise. The
/// returned index list maps output rows to input rows.
PointCloud crop(const PointCloud& cloud, const Vec3& range_min, const Vec3& range_max,
                std::vector<std::size_t>* kept = nullptr);

}  // namespace pattformer::pc
