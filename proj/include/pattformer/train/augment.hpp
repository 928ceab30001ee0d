#pragma once

#include <random>
#include <span>
#include <vector>

#include "pattformer/pc/scene.hpp"
#include "pattformer/train/config.hpp"

namespace pattformer::train {

struct AugmentParams {
  double scale = 1.0;
  double rotation = 0.0;  // radians around +z
  bool flip = false;      // y -> -y
};

AugmentParams sample_augment(const TrainConfig& cfg, std::mt19937_64& rng);

/// Scale, then rotate about z, then flip; coords, box centers, sizes and yaws.
pc::SceneSample apply_augment(const pc::SceneSample& scene, const AugmentParams& a);

pc::SceneSample augment(const pc::SceneSample& scene, std::mt19937_64& rng, const TrainConfig& cfg);

/// One reference point per box: center + U(-s * size, s * size) per axis.
std::vector<pc::Vec3> noisy_gt_queries(std::span<const pc::Box3D> boxes, double noise_scale,
                                       std::mt19937_64& rng);

}  // namespace pattformer::train
