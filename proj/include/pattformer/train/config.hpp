#pragma once

#include <cstdint>

#include "pattformer/model/config.hpp"
#include "pattformer/pc/point_cloud.hpp"

namespace pattformer::train {

struct TrainConfig {
  model::Task task = model::Task::kMulti;
  double lr = 1e-4;
  double lr_min = 0.0;
  double weight_decay = 1e-2;
  std::size_t epochs = 36;
  std::size_t max_steps = 0;  // 0: no cap
  std::uint64_t seed = 42;
  bool shuffle = true;

  bool augment = true;
  double scale_min = 0.95;
  double scale_max = 1.05;
  double rotate_deg = 45.0;
  double flip_prob = 0.5;
  pc::Vec3 range_min{-50, -50, -5};
  pc::Vec3 range_max{50, 50, 3};

  bool noisy_queries = true;
  double noise_scale = 0.3;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;

  void validate() const;
};

}  // namespace pattformer::train
