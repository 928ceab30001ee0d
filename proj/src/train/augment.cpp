#include "pattformer/train/augment.hpp"

#include <cmath>
#include <numbers>

#include "pattformer/common/errors.hpp"

namespace pattformer::train {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(lr > 0)) fail("lr must be positive");
  if (lr_min < 0 || lr_min > lr) fail("lr_min must lie in [0, lr]");
  if (weight_decay < 0) fail("weight_decay must be >= 0");
  if (!(scale_min > 0) || scale_min > scale_max) fail("scale range must be positive and ordered");
  if (rotate_deg < 0) fail("rotate_deg must be >= 0");
  if (flip_prob < 0 || flip_prob > 1) fail("flip_prob must lie in [0, 1]");
  for (int a = 0; a < 3; ++a) {
    if (!(range_min[a] < range_max[a])) fail("range_min must be below range_max");
  }
  if (noise_scale < 0) fail("noise_scale must be >= 0");
  if (focal_alpha < 0 || focal_alpha > 1) fail("focal_alpha must lie in [0, 1]");
  if (focal_gamma < 0) fail("focal_gamma must be >= 0");
}

AugmentParams sample_augment(const TrainConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AugmentParams a;
  a.scale = cfg.scale_min + (cfg.scale_max - cfg.scale_min) * u(rng);
  const double r = cfg.rotate_deg * std::numbers::pi / 180.0;
  a.rotation = -r + 2.0 * r * u(rng);
  a.flip = u(rng) < cfg.flip_prob;
  return a;
}

pc::SceneSample apply_augment(const pc::SceneSample& scene, const AugmentParams& a) {
  const double c = std::cos(a.rotation), s = std::sin(a.rotation);
  auto move = [&](pc::Vec3 p) {
    p = {p[0] * a.scale, p[1] * a.scale, p[2] * a.scale};
    p = {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
    if (a.flip) p[1] = -p[1];
    return p;
  };
  pc::SceneSample out = scene;
  for (auto& p : out.cloud.coords) p = move(p);
  for (auto& b : out.boxes) {
    b.center = move(b.center);
    for (double& d : b.size) d *= a.scale;
    double yaw = b.yaw + a.rotation;
    if (a.flip) yaw = -yaw;
    b.yaw = pc::normalize_yaw(yaw);
  }
  return out;
}

pc::SceneSample augment(const pc::SceneSample& scene, std::mt19937_64& rng, const TrainConfig& cfg) {
  return apply_augment(scene, sample_augment(cfg, rng));
}

std::vector<pc::Vec3> noisy_gt_queries(std::span<const pc::Box3D> boxes, double noise_scale,
                                       std::mt19937_64& rng) {
  if (noise_scale < 0) throw InputError("noise scale must be >= 0");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<pc::Vec3> out;
  for (const auto& b : boxes) {
    pc::Vec3 p = b.center;
    for (int a = 0; a < 3; ++a) p[a] += u(rng) * noise_scale * b.size[a];
    out.push_back(p);
  }
  return out;
}

}  // namespace pattformer::train
