#include "pattformer/io/synth.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "pattformer/common/errors.hpp"

namespace pattformer::io {

namespace {

struct ClassShape {
  std::uint32_t semantic;
  pc::Vec3 size;
};

constexpr std::array<ClassShape, 3> kShapes{{
    {kCar, {4.2, 1.8, 1.6}},
    {kPedestrian, {0.8, 0.8, 1.8}},
    {kCyclist, {1.8, 0.7, 1.7}},
}};

struct Footprint {
  double x, y, r;
};

bool overlaps(const std::vector<Footprint>& taken, const Footprint& f) {
  for (const auto& t : taken) {
    if (std::hypot(t.x - f.x, t.y - f.y) < t.r + f.r) return true;
  }
  return false;
}

std::size_t poisson_count(double area, double density, std::mt19937_64& rng) {
  const double mean = area * density;
  return mean <= 0 ? 0 : std::poisson_distribution<std::size_t>(mean)(rng);
}

// Uniform samples on the faces of a box in its own frame, bottom face
// excluded (it rests on the ground).
void sample_box_surface(const pc::Box3D& b, double density, std::mt19937_64& rng,
                        std::vector<pc::Vec3>& out) {
  const double hx = b.size[0] / 2, hy = b.size[1] / 2, hz = b.size[2] / 2;
  const std::array<double, 5> area{b.size[0] * b.size[1], b.size[1] * b.size[2], b.size[1] * b.size[2],
                                   b.size[0] * b.size[2], b.size[0] * b.size[2]};
  double total = 0;
  for (double a : area) total += a;
  const std::size_t n = std::max<std::size_t>(poisson_count(total, density, rng), 8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::discrete_distribution<int> face(area.begin(), area.end());
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  for (std::size_t i = 0; i < n; ++i) {
    pc::Vec3 l{u(rng) * hx, u(rng) * hy, u(rng) * hz};
    switch (face(rng)) {
      case 0: l[2] = hz; break;
      case 1: l[0] = hx; break;
      case 2: l[0] = -hx; break;
      case 3: l[1] = hy; break;
      default: l[1] = -hy; break;
    }
    out.push_back({b.center[0] + c * l[0] - s * l[1], b.center[1] + s * l[0] + c * l[1],
                   b.center[2] + l[2]});
  }
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(extent > 0)) fail("synth extent must be positive");
  if (!(ground_density > 0) || !(object_density > 0) || !(wall_density > 0)) {
    fail("synth densities must be positive");
  }
  if (min_objects > max_objects || min_walls > max_walls) fail("synth count ranges must be ordered");
  if (!(noise >= 0) || !(intensity_noise >= 0)) fail("synth noise must be >= 0");
  if (!(size_jitter >= 0 && size_jitter < 1)) fail("synth size_jitter must lie in [0, 1)");
}

double class_intensity(std::uint32_t semantic) {
  static constexpr std::array<double, 5> kIntensity{0.1, 0.3, 0.55, 0.75, 0.9};
  if (semantic >= kIntensity.size()) throw InputError("unknown semantic class");
  return kIntensity[semantic];
}

pc::SceneSample synth_scene(const SynthConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  auto count_in = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const double e = cfg.extent;

  pc::SceneSample scene;
  std::vector<Footprint> taken;

  // Objects first so walls and ground can avoid them.
  const std::size_t n_obj = count_in(cfg.min_objects, cfg.max_objects);
  for (std::size_t k = 0; k < n_obj; ++k) {
    const ClassShape& shape = kShapes[count_in(0, kShapes.size() - 1)];
    pc::Box3D b;
    for (int a = 0; a < 3; ++a) b.size[a] = shape.size[a] * uniform(1 - cfg.size_jitter, 1 + cfg.size_jitter);
    b.yaw = pc::normalize_yaw(uniform(-std::numbers::pi, std::numbers::pi));
    b.class_id = det_class(shape.semantic);
    const double r = 0.5 * std::hypot(b.size[0], b.size[1]) + 0.3;
    bool placed = false;
    for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
      const Footprint f{uniform(-e + r, e - r), uniform(-e + r, e - r), r};
      if (overlaps(taken, f)) continue;
      b.center = {f.x, f.y, b.size[2] / 2};
      taken.push_back(f);
      placed = true;
    }
    if (placed) scene.boxes.push_back(b);
  }

  std::vector<pc::Vec3> coords;
  std::vector<std::uint32_t> labels;

  for (const auto& b : scene.boxes) {
    std::vector<pc::Vec3> pts;
    sample_box_surface(b, cfg.object_density, rng, pts);
    for (const auto& p : pts) {
      coords.push_back(p);
      labels.push_back(kCar + b.class_id);
    }
  }

  const std::size_t n_walls = count_in(cfg.min_walls, cfg.max_walls);
  for (std::size_t w = 0; w < n_walls; ++w) {
    const double len = uniform(4.0, std::min(12.0, 2 * e));
    const double height = uniform(2.0, 3.0);
    const double angle = uniform(0.0, std::numbers::pi);
    const Footprint f{uniform(-e + len / 2, e - len / 2), uniform(-e + len / 2, e - len / 2), len / 2};
    if (overlaps(taken, f)) continue;
    taken.push_back(f);
    const std::size_t n = poisson_count(len * height * 2, cfg.wall_density, rng);
    const double c = std::cos(angle), s = std::sin(angle);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = uniform(-len / 2, len / 2), side = u01(rng) < 0.5 ? -0.1 : 0.1;
      coords.push_back({f.x + c * t - s * side, f.y + s * t + c * side, uniform(0.0, height)});
      labels.push_back(kManmade);
    }
  }

  const std::size_t n_ground = poisson_count(4 * e * e, cfg.ground_density, rng);
  for (std::size_t i = 0; i < n_ground; ++i) {
    coords.push_back({uniform(-e, e), uniform(-e, e), 0.0});
    labels.push_back(kGround);
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  pc::SceneSample out;
  out.boxes = scene.boxes;
  std::vector<pc::Vec3> kept;
  std::vector<std::uint32_t> kept_labels;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    pc::Vec3 p = coords[i];
    if (cfg.noise > 0) {
      for (double& v : p) v += cfg.noise * noise(rng);
    }
    std::uint32_t label = labels[i];
    for (const auto& b : out.boxes) {
      if (!pc::box_contains(b, p)) continue;
      label = label >= kCar ? kCar + b.class_id : UINT32_MAX;
      break;
    }
    if (label == UINT32_MAX) continue;
    kept.push_back(p);
    kept_labels.push_back(label);
  }
  out.cloud = pc::make_cloud(std::move(kept), 1);
  for (std::size_t i = 0; i < kept_labels.size(); ++i) {
    out.cloud.feats(i, 0) = class_intensity(kept_labels[i]) + cfg.intensity_noise * noise(rng);
  }
  out.cloud.labels = std::move(kept_labels);
  return out;
}

}  // namespace pattformer::io
