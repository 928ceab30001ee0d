#pragma once

#include <cstdint>
#include <random>

#include "pattformer/pc/scene.hpp"

namespace pattformer::io {

/// Semantic palette of generated scenes.
enum SemanticClass : std::uint32_t {
  kGround = 0,
  kManmade = 1,
  kCar = 2,
  kPedestrian = 3,
  kCyclist = 4,
};
inline constexpr std::size_t kNumSemanticClasses = 5;
inline constexpr std::size_t kNumDetClasses = 3;

/// Detection class (0 car, 1 pedestrian, 2 cyclist) of a thing label.
inline std::uint32_t det_class(std::uint32_t semantic) { return semantic - kCar; }

struct SynthConfig {
  double extent = 20.0;          // scene spans [-extent, extent] in x and y
  double ground_density = 2.0;   // points per m^2
  double object_density = 20.0;  // points per m^2 of box surface
  double wall_density = 8.0;     // points per m^2 of wall face
  std::size_t min_objects = 3;
  std::size_t max_objects = 8;
  std::size_t min_walls = 1;
  std::size_t max_walls = 3;
  double size_jitter = 0.1;      // relative, uniform
  double noise = 0.02;           // Gaussian coordinate sigma (m)
  double intensity_noise = 0.05;

  void validate() const;
};

/// Flat ground, vertical walls and oriented boxes with surface-sampled points.
/// Points inside a box carry its class; ground and wall points inside boxes
/// are discarded. Deterministic given the rng state.
pc::SceneSample synth_scene(const SynthConfig& cfg, std::mt19937_64& rng);

/// Mean intensity of each semantic class.
double class_intensity(std::uint32_t semantic);

}  // namespace pattformer::io
