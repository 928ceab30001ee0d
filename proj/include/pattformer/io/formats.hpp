#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pattformer/pc/scene.hpp"

namespace pattformer::io {

/// N x 4 little-endian float32 records: x, y, z, intensity. Values are
/// rounded to float32 on write.
void save_points(const std::filesystem::path& path, const pc::PointCloud& cloud);
/// Throws IoError if unreadable, FormatError if the size is not a multiple
/// of 16 bytes.
pc::PointCloud load_points(const std::filesystem::path& path);

/// N little-endian uint32 labels.
void save_labels(const std::filesystem::path& path, std::span<const std::uint32_t> labels);
std::vector<std::uint32_t> load_labels(const std::filesystem::path& path);

/// One `cx cy cz dx dy dz yaw class_id` line per box.
void save_boxes(const std::filesystem::path& path, std::span<const pc::Box3D> boxes);
/// Throws FormatError naming the line number for malformed input.
std::vector<pc::Box3D> load_boxes(const std::filesystem::path& path);

/// `{dir}/points/NNNN.bin`, `{dir}/labels/NNNN.label`, `{dir}/boxes/NNNN.txt`.
void save_dataset(const std::filesystem::path& dir, std::span<const pc::SceneSample> scenes);
/// Creates the three subdirectories (count 0 gives an empty dataset).
void make_dataset_dirs(const std::filesystem::path& dir);
void save_scene(const std::filesystem::path& dir, std::size_t index, const pc::SceneSample& scene);
/// Loads scenes 0000, 0001, ... until the first missing point file. A label
/// file whose length differs from its point file is a FormatError.
std::vector<pc::SceneSample> load_dataset(const std::filesystem::path& dir);

}  // namespace pattformer::io
