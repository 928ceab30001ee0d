#include "pattformer/io/formats.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "pattformer/common/errors.hpp"

namespace pattformer::io {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::binary) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string indexed(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu%s", i, ext);
  return buf;
}

}  // namespace

void save_points(const fs::path& path, const pc::PointCloud& cloud) {
  cloud.validate();
  auto out = open_out(path);
  std::vector<float> buf;
  buf.reserve(cloud.size() * 4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) buf.push_back(static_cast<float>(cloud.coords[i][a]));
    buf.push_back(cloud.channels() > 0 ? static_cast<float>(cloud.feats(i, 0)) : 0.0f);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  finish(out, path);
}

pc::PointCloud load_points(const fs::path& path) {
  const std::string bytes = read_all(path);
  if (bytes.size() % 16 != 0) {
    throw FormatError(path.string() + ": " + std::to_string(bytes.size()) +
                      " bytes is not a whole number of 16-byte points");
  }
  const std::size_t n = bytes.size() / 16;
  std::vector<float> buf(n * 4);
  std::memcpy(buf.data(), bytes.data(), bytes.size());
  std::vector<pc::Vec3> coords(n);
  pc::PointCloud cloud = pc::make_cloud({}, 1);
  cloud.feats = ad::Tensor::matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    coords[i] = {buf[4 * i], buf[4 * i + 1], buf[4 * i + 2]};
    cloud.feats(i, 0) = buf[4 * i + 3];
  }
  cloud.coords = std::move(coords);
  for (const auto& p : cloud.coords) {
    for (double v : p) {
      if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite coordinate");
    }
  }
  return cloud;
}

void save_labels(const fs::path& path, std::span<const std::uint32_t> labels) {
  auto out = open_out(path);
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size() * sizeof(std::uint32_t)));
  finish(out, path);
}

std::vector<std::uint32_t> load_labels(const fs::path& path) {
  const std::string bytes = read_all(path);
  if (bytes.size() % 4 != 0) {
    throw FormatError(path.string() + ": " + std::to_string(bytes.size()) +
                      " bytes is not a whole number of uint32 labels");
  }
  std::vector<std::uint32_t> out(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

void save_boxes(const fs::path& path, std::span<const pc::Box3D> boxes) {
  auto out = open_out(path, std::ios::out);
  char buf[512];
  for (const auto& b : boxes) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %u\n", b.center[0],
                  b.center[1], b.center[2], b.size[0], b.size[1], b.size[2],
                  pc::normalize_yaw(b.yaw), b.class_id);
    out << buf;
  }
  finish(out, path);
}

std::vector<pc::Box3D> load_boxes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<pc::Box3D> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    pc::Box3D b;
    long long cls = -1;
    ls >> b.center[0] >> b.center[1] >> b.center[2] >> b.size[0] >> b.size[1] >> b.size[2] >> b.yaw >> cls;
    std::string extra;
    if (!ls || (ls >> extra) || cls < 0 || cls > UINT32_MAX) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'cx cy cz dx dy dz yaw class_id'");
    }
    for (double d : b.size) {
      if (!(d > 0)) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": box size must be positive");
    }
    b.class_id = static_cast<std::uint32_t>(cls);
    b.yaw = pc::normalize_yaw(b.yaw);
    out.push_back(b);
  }
  return out;
}

void make_dataset_dirs(const fs::path& dir) {
  std::error_code ec;
  for (const char* sub : {"points", "labels", "boxes"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create " + (dir / sub).string() + ": " + ec.message());
  }
}

void save_scene(const fs::path& dir, std::size_t index, const pc::SceneSample& scene) {
  save_points(dir / "points" / indexed(index, ".bin"), scene.cloud);
  const std::vector<std::uint32_t> none;
  save_labels(dir / "labels" / indexed(index, ".label"),
              scene.cloud.labels ? std::span<const std::uint32_t>(*scene.cloud.labels) : none);
  save_boxes(dir / "boxes" / indexed(index, ".txt"), scene.boxes);
}

void save_dataset(const fs::path& dir, std::span<const pc::SceneSample> scenes) {
  make_dataset_dirs(dir);
  for (std::size_t i = 0; i < scenes.size(); ++i) save_scene(dir, i, scenes[i]);
}

std::vector<pc::SceneSample> load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir / "points")) throw IoError("no points/ directory under " + dir.string());
  std::vector<pc::SceneSample> out;
  for (std::size_t i = 0;; ++i) {
    const fs::path pts = dir / "points" / indexed(i, ".bin");
    if (!fs::exists(pts)) break;
    pc::SceneSample s;
    s.cloud = load_points(pts);
    const fs::path lab = dir / "labels" / indexed(i, ".label");
    if (fs::exists(lab)) {
      auto labels = load_labels(lab);
      if (labels.size() != s.cloud.size()) {
        throw FormatError(lab.string() + ": " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(s.cloud.size()) + " points");
      }
      s.cloud.labels = std::move(labels);
    }
    const fs::path box = dir / "boxes" / indexed(i, ".txt");
    if (fs::exists(box)) s.boxes = load_boxes(box);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pattformer::io
