#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>

#include "pattformer/ad/tensor.hpp"
#include "pattformer/pc/point_cloud.hpp"

namespace pattformer::testing {

inline ad::Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  ad::Tensor t = ad::Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

/// Bitwise-equal shape and values.
inline bool same_values(const ad::Tensor& a, const ad::Tensor& b) {
  return a.shape() == b.shape() && std::ranges::equal(a.data(), b.data());
}

inline std::vector<pc::Vec3> random_points(std::size_t n, std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> dist(-extent, extent);
  std::vector<pc::Vec3> pts(n);
  for (auto& p : pts) p = {dist(rng), dist(rng), dist(rng)};
  return pts;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pattformer_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace pattformer::testing
