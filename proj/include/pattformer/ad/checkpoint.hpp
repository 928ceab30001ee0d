#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pattformer/ad/param_store.hpp"

namespace pattformer::ad {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Layout: a text header
//   pattformer-checkpoint 1
//   <count>
//   <name> <rank> <dim0> ... <dimN>     (one line per array, store order)
//   data
// followed by every array's values as raw little-endian IEEE-754 doubles,
// concatenated in header order.
void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& arrays);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

/// Parameters in store order, then buffers in store order.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const BufferStore* buffers = nullptr);
/// Copies arrays into matching params/buffers. Every param and buffer must be
/// present with the same shape; extra arrays are rejected.
void load_checkpoint(const std::filesystem::path& path, ParamStore& params,
                     BufferStore* buffers = nullptr);

}  // namespace pattformer::ad
