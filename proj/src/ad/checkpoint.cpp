#include "pattformer/ad/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pattformer/common/errors.hpp"

namespace pattformer::ad {

namespace {

constexpr const char* kMagic = "pattformer-checkpoint";
constexpr int kVersion = 1;

void put_le64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  os.write(bytes, 8);
}

double get_le64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& arrays) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os << kMagic << ' ' << kVersion << '\n' << arrays.size() << '\n';
  for (const auto& a : arrays) {
    if (a.name.empty() || a.name.find_first_of(" \t\n") != std::string::npos) {
      throw InputError("checkpoint array name must be non-empty without whitespace: '" + a.name + "'");
    }
    os << a.name << ' ' << a.value.rank();
    for (std::size_t d : a.value.shape()) os << ' ' << d;
    os << '\n';
  }
  os << "data\n";
  for (const auto& a : arrays) {
    for (double v : a.value.data()) put_le64(os, v);
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(is, line)) throw FormatError(std::string("checkpoint truncated before ") + what);
  };

  next_line("magic");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != kMagic || version != kVersion) {
      throw FormatError("not a version-1 checkpoint: " + path.string());
    }
  }
  next_line("count");
  std::size_t count = 0;
  {
    std::istringstream ls(line);
    if (!(ls >> count)) throw FormatError("checkpoint: bad array count line '" + line + "'");
  }
  std::vector<NamedTensor> arrays;
  arrays.reserve(count);
  std::size_t total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    next_line("array header");
    std::istringstream ls(line);
    NamedTensor a;
    std::size_t rank = 0;
    if (!(ls >> a.name >> rank) || rank > 8) {
      throw FormatError("checkpoint: bad array header '" + line + "'");
    }
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) {
      if (!(ls >> d)) throw FormatError("checkpoint: bad shape in '" + line + "'");
    }
    a.value = Tensor(shape, 0.0);
    total += a.value.size();
    arrays.push_back(std::move(a));
  }
  next_line("data marker");
  if (line != "data") throw FormatError("checkpoint: expected 'data' marker, got '" + line + "'");

  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (raw.size() != total * 8) {
    throw FormatError("checkpoint payload has " + std::to_string(raw.size()) + " bytes, expected " +
                      std::to_string(total * 8));
  }
  std::size_t offset = 0;
  for (auto& a : arrays) {
    for (double& v : a.value.data()) {
      v = get_le64(raw.data() + offset);
      offset += 8;
    }
  }
  return arrays;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const BufferStore* buffers) {
  std::vector<NamedTensor> arrays;
  for (const auto& [name, v] : params.entries()) arrays.push_back({name, v.value()});
  if (buffers) {
    for (const auto& name : buffers->names()) arrays.push_back({name, buffers->at(name)});
  }
  write_checkpoint(path, arrays);
}

void load_checkpoint(const std::filesystem::path& path, ParamStore& params, BufferStore* buffers) {
  auto arrays = read_checkpoint(path);
  const std::size_t expected = params.size() + (buffers ? buffers->size() : 0);
  if (arrays.size() != expected) {
    throw FormatError("checkpoint holds " + std::to_string(arrays.size()) + " arrays, model expects " +
                      std::to_string(expected));
  }
  for (auto& a : arrays) {
    Tensor* dst = nullptr;
    if (params.contains(a.name)) {
      dst = &params.at(a.name).mutable_value();
    } else if (buffers && buffers->contains(a.name)) {
      dst = &buffers->at(a.name);
    } else {
      throw FormatError("checkpoint array '" + a.name + "' does not belong to the model");
    }
    if (!dst->same_shape(a.value)) {
      throw FormatError("checkpoint array '" + a.name + "' has shape " + a.value.shape_str() +
                        ", model expects " + dst->shape_str());
    }
    *dst = std::move(a.value);
  }
}

}  // namespace pattformer::ad
