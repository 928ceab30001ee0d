#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pattformer/io/synth.hpp"
#include "pattformer/model/config.hpp"
#include "pattformer/train/config.hpp"

namespace pattformer::io {

struct Config {
  model::ModelConfig model;
  train::TrainConfig train;
  SynthConfig synth;
  std::string optimizer = "adamw";
  std::string schedule = "cosine";
};

/// Flat `key = value` text, one entry per line, `#` starts a comment.
/// Values are integers, reals, `true`/`false`, bare words or quoted strings,
/// and `[a, b, ...]` lists. Unknown keys and mistyped values throw
/// ConfigError naming the key (and the expected type).
Config parse_config_text(const std::string& text);
/// Throws IoError if the file cannot be read.
Config parse_config(const std::filesystem::path& path);

/// Every key with its resolved value; parse_config_text(format_config(c))
/// reproduces c.
std::string format_config(const Config& cfg);

/// Names of all accepted keys in output order.
std::vector<std::string> config_keys();

}  // namespace pattformer::io
