#include "pattformer/io/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pattformer/common/errors.hpp"

namespace pattformer::io {

namespace {

enum class Kind { kInt, kReal, kBool, kWord, kString, kList };

struct Value {
  Kind kind;
  std::string text;           // scalar payload (unquoted for strings)
  std::vector<Value> items;   // list elements
};

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool is_int(const std::string& s) {
  long long v;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

bool is_real(const std::string& s) {
  double v;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

Value classify(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError(where + ": missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw ConfigError(where + ": unterminated string");
    return {Kind::kString, s.substr(1, s.size() - 2), {}};
  }
  if (s.front() == '[') {
    if (s.back() != ']') throw ConfigError(where + ": unterminated list");
    Value list{Kind::kList, s, {}};
    const std::string body = trim(s.substr(1, s.size() - 2));
    if (body.empty()) return list;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) list.items.push_back(classify(item, where));
    return list;
  }
  if (s == "true" || s == "false") return {Kind::kBool, s, {}};
  if (is_int(s)) return {Kind::kInt, s, {}};
  if (is_real(s)) return {Kind::kReal, s, {}};
  return {Kind::kWord, s, {}};
}

[[noreturn]] void type_error(const std::string& key, const char* expected, const Value& v) {
  throw ConfigError("config key '" + key + "' expects " + expected + ", got '" + v.text + "'");
}

std::size_t as_count(const std::string& key, const Value& v) {
  if (v.kind != Kind::kInt || v.text.front() == '-') type_error(key, "a non-negative integer", v);
  return static_cast<std::size_t>(std::stoull(v.text));
}

double as_real(const std::string& key, const Value& v) {
  if (v.kind != Kind::kInt && v.kind != Kind::kReal) type_error(key, "a number", v);
  double out = 0;
  std::from_chars(v.text.data(), v.text.data() + v.text.size(), out);
  return out;
}

bool as_bool(const std::string& key, const Value& v) {
  if (v.kind != Kind::kBool) type_error(key, "a boolean", v);
  return v.text == "true";
}

std::string as_word(const std::string& key, const Value& v) {
  if (v.kind != Kind::kWord && v.kind != Kind::kString) type_error(key, "a string", v);
  return v.text;
}

pc::Vec3 as_vec3(const std::string& key, const Value& v) {
  if (v.kind != Kind::kList || v.items.size() != 3) type_error(key, "a list of 3 numbers", v);
  return {as_real(key, v.items[0]), as_real(key, v.items[1]), as_real(key, v.items[2])};
}

std::vector<std::uint32_t> as_id_list(const std::string& key, const Value& v) {
  if (v.kind != Kind::kList) type_error(key, "a list of integers", v);
  std::vector<std::uint32_t> out;
  for (const auto& item : v.items) {
    const std::size_t id = as_count(key, item);
    if (id > UINT32_MAX) type_error(key, "a list of 32-bit integers", item);
    out.push_back(static_cast<std::uint32_t>(id));
  }
  return out;
}

std::string fmt_real(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string fmt_vec3(const pc::Vec3& v) {
  return "[" + fmt_real(v[0]) + ", " + fmt_real(v[1]) + ", " + fmt_real(v[2]) + "]";
}

struct Entry {
  std::string key;
  std::function<void(Config&, const std::string&, const Value&)> set;
  std::function<std::string(const Config&)> get;
};

#define PF_COUNT(name, field)                                                                \
  Entry {                                                                                    \
    name, [](Config& c, const std::string& k, const Value& v) { c.field = as_count(k, v); }, \
        [](const Config& c) { return std::to_string(c.field); }                              \
  }
#define PF_REAL(name, field)                                                                \
  Entry {                                                                                   \
    name, [](Config& c, const std::string& k, const Value& v) { c.field = as_real(k, v); }, \
        [](const Config& c) { return fmt_real(c.field); }                                   \
  }
#define PF_BOOL(name, field)                                                                \
  Entry {                                                                                   \
    name, [](Config& c, const std::string& k, const Value& v) { c.field = as_bool(k, v); }, \
        [](const Config& c) { return std::string(c.field ? "true" : "false"); }             \
  }
#define PF_VEC3(name, field)                                                                \
  Entry {                                                                                   \
    name, [](Config& c, const std::string& k, const Value& v) { c.field = as_vec3(k, v); }, \
        [](const Config& c) { return fmt_vec3(c.field); }                                   \
  }

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = {
      // model
      PF_COUNT("in_channels", model.in_channels),
      PF_COUNT("stages", model.stages),
      PF_COUNT("width", model.width),
      PF_COUNT("heads", model.heads),
      PF_COUNT("layers", model.layers),
      PF_COUNT("seg_layers", model.seg_layers),
      PF_COUNT("window_size", model.window),
      PF_REAL("grid_size", model.grid_size),
      PF_REAL("radius", model.radius),
      Entry{"search",
            [](Config& c, const std::string& k, const Value& v) {
              c.model.search = model::parse_search(as_word(k, v));
            },
            [](const Config& c) { return model::to_string(c.model.search); }},
      PF_COUNT("num_classes", model.num_classes),
      PF_COUNT("num_det_classes", model.num_det_classes),
      Entry{"thing_classes",
            [](Config& c, const std::string& k, const Value& v) {
              c.model.thing_classes = as_id_list(k, v);
            },
            [](const Config& c) {
              std::string s = "[";
              for (std::size_t i = 0; i < c.model.thing_classes.size(); ++i) {
                if (i) s += ", ";
                s += std::to_string(c.model.thing_classes[i]);
              }
              return s + "]";
            }},
      PF_COUNT("queries", model.queries),
      PF_REAL("fg_threshold", model.fg_threshold),
      PF_COUNT("dec_layers", model.dec_layers),
      PF_COUNT("dec_heads", model.dec_heads),
      PF_COUNT("dec_window", model.dec_window),
      PF_REAL("score_threshold", model.score_threshold),
      PF_REAL("nms_iou", model.nms_iou),
      // train
      Entry{"task",
            [](Config& c, const std::string& k, const Value& v) {
              c.train.task = model::parse_task(as_word(k, v));
            },
            [](const Config& c) { return model::to_string(c.train.task); }},
      Entry{"optimizer",
            [](Config& c, const std::string& k, const Value& v) {
              const std::string s = as_word(k, v);
              if (s != "adamw") throw ConfigError("config key 'optimizer': only 'adamw' is supported");
              c.optimizer = s;
            },
            [](const Config& c) { return c.optimizer; }},
      Entry{"schedule",
            [](Config& c, const std::string& k, const Value& v) {
              const std::string s = as_word(k, v);
              if (s != "cosine") throw ConfigError("config key 'schedule': only 'cosine' is supported");
              c.schedule = s;
            },
            [](const Config& c) { return c.schedule; }},
      PF_REAL("lr", train.lr),
      PF_REAL("lr_min", train.lr_min),
      PF_REAL("weight_decay", train.weight_decay),
      PF_COUNT("epochs", train.epochs),
      PF_COUNT("max_steps", train.max_steps),
      PF_COUNT("seed", train.seed),
      PF_BOOL("shuffle", train.shuffle),
      PF_BOOL("augment", train.augment),
      PF_REAL("scale_min", train.scale_min),
      PF_REAL("scale_max", train.scale_max),
      PF_REAL("rotate_deg", train.rotate_deg),
      PF_REAL("flip_prob", train.flip_prob),
      PF_VEC3("range_min", train.range_min),
      PF_VEC3("range_max", train.range_max),
      PF_BOOL("noisy_queries", train.noisy_queries),
      PF_REAL("noise_scale", train.noise_scale),
      PF_REAL("focal_alpha", train.focal_alpha),
      PF_REAL("focal_gamma", train.focal_gamma),
      // synth
      PF_REAL("synth_extent", synth.extent),
      PF_REAL("synth_ground_density", synth.ground_density),
      PF_REAL("synth_object_density", synth.object_density),
      PF_REAL("synth_wall_density", synth.wall_density),
      PF_COUNT("synth_min_objects", synth.min_objects),
      PF_COUNT("synth_max_objects", synth.max_objects),
      PF_COUNT("synth_min_walls", synth.min_walls),
      PF_COUNT("synth_max_walls", synth.max_walls),
      PF_REAL("synth_size_jitter", synth.size_jitter),
      PF_REAL("synth_noise", synth.noise),
      PF_REAL("synth_intensity_noise", synth.intensity_noise),
  };
  return entries;
}

#undef PF_COUNT
#undef PF_REAL
#undef PF_BOOL
#undef PF_VEC3

}  // namespace

Config parse_config_text(const std::string& text) {
  std::map<std::string, const Entry*> by_key;
  for (const auto& e : table()) by_key.emplace(e.key, &e);

  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    // '#' inside a quoted string is kept.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(where + ": unknown config key '" + key + "'");
    if (auto [prev, fresh] = seen.emplace(key, lineno); !fresh) {
      throw ConfigError(where + ": config key '" + key + "' already set on line " +
                        std::to_string(prev->second));
    }
    it->second->set(cfg, key, classify(line.substr(eq + 1), where + ", key '" + key + "'"));
  }
  cfg.model.validate();
  cfg.train.validate();
  cfg.synth.validate();
  return cfg;
}

Config parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string format_config(const Config& cfg) {
  std::string out;
  for (const auto& e : table()) out += e.key + " = " + e.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : table()) out.push_back(e.key);
  return out;
}

}  // namespace pattformer::io
