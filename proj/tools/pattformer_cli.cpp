#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pattformer/ad/checkpoint.hpp"
#include "pattformer/check/gradient_suite.hpp"
#include "pattformer/common/errors.hpp"
#include "pattformer/eval/bench.hpp"
#include "pattformer/eval/connectivity.hpp"
#include "pattformer/eval/evaluate.hpp"
#include "pattformer/io/config.hpp"
#include "pattformer/io/formats.hpp"
#include "pattformer/io/synth.hpp"
#include "pattformer/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace pattformer;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kIoFailed = 2;
constexpr int kNumericalFailed = 3;

struct Common {
  std::string config_path;
  std::uint64_t seed = 42;
  bool seed_set = false;
};

io::Config load_config(const Common& c) {
  io::Config cfg = c.config_path.empty() ? io::Config{} : io::parse_config(c.config_path);
  if (c.seed_set) cfg.train.seed = c.seed;
  return cfg;
}

// Resolved configuration and flags go to stderr as comments so stdout stays
// machine-readable.
void echo(const std::string& command, const io::Config& cfg,
          const std::vector<std::pair<std::string, std::string>>& flags) {
  std::cerr << "# pattformer " << command << "\n";
  for (const auto& [k, v] : flags) std::cerr << "# --" << k << " = " << v << "\n";
  std::istringstream lines(io::format_config(cfg));
  for (std::string line; std::getline(lines, line);) std::cerr << "# " << line << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
}

std::string seed_str(const io::Config& cfg) { return std::to_string(cfg.train.seed); }

int cmd_synth(const Common& common, std::size_t count, const std::string& out) {
  const io::Config cfg = load_config(common);
  echo("synth", cfg, {{"count", std::to_string(count)}, {"out", out}, {"seed", seed_str(cfg)}});
  io::make_dataset_dirs(out);
  for (std::size_t i = 0; i < count; ++i) {
    std::seed_seq seq{cfg.train.seed, static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    io::save_scene(out, i, io::synth_scene(cfg.synth, rng));
  }
  std::cout << "wrote " << count << " scenes to " << out << "\n";
  return kOk;
}

int cmd_train(const Common& common, const std::string& data, const std::string& out,
              const std::string& task) {
  io::Config cfg = load_config(common);
  if (!task.empty()) cfg.train.task = model::parse_task(task);
  echo("train", cfg, {{"data", data}, {"out", out}, {"task", model::to_string(cfg.train.task)}});
  const auto scenes = io::load_dataset(data);
  if (scenes.empty()) throw IoError("no scenes found under " + data);
  model::PAttFormer m(cfg.model, cfg.train.seed);
  const std::string echo_text = io::format_config(cfg);
  fs::create_directories(out);
  write_text(fs::path(out) / "config.txt", echo_text);
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train::train_loop(m, scenes, cfg.train, {out, echo_text});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "steps=" << result.log.size() << " checkpoints=" << result.checkpoints.size();
  if (!result.log.empty()) {
    std::printf(" first_total=%.6g last_total=%.6g", result.log.front().total, result.log.back().total);
    std::fflush(stdout);
  }
  std::cout << " seconds=" << secs << "\n";
  return kOk;
}

int cmd_eval(const Common& common, const std::string& ckpt, const std::string& data,
             const std::string& matcher, std::optional<double> threshold, const std::string& task,
             const std::string& out) {
  // The configuration echoed next to the checkpoint describes the model.
  io::Config cfg;
  if (!common.config_path.empty()) {
    cfg = load_config(common);
  } else {
    const fs::path echo_path = fs::path(ckpt).replace_extension(".cfg");
    if (!fs::exists(echo_path)) throw IoError("no --config given and no " + echo_path.string());
    cfg = io::parse_config(echo_path);
  }
  if (!task.empty()) cfg.train.task = model::parse_task(task);
  eval::Matcher m;
  m.mode = eval::parse_match_mode(matcher);
  m.threshold = threshold ? *threshold : (m.mode == eval::MatchMode::kCenterDistance ? 2.0 : cfg.model.nms_iou);
  echo("eval", cfg, {{"ckpt", ckpt}, {"data", data}, {"matcher", matcher},
                     {"threshold", std::to_string(m.threshold)}, {"task", model::to_string(cfg.train.task)}});
  model::PAttFormer model(cfg.model, cfg.train.seed);
  ad::load_checkpoint(ckpt, model.params(), &model.buffers());
  std::vector<pc::SceneSample> scenes;
  for (const auto& s : io::load_dataset(data)) scenes.push_back(train::crop_scene(s, cfg.train));
  if (scenes.empty()) throw IoError("no scenes found under " + data);
  const auto report = eval::evaluate(model, scenes, cfg.train.task, m);
  emit(out, eval::metrics_csv(report));
  std::cerr << eval::metrics_summary(report) << "\n";
  return kOk;
}

int cmd_gradcheck(const Common& common, const std::string& op, double tol) {
  const io::Config cfg = load_config(common);
  echo("gradcheck", cfg, {{"op", op}, {"tol", std::to_string(tol)}, {"seed", seed_str(cfg)}});
  bool all_passed = true;
  for (const auto& c : check::select_cases(op)) {
    const auto r = c.run(tol, cfg.train.seed);
    all_passed = all_passed && r.passed();
    std::printf("%s %s checked=%zu max_rel_err=%.3e\n", r.passed() ? "PASS" : "FAIL", c.name.c_str(), r.checked,
                r.max_rel_error);
  }
  return all_passed ? kOk : kCheckFailed;
}

int cmd_connectivity(const Common& common, const std::string& data, std::size_t window, double radius,
                     std::size_t samples, const std::string& search, const std::string& out) {
  const io::Config cfg = load_config(common);
  const eval::WindowConfig wc{model::parse_search(search), window, radius};
  echo("connectivity", cfg,
       {{"data", data}, {"window-size", std::to_string(window)}, {"radius", std::to_string(radius)},
        {"samples", std::to_string(samples)}, {"search", search}, {"seed", seed_str(cfg)}});
  const auto scenes = io::load_dataset(data);
  if (scenes.empty()) throw IoError("no scenes found under " + data);
  std::string csv = "scene,point,hops\n", summary;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    std::seed_seq seq{cfg.train.seed, static_cast<std::uint64_t>(s)};
    std::mt19937_64 rng(seq);
    const auto r = eval::connectivity(scenes[s].cloud.coords, wc, samples, rng);
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      csv += std::to_string(s) + "," + std::to_string(r.samples[i]) + "," +
             (r.hops[i] ? std::to_string(*r.hops[i]) : "") + "\n";
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "# scene=%zu points=%zu samples=%zu min=%zu mean=%.6g max=%zu unreachable=%zu\n", s,
                  scenes[s].cloud.size(), r.samples.size(), r.min_hops, r.mean_hops, r.max_hops, r.unreachable);
    summary += buf;
  }
  emit(out, csv + summary);
  return kOk;
}

int cmd_bench(const Common& common, const std::string& search, std::vector<std::size_t> sizes, std::size_t window,
              std::size_t reps, double radius, const std::string& out) {
  const io::Config cfg = load_config(common);
  eval::BenchConfig bc;
  if (!sizes.empty()) bc.sizes = sizes;
  bc.window = window;
  bc.reps = reps;
  bc.radius = radius;
  if (search != "both") bc.methods = {model::parse_search(search)};
  std::string size_list;
  for (auto n : bc.sizes) size_list += (size_list.empty() ? "" : " ") + std::to_string(n);
  echo("bench", cfg,
       {{"search", search}, {"points", size_list}, {"window", std::to_string(window)},
        {"reps", std::to_string(reps)}, {"radius", std::to_string(radius)}, {"seed", seed_str(cfg)}});
  std::mt19937_64 rng(cfg.train.seed);
  const auto rows = eval::bench_search(bc, rng);
  emit(out, eval::bench_csv(rows));
  for (const auto& r : rows) {
    if (!r.correct) return kCheckFailed;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-based multi-task LiDAR perception: synthetic data, training, evaluation and checks"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& s) {
          common.seed = s;
          common.seed_set = true;
        },
        "RNG seed (default 42)");
  };

  auto* synth = app.add_subcommand("synth", "Write synthetic scenes in the dataset layout");
  std::size_t count = 1;
  std::string synth_out;
  add_common(synth);
  synth->add_option("--count", count, "Number of scenes")->capture_default_str();
  synth->add_option("--out", synth_out, "Dataset directory")->required();

  auto* trn = app.add_subcommand("train", "Train a model and write checkpoints plus loss.csv");
  std::string train_data, train_out, train_task;
  add_common(trn);
  trn->add_option("--data", train_data, "Dataset directory")->required();
  trn->add_option("--out", train_out, "Output directory")->required();
  trn->add_option("--task", train_task, "seg, det or multi (overrides the config)")
      ->check(CLI::IsMember({"seg", "det", "multi"}));

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint: per-class IoU, mIoU, AP and mAP");
  std::string ckpt, eval_data, matcher = "dist", eval_task, eval_out;
  std::optional<double> threshold;
  add_common(ev);
  ev->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  ev->add_option("--data", eval_data, "Dataset directory")->required();
  ev->add_option("--matcher", matcher, "dist or iou")->check(CLI::IsMember({"dist", "iou"}))->capture_default_str();
  ev->add_option("--threshold", threshold, "Matcher threshold (default 2 m or the NMS IoU)");
  ev->add_option("--task", eval_task, "seg, det or multi (overrides the config)")
      ->check(CLI::IsMember({"seg", "det", "multi"}));
  ev->add_option("--out", eval_out, "Metrics CSV path (default stdout)");

  auto* gc = app.add_subcommand("gradcheck", "Central-difference gradient checks");
  std::string op = "all";
  double tol = 1e-4;
  add_common(gc);
  gc->add_option("--op", op, "Operator name or all")->capture_default_str();
  gc->add_option("--tol", tol, "Relative tolerance")->capture_default_str();

  auto* conn = app.add_subcommand("connectivity", "Hop counts for a point feature to reach the whole scan");
  std::string conn_data, conn_search = "vq", conn_out;
  std::size_t conn_window = 32, conn_samples = 20;
  double conn_radius = 1.0;
  add_common(conn);
  conn->add_option("--data", conn_data, "Dataset directory")->required();
  conn->add_option("--window-size", conn_window, "Neighbors per window")->capture_default_str();
  conn->add_option("--radius", conn_radius, "Voxel query radius")->capture_default_str();
  conn->add_option("--samples", conn_samples, "Sampled points per scan")->capture_default_str();
  conn->add_option("--search", conn_search, "vq or knn")->check(CLI::IsMember({"vq", "knn"}))->capture_default_str();
  conn->add_option("--out", conn_out, "CSV path (default stdout)");

  auto* bench = app.add_subcommand("bench", "Neighbor search timing: voxel query vs kNN");
  std::string bench_search = "both", bench_out;
  std::vector<std::size_t> bench_points;
  std::size_t bench_window = 32, bench_reps = 3;
  double bench_radius = 0.5;
  add_common(bench);
  bench->add_option("--search", bench_search, "vq, knn or both")
      ->check(CLI::IsMember({"vq", "knn", "both"}))
      ->capture_default_str();
  bench->add_option("--points", bench_points, "Cloud sizes (default 10000 100000)");
  bench->add_option("--window", bench_window, "Neighbors per window (M = k)")->capture_default_str();
  bench->add_option("--reps", bench_reps, "Repetitions per measurement")->capture_default_str();
  bench->add_option("--radius", bench_radius, "Voxel query radius")->capture_default_str();
  bench->add_option("--out", bench_out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kIoFailed;
  }

  try {
    if (*synth) return cmd_synth(common, count, synth_out);
    if (*trn) return cmd_train(common, train_data, train_out, train_task);
    if (*ev) return cmd_eval(common, ckpt, eval_data, matcher, threshold, eval_task, eval_out);
    if (*gc) return cmd_gradcheck(common, op, tol);
    if (*conn) return cmd_connectivity(common, conn_data, conn_window, conn_radius, conn_samples, conn_search, conn_out);
    if (*bench) return cmd_bench(common, bench_search, bench_points, bench_window, bench_reps, bench_radius, bench_out);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailed;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoFailed;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoFailed;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kIoFailed;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kIoFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoFailed;
  }
  return kOk;
}
