// maskmesh: video human mesh recovery orchestration from the command line.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "maskmesh/files.hpp"

namespace fs = std::filesystem;
using namespace maskmesh;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitBackend = 2;
constexpr int kExitData = 3;

/// Raw flag values; applied on top of defaults and the config file only when given.
struct ConfigFlags {
  std::string config_file;
  double iou_threshold = 0;
  int min_area = 0;
  int max_gap = 0;
  int batch_size = 0;
  int completion_width = 0;
  int completion_height = 0;
  double q = 0;
  double r = 0;
  bool no_smoothing = false;
  bool no_unwrap = false;
  bool refiner = true;
  double binarize_threshold = 0;
  int in_flight = 0;
  std::string scene;
  std::string seg_backend;
  std::string completion_backend;
  std::string hmr_backend;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f, bool stage_flags) {
  cmd->add_option("--config", f.config_file, "JSON configuration file")->check(CLI::ExistingFile);
  if (stage_flags) {
    cmd->add_option("--iou-threshold", f.iou_threshold, "occlusion IoU threshold (default 0.7)");
    cmd->add_option("--min-area", f.min_area, "completed area flagging an invisible frame (default 16)");
    cmd->add_option("--max-gap", f.max_gap, "unflagged frames bridged when grouping (default 2)");
    cmd->add_option("--batch-size", f.batch_size, "frames per HMR call (default 32)");
    cmd->add_option("--completion-width", f.completion_width, "completion width (default 1024)");
    cmd->add_option("--completion-height", f.completion_height, "completion height (default 512)");
    cmd->add_flag("--refiner,!--no-refiner", f.refiner, "occlusion-aware refinement (default on)");
    cmd->add_option("--binarize-threshold", f.binarize_threshold, "soft mask threshold (default 0.5)");
    cmd->add_option("--in-flight", f.in_flight, "concurrent HMR calls (default 1)");
    cmd->add_option("--scene", f.scene, "use in-process mock backends scripted by this scene file");
    cmd->add_option("--seg-backend", f.seg_backend, "segmentation backend (mock:FILE, exec:CMD, http://HOST:PORT)");
    cmd->add_option("--completion-backend", f.completion_backend, "completion backend");
    cmd->add_option("--hmr-backend", f.hmr_backend, "HMR backend");
  }
  cmd->add_option("--q", f.q, "process noise (default 1e-3)");
  cmd->add_option("--r", f.r, "measurement noise (default 1e-2)");
  cmd->add_flag("--no-smoothing", f.no_smoothing, "skip pose/hand smoothing");
  cmd->add_flag("--no-unwrap", f.no_unwrap, "do not unwrap rotation channels");
}

PipelineConfig resolve_config(const CLI::App* cmd, const ConfigFlags& f, PipelineConfig config = {}) {
  if (!f.config_file.empty()) config = config_from_json(files::load_json(f.config_file), config);
  auto given = [cmd](const char* name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--iou-threshold")) config.iou_threshold = f.iou_threshold;
  if (given("--min-area")) config.min_area = f.min_area;
  if (given("--max-gap")) config.max_gap = f.max_gap;
  if (given("--batch-size")) config.batch_size = f.batch_size;
  if (given("--completion-width")) config.completion_resolution.width = f.completion_width;
  if (given("--completion-height")) config.completion_resolution.height = f.completion_height;
  if (given("--refiner") || given("--no-refiner")) config.refiner_enabled = f.refiner;
  if (given("--binarize-threshold")) config.binarize_threshold = f.binarize_threshold;
  if (given("--in-flight")) config.in_flight = f.in_flight;
  if (given("--q")) config.smoothing.process_noise = f.q;
  if (given("--r")) config.smoothing.measurement_noise = f.r;
  if (f.no_smoothing) config.smoothing.enabled = false;
  if (f.no_unwrap) config.smoothing.unwrap_rotations = false;
  if (!f.scene.empty()) {
    config.backends.segmentation = config.backends.completion = config.backends.hmr = "mock:" + f.scene;
  }
  if (!f.seg_backend.empty()) config.backends.segmentation = f.seg_backend;
  if (!f.completion_backend.empty()) config.backends.completion = f.completion_backend;
  if (!f.hmr_backend.empty()) config.backends.hmr = f.hmr_backend;
  config.validate();
  return config;
}

void write_run(const fs::path& out, const ValidatedJob& job, const PipelineOutput& result,
               const PipelineConfig& config) {
  fs::create_directories(out);
  const Json snapshot = config_to_json(config);
  files::save_json(out / "masklets.json", files::masklets_to_json(job, result.masklets, config));
  if (result.refinement) {
    files::save_json(out / "refined.json", files::refined_to_json(job, *result.refinement, config));
  }
  files::save_json(out / "trajectories.json",
                   files::trajectories_to_json(result.raw, result.trajectories, true, snapshot));
  files::save_json(out / "report.json", files::report_to_json(result.report, snapshot), 2);
  files::save_json(out / "timings.json", files::timings_to_json(result.report), 2);
}

int exit_code_for(const Error& e) {
  switch (classify(e.code())) {
    case ErrorClass::Usage: return kExitUsage;
    case ErrorClass::Backend: return kExitBackend;
    case ErrorClass::Data: return kExitData;
  }
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mask-guided 4D human mesh recovery orchestration"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kEngineVersion);

  ConfigFlags flags;
  std::string frames_dir, prompts_path, out_path, in_path, masklets_path, refined_path;

  auto* run = app.add_subcommand("run", "full pipeline: segment, refine, hmr, smooth");
  run->add_option("--frames", frames_dir, "directory of numbered PNG frames")->required();
  run->add_option("--prompts", prompts_path, "prompts JSON")->required();
  run->add_option("--out", out_path, "output run directory")->required();
  add_config_flags(run, flags, true);

  auto* segment = app.add_subcommand("segment", "stage 1: masklet generation");
  segment->add_option("--frames", frames_dir)->required();
  segment->add_option("--prompts", prompts_path)->required();
  segment->add_option("--out", out_path, "masklet file to write")->required();
  add_config_flags(segment, flags, true);

  auto* refine_cmd = app.add_subcommand("refine", "stage 2: occlusion-aware refinement");
  refine_cmd->add_option("--frames", frames_dir)->required();
  refine_cmd->add_option("--masklets", masklets_path)->required();
  refine_cmd->add_option("--out", out_path, "refined file to write")->required();
  add_config_flags(refine_cmd, flags, true);

  auto* hmr_cmd = app.add_subcommand("hmr", "stage 3: padded batch mesh recovery");
  hmr_cmd->add_option("--frames", frames_dir)->required();
  auto* from_refined = hmr_cmd->add_option("--refined", refined_path, "refined file");
  auto* from_masklets = hmr_cmd->add_option("--masklets", masklets_path, "masklet file (no refinement)");
  from_refined->excludes(from_masklets);
  hmr_cmd->add_option("--out", out_path, "unsmoothed trajectory file to write")->required();
  add_config_flags(hmr_cmd, flags, true);

  auto* smooth_cmd = app.add_subcommand("smooth", "stage 4: shape lock and temporal smoothing");
  smooth_cmd->add_option("--in", in_path, "trajectory file")->required();
  smooth_cmd->add_option("--out", out_path, "trajectory file to write (default: alongside input)");
  add_config_flags(smooth_cmd, flags, false);

  auto* report = app.add_subcommand("report", "metrics and occlusion summary of a run directory");
  report->add_option("run_dir", in_path)->required();
  report->add_option("--out", out_path, "write the summary here instead of stdout");

  std::string kind_name, scene_path, host = "127.0.0.1";
  int port = 0;
  auto* serve = app.add_subcommand("serve-mock", "serve a scripted mock backend over stdio or HTTP");
  serve->add_option("--kind", kind_name, "segmentation | completion | hmr")->required();
  serve->add_option("--scene", scene_path)->required();
  serve->add_option("--http", port, "listen on this port instead of stdio");
  serve->add_option("--host", host);

  auto* render = app.add_subcommand("render-scene", "write frames and prompts for a mock scene");
  render->add_option("--scene", scene_path)->required();
  render->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) {
      const PipelineConfig config = resolve_config(run, flags);
      const auto frames = files::load_frames(frames_dir);
      const ValidatedJob job = files::job_from(frames, files::load_prompts(prompts_path));
      Backends backends = connect_backends(config, true, config.refiner_enabled, true);
      const PipelineOutput result = run_pipeline(job, frames.images, config, backends);
      write_run(out_path, job, result, config);
      std::cerr << "wrote " << (fs::path(out_path) / "trajectories.json").string() << "\n";
    } else if (*segment) {
      const PipelineConfig config = resolve_config(segment, flags);
      const auto frames = files::load_frames(frames_dir);
      const ValidatedJob job = files::job_from(frames, files::load_prompts(prompts_path));
      Backends backends = connect_backends(config, true, false, false);
      const auto masklets = stage_segment(job, frames.images, config, *backends.segmentation);
      files::save_json(out_path, files::masklets_to_json(job, masklets, config));
    } else if (*refine_cmd) {
      const PipelineConfig config = resolve_config(refine_cmd, flags);
      const auto frames = files::load_frames(frames_dir);
      const auto input = files::masklets_from_json(files::load_json(masklets_path));
      const ValidatedJob job = files::job_from(frames, input.prompts);
      Backends backends = connect_backends(config, false, true, false);
      const auto refinement = stage_refine(job, frames.images, input.masklets, config, *backends.completion);
      files::save_json(out_path, files::refined_to_json(job, refinement, config));
    } else if (*hmr_cmd) {
      if (refined_path.empty() && masklets_path.empty()) {
        throw Error(ErrorCode::InvalidConfig, "hmr needs --refined or --masklets");
      }
      const PipelineConfig config = resolve_config(hmr_cmd, flags);
      const auto frames = files::load_frames(frames_dir);
      std::vector<Masklet> masklets;
      std::vector<std::map<int, EncodedImage>> overrides;
      if (!refined_path.empty()) {
        auto refined = files::refined_from_json(files::load_json(refined_path));
        overrides = image_overrides(refined.refinement);
        masklets = std::move(refined.refinement.masklets);
      } else {
        masklets = files::masklets_from_json(files::load_json(masklets_path)).masklets;
      }
      for (const auto& m : masklets) {
        if (m.masks.size() != frames.images.size()) {
          throw Error(ErrorCode::LengthMismatch, "masklets do not match the frame directory");
        }
      }
      Backends backends = connect_backends(config, false, false, true);
      const auto workers = backends.hmr_workers();
      const auto out = stage_hmr(frames.images, masklets, overrides, config, workers);
      files::save_json(out_path, files::trajectories_to_json(out.trajectories, out.trajectories, false,
                                                             config_to_json(config)));
    } else if (*smooth_cmd) {
      const auto input = files::trajectories_from_json(files::load_json(in_path));
      const PipelineConfig config =
          resolve_config(smooth_cmd, flags, config_from_json(input.config));
      const auto smoothed = stage_smooth(input.raw, config.smoothing);
      fs::path target = out_path.empty() ? fs::path(in_path).replace_filename("trajectories.smoothed.json")
                                         : fs::path(out_path);
      files::save_json(target, files::trajectories_to_json(input.raw, smoothed, true, config_to_json(config)));
    } else if (*report) {
      const Json summary = files::summarize_run(in_path);
      if (out_path.empty()) {
        std::cout << summary.dump(2) << "\n";
      } else {
        files::save_json(out_path, summary, 2);
      }
    } else if (*serve) {
      const auto kind = protocol::backend_kind_from_string(kind_name);
      const auto scene = mock::Scene::load(scene_path);
      auto server = mock::make_server(kind, scene, std::make_shared<mock::SimulatedClock>());
      if (port > 0) {
        protocol::HttpServer http;
        http.run(server, host, port);
      } else {
        std::ios::sync_with_stdio(false);
        protocol::serve_stream(*server, std::cin, std::cout);
      }
    } else if (*render) {
      const auto scene = mock::Scene::load(scene_path);
      const fs::path out = out_path;
      fs::create_directories(out / "frames");
      for (int t = 0; t < scene.frames; ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "%04d.png", t + 1);
        write_file(out / "frames" / name, encode_png(scene.render(t)).png);
      }
      files::save_json(out / "prompts.json", files::prompts_to_json(scene.prompts()), 2);
    }
  } catch (const Error& e) {
    std::cerr << "maskmesh: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "maskmesh: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
