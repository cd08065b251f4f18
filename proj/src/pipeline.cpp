#include "maskmesh/pipeline.hpp"

#include <chrono>

namespace maskmesh {

using protocol::BackendKind;

void PipelineConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) fail("iou_threshold must lie in (0, 1)");
  if (min_area < 0) fail("min_area must be non-negative");
  if (max_gap < 0) fail("max_gap must be non-negative");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (in_flight < 1) fail("in_flight must be at least 1");
  if (completion_resolution.width < 1 || completion_resolution.height < 1) {
    fail("completion resolution must be positive");
  }
  if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) {
    fail("binarize_threshold must lie in (0, 1)");
  }
  smoothing.validate();
}

RefinerConfig PipelineConfig::refiner() const {
  return {iou_threshold, min_area, max_gap, completion_resolution};
}

Json config_to_json(const PipelineConfig& c) {
  return Json{{"iou_threshold", c.iou_threshold},
              {"min_area", c.min_area},
              {"max_gap", c.max_gap},
              {"batch_size", c.batch_size},
              {"completion_resolution",
               {{"width", c.completion_resolution.width}, {"height", c.completion_resolution.height}}},
              {"refiner_enabled", c.refiner_enabled},
              {"binarize_threshold", c.binarize_threshold},
              {"in_flight", c.in_flight},
              {"smoothing",
               {{"q", c.smoothing.process_noise},
                {"r", c.smoothing.measurement_noise},
                {"enabled", c.smoothing.enabled},
                {"unwrap_rotations", c.smoothing.unwrap_rotations}}}};
}

PipelineConfig config_from_json(const Json& j, PipelineConfig c) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "configuration must be a JSON object");
  try {
    c.iou_threshold = j.value("iou_threshold", c.iou_threshold);
    c.min_area = j.value("min_area", c.min_area);
    c.max_gap = j.value("max_gap", c.max_gap);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("completion_resolution")) {
      const Json& r = j["completion_resolution"];
      c.completion_resolution.width = r.value("width", c.completion_resolution.width);
      c.completion_resolution.height = r.value("height", c.completion_resolution.height);
    }
    c.refiner_enabled = j.value("refiner_enabled", c.refiner_enabled);
    c.binarize_threshold = j.value("binarize_threshold", c.binarize_threshold);
    c.in_flight = j.value("in_flight", c.in_flight);
    if (j.contains("smoothing")) {
      const Json& s = j["smoothing"];
      c.smoothing.process_noise = s.value("q", c.smoothing.process_noise);
      c.smoothing.measurement_noise = s.value("r", c.smoothing.measurement_noise);
      c.smoothing.enabled = s.value("enabled", c.smoothing.enabled);
      c.smoothing.unwrap_rotations = s.value("unwrap_rotations", c.smoothing.unwrap_rotations);
    }
    if (j.contains("backends")) {
      const Json& b = j["backends"];
      c.backends.segmentation = b.value("segmentation", c.backends.segmentation);
      c.backends.completion = b.value("completion", c.backends.completion);
      c.backends.hmr = b.value("hmr", c.backends.hmr);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return c;
}

std::vector<HmrClient*> Backends::hmr_workers() const {
  std::vector<HmrClient*> out;
  for (const auto& c : hmr) out.push_back(c.get());
  return out;
}

std::unique_ptr<protocol::Channel> open_channel(const std::string& spec, BackendKind kind,
                                                std::shared_ptr<mock::SimulatedClock> clock) {
  if (spec.rfind("mock:", 0) == 0) {
    const mock::Scene scene = mock::Scene::load(spec.substr(5));
    return std::make_unique<protocol::LoopbackChannel>(mock::make_server(kind, scene, std::move(clock)));
  }
  if (spec.rfind("exec:", 0) == 0) {
    return std::make_unique<protocol::SubprocessChannel>(spec.substr(5));
  }
  if (spec.rfind("http://", 0) == 0) {
    const std::string rest = spec.substr(7);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::InvalidConfig, "HTTP backend needs host:port");
    std::string host = rest.substr(0, colon);
    std::string port_text = rest.substr(colon + 1);
    if (const auto slash = port_text.find('/'); slash != std::string::npos) port_text.resize(slash);
    int port = 0;
    try {
      port = std::stoi(port_text);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad port in '" + spec + "'");
    }
    return std::make_unique<protocol::HttpChannel>(std::move(host), port);
  }
  if (spec.empty()) {
    throw Error(ErrorCode::InvalidConfig, std::string("no ") + protocol::to_string(kind) + " backend configured");
  }
  throw Error(ErrorCode::InvalidConfig, "unrecognised backend '" + spec + "'");
}

Backends connect_backends(const PipelineConfig& config, bool need_segmentation, bool need_completion,
                          bool need_hmr) {
  Backends b;
  if (need_segmentation) {
    b.segmentation = std::make_unique<SegmentationClient>(
        open_channel(config.backends.segmentation, BackendKind::Segmentation));
  }
  if (need_completion) {
    b.completion = std::make_unique<CompletionClient>(
        open_channel(config.backends.completion, BackendKind::Completion));
  }
  if (need_hmr) {
    b.clock = std::make_shared<mock::SimulatedClock>();
    for (int i = 0; i < config.in_flight; ++i) {
      b.hmr.push_back(std::make_unique<HmrClient>(open_channel(config.backends.hmr, BackendKind::Hmr, b.clock)));
    }
  }
  return b;
}

double jitter_metric(const MeshTrajectory& trajectory) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t t = 1; t < trajectory.params.size(); ++t) {
    const auto& a = trajectory.params[t - 1];
    const auto& b = trajectory.params[t];
    if (!a || !b) continue;
    const double pose = (b->pose - a->pose).squaredNorm();
    const double hands = (b->hands - a->hands).squaredNorm();
    total += std::sqrt(pose + hands);
    ++pairs;
  }
  if (pairs == 0) {
    throw Error(ErrorCode::InsufficientFrames,
                "human '" + trajectory.human_id + "' has no adjacent present frames");
  }
  return total / static_cast<double>(pairs);
}

std::vector<Masklet> stage_segment(const ValidatedJob& job, std::span<const EncodedImage> frames,
                                   const PipelineConfig& config, SegmentationClient& backend) {
  return generate_masklets(job, frames, backend, config.binarize_threshold);
}

RefinementResult stage_refine(const ValidatedJob& job, std::span<const EncodedImage> frames,
                              const std::vector<Masklet>& masklets, const PipelineConfig& config,
                              CompletionClient& backend) {
  return refine(job, frames, masklets, backend, config.refiner());
}

HmrStageOutput stage_hmr(std::span<const EncodedImage> frames, const std::vector<Masklet>& masklets,
                         const std::vector<std::map<int, EncodedImage>>& overrides,
                         const PipelineConfig& config, std::span<HmrClient* const> workers) {
  HmrStageOutput out;
  out.plan = plan_batches(visibility_of(masklets), config.batch_size);
  const HmrEvidence evidence{frames, masklets, overrides};
  out.trajectories = run_hmr(evidence, out.plan, workers);
  for (std::size_t h = 0; h < masklets.size(); ++h) require_aligned(masklets[h], out.trajectories[h]);
  return out;
}

std::vector<MeshTrajectory> stage_smooth(const std::vector<MeshTrajectory>& raw,
                                         const SmoothingConfig& config) {
  std::vector<MeshTrajectory> out;
  out.reserve(raw.size());
  for (const auto& traj : raw) out.push_back(smooth_trajectory(lock_shape(traj), config));
  return out;
}

namespace {

template <typename Fn>
auto timed_stage(const char* name, RunReport& report, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  try {
    auto result = fn();
    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
    report.timings_ms.emplace_back(name, elapsed.count());
    return result;
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

}  // namespace

PipelineOutput run_pipeline(const ValidatedJob& job, std::span<const EncodedImage> frames,
                            const PipelineConfig& config, Backends& backends) {
  config.validate();
  PipelineOutput out;
  RunReport timings;

  if (!backends.segmentation) throw Error(ErrorCode::BackendUnavailable, "segmentation backend missing");
  out.masklets = timed_stage("segment", timings, [&] {
    return stage_segment(job, frames, config, *backends.segmentation);
  });

  std::vector<std::map<int, EncodedImage>> overrides;
  const std::vector<Masklet>* hmr_masklets = &out.masklets;
  if (config.refiner_enabled) {
    if (!backends.completion) throw Error(ErrorCode::BackendUnavailable, "completion backend missing");
    out.refinement = timed_stage("refine", timings, [&] {
      return stage_refine(job, frames, out.masklets, config, *backends.completion);
    });
    overrides = image_overrides(*out.refinement);
    hmr_masklets = &out.refinement->masklets;
  }

  const auto workers = backends.hmr_workers();
  auto hmr = timed_stage("hmr", timings, [&] {
    return stage_hmr(frames, *hmr_masklets, overrides, config, workers);
  });
  out.raw = std::move(hmr.trajectories);
  out.trajectories = timed_stage("smooth", timings, [&] { return stage_smooth(out.raw, config.smoothing); });

  out.report = summarize(out);
  out.report.frames = job.frame_count();
  out.report.segmentation_calls = static_cast<std::size_t>(job.frame_count());
  if (out.refinement) {
    out.report.completion_calls = out.masklets.size() + out.refinement->intervals.size();
  }
  out.report.hmr_calls = call_count(hmr.plan);
  out.report.hmr_sequential_calls = sequential_call_count(hmr.plan);
  out.report.valid_slots = hmr.plan.valid_slots();
  out.report.padding_slots = hmr.plan.padding_slots();
  out.report.timings_ms = std::move(timings.timings_ms);
  return out;
}

RunReport summarize(const PipelineOutput& output) {
  RunReport report;
  report.frames = output.trajectories.empty() ? 0 : static_cast<int>(output.trajectories[0].params.size());
  for (std::size_t h = 0; h < output.trajectories.size(); ++h) {
    HumanSummary s;
    s.human_id = output.trajectories[h].human_id;
    s.present_frames = output.trajectories[h].present_count();
    try {
      s.jitter_raw = jitter_metric(output.raw[h]);
      s.jitter_smoothed = jitter_metric(output.trajectories[h]);
    } catch (const Error&) {
      s.jitter_raw.reset();
      s.jitter_smoothed.reset();
    }
    report.humans.push_back(std::move(s));
  }
  if (output.refinement) report.intervals = output.refinement->intervals;
  return report;
}

}  // namespace maskmesh
