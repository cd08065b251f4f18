#include "maskmesh/files.hpp"

#include <algorithm>
#include <cctype>

namespace maskmesh::files {

using namespace protocol;

namespace {

constexpr int kFormatVersion = 1;

template <typename Fn>
auto as_data_error(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidInput, what + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BackendProtocolError) {
      throw Error(ErrorCode::InvalidInput, what + ": " + e.what());
    }
    throw;
  }
}

void expect_format(const Json& j, const char* format) {
  if (!j.is_object() || j.value("format", std::string()) != format) {
    throw Error(ErrorCode::InvalidInput, std::string("expected a '") + format + "' file");
  }
  if (j.value("version", 0) != kFormatVersion) {
    throw Error(ErrorCode::InvalidInput, std::string("unsupported ") + format + " version");
  }
}

Json header(const char* format) {
  return Json{{"format", format}, {"version", kFormatVersion}, {"engine_version", kEngineVersion}};
}

Json prompt_to_file(const HumanPrompt& p) {
  Json j = prompt_to_json(p);
  j["frame"] = p.frame_index + 1;
  return j;
}

HumanPrompt prompt_from_file(const Json& j) {
  HumanPrompt p = prompt_from_json(j);
  p.frame_index -= 1;
  return p;
}

Json masks_to_json(const std::vector<std::optional<RleMask>>& masks) {
  Json arr = Json::array();
  for (const auto& m : masks) arr.push_back(optional_rle_to_json(m));
  return arr;
}

std::vector<std::optional<RleMask>> masks_from_json(const Json& arr) {
  std::vector<std::optional<RleMask>> out;
  for (const auto& m : arr) out.push_back(optional_rle_from_json(m));
  return out;
}

Json optional_params(const std::optional<MhrParams>& p) {
  return p ? params_to_json(*p) : Json(nullptr);
}

std::optional<MhrParams> optional_params_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return params_from_json(j);
}

Json intervals_to_json(const std::vector<OcclusionInterval>& intervals) {
  Json arr = Json::array();
  for (const auto& iv : intervals) {
    arr.push_back(Json{{"id", iv.human_id}, {"start", iv.start + 1}, {"end", iv.end + 1}});
  }
  return arr;
}

std::vector<OcclusionInterval> intervals_from_json(const Json& arr) {
  std::vector<OcclusionInterval> out;
  for (const auto& iv : arr) {
    out.push_back({iv.at("id").get<std::string>(), iv.at("start").get<int>() - 1,
                   iv.at("end").get<int>() - 1});
  }
  return out;
}

MaskletFile masklet_base_from_json(const Json& j) {
  MaskletFile f;
  f.frames = j.at("frames").get<int>();
  f.width = j.at("width").get<int>();
  f.height = j.at("height").get<int>();
  f.config = j.at("config");
  for (const auto& p : j.at("prompts")) f.prompts.push_back(prompt_from_file(p));
  for (const auto& h : j.at("humans")) {
    Masklet m{h.at("id").get<std::string>(), masks_from_json(h.at("masks"))};
    if (static_cast<int>(m.masks.size()) != f.frames) {
      throw Error(ErrorCode::InvalidInput, "masklet '" + m.human_id + "' has wrong length");
    }
    f.masklets.push_back(std::move(m));
  }
  return f;
}

Json masklet_base_to_json(const char* format, const ValidatedJob& job,
                          const std::vector<Masklet>& masklets, const PipelineConfig& config) {
  Json j = header(format);
  j["frames"] = job.frame_count();
  j["width"] = job.width;
  j["height"] = job.height;
  j["config"] = config_to_json(config);
  Json prompts = Json::array();
  for (const auto& p : job.prompts) prompts.push_back(prompt_to_file(p));
  j["prompts"] = prompts;
  Json humans = Json::array();
  for (const auto& m : masklets) humans.push_back(Json{{"id", m.human_id}, {"masks", masks_to_json(m.masks)}});
  j["humans"] = humans;
  return j;
}

std::optional<double> optional_jitter(const MeshTrajectory& traj) {
  try {
    return jitter_metric(traj);
  } catch (const Error&) {
    return std::nullopt;
  }
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

FrameDirectory load_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::InvalidInput, dir.string() + " is not a directory");
  std::vector<std::pair<long long, fs::path>> numbered;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".png") continue;
    const std::string stem = entry.path().stem().string();
    const auto last = stem.find_last_of("0123456789");
    if (last == std::string::npos) {
      throw Error(ErrorCode::InvalidInput, "frame file '" + stem + "' carries no number");
    }
    auto first = last;
    while (first > 0 && std::isdigit(static_cast<unsigned char>(stem[first - 1]))) --first;
    numbered.emplace_back(std::stoll(stem.substr(first, last - first + 1)), entry.path());
  }
  std::sort(numbered.begin(), numbered.end());
  for (std::size_t i = 1; i < numbered.size(); ++i) {
    if (numbered[i].first == numbered[i - 1].first) {
      throw Error(ErrorCode::InvalidInput, "two frames share number " + std::to_string(numbered[i].first));
    }
  }
  FrameDirectory out;
  for (std::size_t i = 0; i < numbered.size(); ++i) {
    EncodedImage img = load_png_file(numbered[i].second);
    out.refs.push_back({static_cast<int>(i), numbered[i].second.string(), img.width, img.height});
    out.images.push_back(std::move(img));
  }
  return out;
}

Json load_json(const fs::path& path) {
  Json j = Json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidInput, path.string() + " is not valid JSON");
  return j;
}

void save_json(const fs::path& path, const Json& j, int indent) {
  write_file(path, j.dump(indent) + "\n");
}

std::vector<HumanPrompt> load_prompts(const fs::path& path) {
  const Json j = load_json(path);
  return as_data_error(path.string(), [&] {
    if (!j.is_array()) throw Error(ErrorCode::InvalidInput, "prompts file must hold an array");
    std::vector<HumanPrompt> out;
    for (const auto& p : j) out.push_back(prompt_from_file(p));
    return out;
  });
}

Json prompts_to_json(const std::vector<HumanPrompt>& prompts) {
  Json arr = Json::array();
  for (const auto& p : prompts) arr.push_back(prompt_to_file(p));
  return arr;
}

Json masklets_to_json(const ValidatedJob& job, const std::vector<Masklet>& masklets,
                      const PipelineConfig& config) {
  return masklet_base_to_json("maskmesh.masklets", job, masklets, config);
}

MaskletFile masklets_from_json(const Json& j) {
  expect_format(j, "maskmesh.masklets");
  return as_data_error("masklet file", [&] { return masklet_base_from_json(j); });
}

Json refined_to_json(const ValidatedJob& job, const RefinementResult& refinement,
                     const PipelineConfig& config) {
  Json j = masklet_base_to_json("maskmesh.refined", job, refinement.masklets, config);
  for (std::size_t h = 0; h < refinement.masklets.size(); ++h) {
    Json& human = j["humans"][h];
    human["flags"] = refinement.flags[h].flags;
    Json evidence = Json::array();
    for (const auto& ev : refinement.evidence) {
      if (ev.human_id != refinement.masklets[h].human_id) continue;
      for (const auto& [t, image] : ev.frames) {
        evidence.push_back(Json{{"frame", t + 1}, {"image", image_to_json(image)}, {"mask", rle_to_json(ev.masks.at(t))}});
      }
    }
    human["evidence"] = evidence;
  }
  j["occlusion_intervals"] = intervals_to_json(refinement.intervals);
  return j;
}

RefinedFile refined_from_json(const Json& j) {
  expect_format(j, "maskmesh.refined");
  return as_data_error("refined file", [&] {
    RefinedFile f;
    f.base = masklet_base_from_json(j);
    f.refinement.masklets = f.base.masklets;
    f.refinement.intervals = intervals_from_json(j.at("occlusion_intervals"));
    const Json& humans = j.at("humans");
    for (std::size_t h = 0; h < humans.size(); ++h) {
      const Json& human = humans[h];
      OcclusionFlags flags{f.base.masklets[h].human_id, human.at("flags").get<std::vector<bool>>()};
      if (static_cast<int>(flags.flags.size()) != f.base.frames) {
        throw Error(ErrorCode::InvalidInput, "flags for '" + flags.human_id + "' have wrong length");
      }
      f.refinement.flags.push_back(std::move(flags));
      RefinedEvidence ev{f.base.masklets[h].human_id, {}, {}};
      for (const auto& e : human.at("evidence")) {
        const int t = e.at("frame").get<int>() - 1;
        if (t < 0 || t >= f.base.frames) throw Error(ErrorCode::InvalidInput, "evidence frame out of range");
        ev.frames[t] = image_from_json(e.at("image"));
        ev.masks[t] = rle_from_json(e.at("mask"));
      }
      if (!ev.frames.empty()) f.refinement.evidence.push_back(std::move(ev));
    }
    return f;
  });
}

Json trajectories_to_json(const std::vector<MeshTrajectory>& raw,
                          const std::vector<MeshTrajectory>& final_trajectories, bool smoothed,
                          const Json& config_snapshot) {
  if (raw.size() != final_trajectories.size()) {
    throw Error(ErrorCode::LengthMismatch, "raw and final trajectory sets differ");
  }
  Json j = header("maskmesh.trajectories");
  const int frames = raw.empty() ? 0 : static_cast<int>(raw.front().params.size());
  j["frames"] = frames;
  Json ids = Json::array();
  for (const auto& t : raw) ids.push_back(t.human_id);
  j["humans"] = ids;
  j["layout"] = raw.empty() ? Json(nullptr) : layout_to_json(raw.front().layout);
  j["smoothed"] = smoothed;
  j["config"] = config_snapshot;
  Json trajs = Json::array();
  for (std::size_t h = 0; h < raw.size(); ++h) {
    Json records = Json::array();
    for (int t = 0; t < frames; ++t) {
      records.push_back(Json{{"frame", t + 1},
                             {"raw", optional_params(raw[h].params[t])},
                             {"theta", optional_params(final_trajectories[h].params[t])}});
    }
    trajs.push_back(Json{{"id", raw[h].human_id}, {"frames", records}});
  }
  j["trajectories"] = trajs;
  return j;
}

TrajectoryFile trajectories_from_json(const Json& j) {
  expect_format(j, "maskmesh.trajectories");
  return as_data_error("trajectory file", [&] {
    TrajectoryFile f;
    f.frames = j.at("frames").get<int>();
    if (!j.at("layout").is_null()) f.layout = layout_from_json(j["layout"]);
    f.config = j.at("config");
    f.smoothed = j.at("smoothed").get<bool>();
    for (const auto& tj : j.at("trajectories")) {
      MeshTrajectory raw{tj.at("id").get<std::string>(), {}, f.layout};
      MeshTrajectory fin = raw;
      for (const auto& rec : tj.at("frames")) {
        raw.params.push_back(optional_params_from(rec.at("raw")));
        fin.params.push_back(optional_params_from(rec.at("theta")));
      }
      if (static_cast<int>(raw.params.size()) != f.frames) {
        throw Error(ErrorCode::InvalidInput, "trajectory '" + raw.human_id + "' has wrong length");
      }
      for (const auto* traj : {&raw, &fin}) {
        for (const auto& p : traj->params) {
          if (p && !p->matches(f.layout)) {
            throw Error(ErrorCode::InvalidInput, "parameters do not match the declared layout");
          }
        }
      }
      f.raw.push_back(std::move(raw));
      f.trajectories.push_back(std::move(fin));
    }
    return f;
  });
}

Json report_to_json(const RunReport& report, const Json& config_snapshot) {
  Json j = header("maskmesh.report");
  j["frames"] = report.frames;
  j["config"] = config_snapshot;
  j["calls"] = Json{{"segmentation", report.segmentation_calls},
                    {"completion", report.completion_calls},
                    {"hmr", report.hmr_calls},
                    {"hmr_sequential", report.hmr_sequential_calls}};
  j["slots"] = Json{{"valid", report.valid_slots}, {"padding", report.padding_slots}};
  j["occlusion_intervals"] = intervals_to_json(report.intervals);
  Json humans = Json::array();
  for (const auto& h : report.humans) {
    humans.push_back(Json{{"id", h.human_id},
                          {"present_frames", h.present_frames},
                          {"jitter_raw", optional_number(h.jitter_raw)},
                          {"jitter_smoothed", optional_number(h.jitter_smoothed)}});
  }
  j["humans"] = humans;
  return j;
}

Json timings_to_json(const RunReport& report) {
  Json stages = Json::object();
  for (const auto& [name, ms] : report.timings_ms) stages[name] = ms;
  return Json{{"format", "maskmesh.timings"}, {"version", kFormatVersion}, {"stages_ms", stages}};
}

Json summarize_run(const fs::path& run_dir) {
  const TrajectoryFile traj = trajectories_from_json(load_json(run_dir / "trajectories.json"));
  Json summary{{"frames", traj.frames}, {"smoothed", traj.smoothed}};
  Json humans = Json::array();
  for (std::size_t h = 0; h < traj.raw.size(); ++h) {
    humans.push_back(Json{{"id", traj.raw[h].human_id},
                          {"present_frames", traj.trajectories[h].present_count()},
                          {"jitter_raw", optional_number(optional_jitter(traj.raw[h]))},
                          {"jitter_smoothed", optional_number(optional_jitter(traj.trajectories[h]))}});
  }
  summary["humans"] = humans;
  const fs::path report_path = run_dir / "report.json";
  if (fs::exists(report_path)) {
    const Json report = load_json(report_path);
    expect_format(report, "maskmesh.report");
    summary["occlusion_intervals"] = report.at("occlusion_intervals");
    summary["calls"] = report.at("calls");
    const double batched = report["calls"].value("hmr", 0.0);
    const double sequential = report["calls"].value("hmr_sequential", 0.0);
    summary["hmr_call_reduction"] = batched > 0 ? Json(sequential / batched) : Json(nullptr);
  }
  summary["config"] = traj.config;
  return summary;
}

ValidatedJob job_from(const FrameDirectory& frames, const std::vector<HumanPrompt>& prompts) {
  return validate_job(frames.refs, prompts);
}

}  // namespace maskmesh::files
