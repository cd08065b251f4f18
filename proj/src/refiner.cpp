#include "maskmesh/refiner.hpp"

namespace maskmesh {

bool detect_occlusion(const RleMask& visible, const RleMask& completed, double iou_threshold) {
  if (visible.width != completed.width || visible.height != completed.height) {
    throw Error(ErrorCode::DimensionMismatch, "visible and completed masks differ in size");
  }
  return area(completed) > area(visible) && iou(completed, visible) < iou_threshold;
}

OcclusionFlags compute_flags(const Masklet& visible, const Masklet& completed,
                             const RefinerConfig& config) {
  if (visible.masks.size() != completed.masks.size()) {
    throw Error(ErrorCode::LengthMismatch, "masklet lengths differ for '" + visible.human_id + "'");
  }
  OcclusionFlags out{visible.human_id, std::vector<bool>(visible.masks.size(), false)};
  for (std::size_t t = 0; t < visible.masks.size(); ++t) {
    const auto& vis = visible.masks[t];
    const auto& comp = completed.masks[t];
    if (vis && comp) {
      out.flags[t] = detect_occlusion(*vis, *comp, config.iou_threshold);
    } else if (!vis && comp) {
      out.flags[t] = area(*comp) >= config.min_area;
    }
  }
  return out;
}

std::vector<OcclusionInterval> group_occluded_frames(const OcclusionFlags& flags, int max_gap) {
  if (max_gap < 0) throw Error(ErrorCode::InvalidConfig, "max_gap must be non-negative");
  std::vector<OcclusionInterval> out;
  const int n = static_cast<int>(flags.flags.size());
  for (int t = 0; t < n;) {
    if (!flags.flags[t]) {
      ++t;
      continue;
    }
    int end = t;
    while (end + 1 < n && flags.flags[end + 1]) ++end;
    if (!out.empty() && t - out.back().end - 1 <= max_gap) {
      out.back().end = end;
    } else {
      out.push_back({flags.human_id, t, end});
    }
    t = end + 1;
  }
  return out;
}

namespace {

std::optional<RleMask> to_video(const std::optional<RleMask>& mask, int width, int height) {
  if (!mask) return std::nullopt;
  return resample_nearest(*mask, width, height);
}

}  // namespace

RefinementResult refine(const ValidatedJob& job, std::span<const EncodedImage> frames,
                        const std::vector<Masklet>& masklets, CompletionClient& backend,
                        const RefinerConfig& config) {
  if (static_cast<int>(frames.size()) != job.frame_count()) {
    throw Error(ErrorCode::LengthMismatch, "frame images do not match the job");
  }
  RefinementResult result;
  result.masklets = masklets;
  const std::vector<EncodedImage> all_frames(frames.begin(), frames.end());

  for (std::size_t h = 0; h < masklets.size(); ++h) {
    const Masklet& visible = masklets[h];
    if (visible.masks.size() != frames.size()) {
      throw Error(ErrorCode::LengthMismatch, "masklet '" + visible.human_id + "' has wrong length");
    }

    protocol::CompletePass pass{visible.human_id, config.completion_resolution, all_frames,
                                visible.masks};
    const auto completed_raw = backend.complete(pass);
    Masklet completed{visible.human_id, {}};
    for (const auto& m : completed_raw.completed_masks) {
      completed.masks.push_back(to_video(m, job.width, job.height));
    }

    OcclusionFlags flags = compute_flags(visible, completed, config);
    auto intervals = group_occluded_frames(flags, config.max_gap);

    RefinedEvidence evidence{visible.human_id, {}, {}};
    for (const auto& interval : intervals) {
      protocol::RecoverClip clip;
      clip.human_id = visible.human_id;
      clip.start = interval.start;
      clip.end = interval.end;
      clip.resolution = config.completion_resolution;
      for (int t = interval.start; t <= interval.end; ++t) {
        clip.frames.push_back(frames[t]);
        clip.visible_masks.push_back(visible.masks[t]);
      }
      auto recovered = backend.recover(clip);
      for (int t = interval.start; t <= interval.end; ++t) {
        const std::size_t k = static_cast<std::size_t>(t - interval.start);
        auto mask = to_video(recovered.refined_masks[k], job.width, job.height);
        evidence.frames[t] = std::move(recovered.refined_images[k]);
        evidence.masks[t] = mask ? std::move(*mask) : RleMask::empty(job.width, job.height);
      }
    }

    Masklet& refined = result.masklets[h];
    for (std::size_t t = 0; t < flags.flags.size(); ++t) {
      if (flags.flags[t]) refined.masks[t] = completed.masks[t];
    }

    if (!intervals.empty()) result.evidence.push_back(std::move(evidence));
    result.intervals.insert(result.intervals.end(), intervals.begin(), intervals.end());
    result.flags.push_back(std::move(flags));
  }
  return result;
}

std::vector<std::map<int, EncodedImage>> image_overrides(const RefinementResult& refinement) {
  std::vector<std::map<int, EncodedImage>> out(refinement.masklets.size());
  for (std::size_t h = 0; h < refinement.masklets.size(); ++h) {
    const auto& flags = refinement.flags[h].flags;
    for (const auto& ev : refinement.evidence) {
      if (ev.human_id != refinement.masklets[h].human_id) continue;
      for (const auto& [t, image] : ev.frames) {
        if (flags[t]) out[h].emplace(t, image);
      }
    }
  }
  return out;
}

}  // namespace maskmesh
