#include <algorithm>
#include <string>
#include <unordered_set>

#include "maskmesh/types.hpp"

namespace maskmesh {

bool MhrParams::operator==(const MhrParams& other) const {
  auto same = [](const Vector& a, const Vector& b) {
    return a.size() == b.size() && (a.array() == b.array()).all();
  };
  return same(pose, other.pose) && same(shape, other.shape) && same(camera, other.camera) &&
         same(skeleton, other.skeleton) && same(hands, other.hands);
}

bool MhrParams::matches(const ParamLayout& layout) const {
  return pose.size() == layout.pose && shape.size() == layout.shape &&
         camera.size() == layout.camera && skeleton.size() == layout.skeleton &&
         hands.size() == layout.hands;
}

bool MhrParams::all_finite() const {
  return pose.allFinite() && shape.allFinite() && camera.allFinite() && skeleton.allFinite() &&
         hands.allFinite();
}

MhrParams MhrParams::zeros(const ParamLayout& layout) {
  return {Vector::Zero(layout.pose), Vector::Zero(layout.shape), Vector::Zero(layout.camera),
          Vector::Zero(layout.skeleton), Vector::Zero(layout.hands)};
}

std::size_t Masklet::present_count() const {
  return static_cast<std::size_t>(
      std::count_if(masks.begin(), masks.end(), [](const auto& m) { return m.has_value(); }));
}

std::size_t MeshTrajectory::present_count() const {
  return static_cast<std::size_t>(
      std::count_if(params.begin(), params.end(), [](const auto& p) { return p.has_value(); }));
}

std::vector<std::string> ValidatedJob::human_ids() const {
  std::vector<std::string> ids;
  ids.reserve(prompts.size());
  for (const auto& p : prompts) ids.push_back(p.human_id);
  return ids;
}

namespace {

bool within(double v, int limit) { return v >= 0.0 && v <= static_cast<double>(limit); }

void check_prompt(const HumanPrompt& prompt, int frame_count, int width, int height) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::PromptOutOfBounds, "prompt '" + prompt.human_id + "': " + why);
  };
  if (prompt.frame_index < 0 || prompt.frame_index >= frame_count) {
    fail("frame " + std::to_string(prompt.frame_index) + " outside video of " +
         std::to_string(frame_count) + " frames");
  }
  if (const auto* box = std::get_if<BoxPrompt>(&prompt.payload)) {
    if (!within(box->x0, width) || !within(box->x1, width) || !within(box->y0, height) ||
        !within(box->y1, height) || box->x0 > box->x1 || box->y0 > box->y1) {
      fail("box outside frame bounds");
    }
  } else if (const auto* pt = std::get_if<PointPrompt>(&prompt.payload)) {
    if (!within(pt->x, width) || !within(pt->y, height)) fail("point outside frame bounds");
  } else if (const auto* mask = std::get_if<RleMask>(&prompt.payload)) {
    if (mask->width != width || mask->height != height) fail("mask size differs from frames");
    validate(*mask);
  }
}

}  // namespace

ValidatedJob validate_job(std::vector<FrameRef> video, std::vector<HumanPrompt> prompts) {
  if (video.empty()) throw Error(ErrorCode::EmptyVideo, "video has no frames");

  std::sort(video.begin(), video.end(),
            [](const FrameRef& a, const FrameRef& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < video.size(); ++i) {
    if (video[i].index != static_cast<int>(i)) {
      throw Error(ErrorCode::InvalidFrameIndex,
                  "frame indices must be dense from 0; found " + std::to_string(video[i].index) +
                      " at position " + std::to_string(i));
    }
  }
  const int width = video.front().width;
  const int height = video.front().height;
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InconsistentFrameSize, "frame 0 has no pixels");
  }
  for (const FrameRef& f : video) {
    if (f.width != width || f.height != height) {
      throw Error(ErrorCode::InconsistentFrameSize,
                  "frame " + std::to_string(f.index) + " is " + std::to_string(f.width) + "x" +
                      std::to_string(f.height) + ", expected " + std::to_string(width) + "x" +
                      std::to_string(height));
    }
  }

  std::unordered_set<std::string> seen;
  for (const HumanPrompt& p : prompts) {
    if (!seen.insert(p.human_id).second) {
      throw Error(ErrorCode::DuplicateHumanId, "human id '" + p.human_id + "' repeated");
    }
    check_prompt(p, static_cast<int>(video.size()), width, height);
  }

  ValidatedJob job;
  job.frames = std::move(video);
  job.prompts = std::move(prompts);
  job.width = width;
  job.height = height;
  return job;
}

void require_finite(const MeshTrajectory& trajectory, const char* where) {
  for (std::size_t t = 0; t < trajectory.params.size(); ++t) {
    const auto& p = trajectory.params[t];
    if (p && !p->all_finite()) {
      throw Error(ErrorCode::NonFiniteInput, std::string(where) + ": human '" +
                                                 trajectory.human_id + "' frame " +
                                                 std::to_string(t) + " has non-finite parameters");
    }
  }
}

void require_aligned(const Masklet& masklet, const MeshTrajectory& trajectory) {
  if (masklet.masks.size() != trajectory.params.size()) {
    throw Error(ErrorCode::LengthMismatch, "masklet and trajectory lengths differ");
  }
  for (std::size_t t = 0; t < masklet.masks.size(); ++t) {
    if (masklet.masks[t].has_value() != trajectory.params[t].has_value()) {
      throw Error(ErrorCode::LengthMismatch, "human '" + masklet.human_id +
                                                 "': mask/mesh presence differs at frame " +
                                                 std::to_string(t));
    }
  }
}

}  // namespace maskmesh
