#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "maskmesh/mask.hpp"

namespace maskmesh {

using Vector = Eigen::VectorXd;

/// One video frame. Indices are 0-based and dense within a video.
struct FrameRef {
  int index = 0;
  std::string path;
  int width = 0;
  int height = 0;
};

struct BoxPrompt {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct PointPrompt {
  double x = 0, y = 0;
  bool positive = true;
};

using PromptPayload = std::variant<BoxPrompt, PointPrompt, RleMask>;

enum class PromptKind { Box, Point, Mask };

struct HumanPrompt {
  std::string human_id;
  int frame_index = 0;
  PromptPayload payload;

  PromptKind kind() const { return static_cast<PromptKind>(payload.index()); }
};

/// Mesh parameter dimensions, declared by the HMR backend at handshake.
struct ParamLayout {
  int pose = 0;
  int shape = 0;
  int camera = 0;
  int skeleton = 0;
  int hands = 0;
  /// Pose channels holding angles, unwrapped before smoothing.
  std::set<int> rotation_channels;

  bool operator==(const ParamLayout&) const = default;
};

/// One frame's mesh parameters: pose, shape, camera, skeleton plus hand channels.
struct MhrParams {
  Vector pose;
  Vector shape;
  Vector camera;
  Vector skeleton;
  Vector hands;

  bool operator==(const MhrParams& other) const;

  bool matches(const ParamLayout& layout) const;
  bool all_finite() const;

  static MhrParams zeros(const ParamLayout& layout);
};

struct Masklet {
  std::string human_id;
  std::vector<std::optional<RleMask>> masks;

  bool operator==(const Masklet&) const = default;
  std::size_t present_count() const;
};

struct MeshTrajectory {
  std::string human_id;
  std::vector<std::optional<MhrParams>> params;
  ParamLayout layout;

  bool operator==(const MeshTrajectory&) const = default;
  std::size_t present_count() const;
};

/// A checked job: dense frames of uniform size and uniquely identified prompts.
struct ValidatedJob {
  std::vector<FrameRef> frames;
  std::vector<HumanPrompt> prompts;
  int width = 0;
  int height = 0;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int human_count() const { return static_cast<int>(prompts.size()); }
  std::vector<std::string> human_ids() const;
};

ValidatedJob validate_job(std::vector<FrameRef> video, std::vector<HumanPrompt> prompts);

/// Throws NonFiniteInput when any present parameter vector holds a NaN or infinity.
void require_finite(const MeshTrajectory& trajectory, const char* where);

/// Checks the mask/mesh one-to-one correspondence; throws LengthMismatch.
void require_aligned(const Masklet& masklet, const MeshTrajectory& trajectory);

}  // namespace maskmesh
