#pragma once

#include <map>
#include <span>
#include <vector>

#include "maskmesh/clients.hpp"

namespace maskmesh {

struct RefinerConfig {
  /// Upper bound (exclusive) on IoU for a frame to count as occluded.
  double iou_threshold = 0.7;
  /// Completed area needed to flag a frame with no visible mask.
  int min_area = 16;
  /// Runs of flagged frames separated by at most this many unflagged frames are merged.
  int max_gap = 2;
  protocol::Resolution completion_resolution{1024, 512};
};

struct OcclusionFlags {
  std::string human_id;
  std::vector<bool> flags;

  bool operator==(const OcclusionFlags&) const = default;
};

/// Inclusive frame range.
struct OcclusionInterval {
  std::string human_id;
  int start = 0;
  int end = 0;

  bool operator==(const OcclusionInterval&) const = default;
};

/// Per-human recovered pixels and masks over that human's occlusion intervals.
struct RefinedEvidence {
  std::string human_id;
  std::map<int, EncodedImage> frames;
  std::map<int, RleMask> masks;

  bool operator==(const RefinedEvidence&) const = default;
};

struct RefinementResult {
  std::vector<Masklet> masklets;
  std::vector<OcclusionFlags> flags;
  std::vector<OcclusionInterval> intervals;
  /// Only humans with at least one interval.
  std::vector<RefinedEvidence> evidence;
};

/// Completed mask grew and overlaps the visible mask with IoU below the threshold.
bool detect_occlusion(const RleMask& visible, const RleMask& completed, double iou_threshold = 0.7);

OcclusionFlags compute_flags(const Masklet& visible, const Masklet& completed,
                             const RefinerConfig& config = {});

std::vector<OcclusionInterval> group_occluded_frames(const OcclusionFlags& flags, int max_gap);

RefinementResult refine(const ValidatedJob& job, std::span<const EncodedImage> frames,
                        const std::vector<Masklet>& masklets, CompletionClient& backend,
                        const RefinerConfig& config = {});

/// Per human (aligned with `masklets`): recovered images for frames whose mask was replaced.
std::vector<std::map<int, EncodedImage>> image_overrides(const RefinementResult& refinement);

}  // namespace maskmesh
