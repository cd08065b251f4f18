#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "maskmesh/clients.hpp"

namespace maskmesh {

/// Frames x humans presence table.
using VisibilityTable = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One entry of a padded batch. Padding slots have valid == false and human == -1.
struct Slot {
  int frame = 0;
  int human = -1;
  bool valid = false;

  bool operator==(const Slot&) const = default;
};

/// Up to batch_size frames sharing one backend call; slots are row-major frames x width.
struct Chunk {
  /// Increasing frame indices, one slot row each.
  std::vector<int> frames;
  int width = 0;
  std::vector<Slot> slots;
  bool operator==(const Chunk&) const = default;
};

struct BatchPlan {
  std::vector<Chunk> chunks;

  std::size_t valid_slots() const;
  std::size_t padding_slots() const;
};

VisibilityTable visibility_of(std::span<const Masklet> masklets);

/// Groups the frames with at least one visible human, in order, into runs of at
/// most batch_size, padding each run to its widest frame. Frames with nobody
/// visible never reach the backend, so the call count is ceil(busy frames / batch_size).
BatchPlan plan_batches(const VisibilityTable& visibility, int batch_size);

/// Backend calls needed by the plan.
std::size_t call_count(const BatchPlan& plan);

/// Backend calls needed when every visible (frame, human) pair is its own call.
std::size_t sequential_call_count(const BatchPlan& plan);

/// Image and mask-prompt sources for the HMR stage.
struct HmrEvidence {
  std::span<const EncodedImage> frames;
  std::span<const Masklet> masklets;
  /// Per human, recovered images replacing the shared frame; may be empty.
  std::span<const std::map<int, EncodedImage>> image_overrides;

  const EncodedImage& image(int human, int frame) const;
};

/// Executes the plan, one backend call per chunk. `workers` bounds the number of
/// chunks in flight; each worker is a separate connection.
std::vector<MeshTrajectory> run_hmr(const HmrEvidence& evidence, const BatchPlan& plan,
                                    std::span<HmrClient* const> workers);

std::vector<MeshTrajectory> run_hmr(const HmrEvidence& evidence, const BatchPlan& plan,
                                    HmrClient& backend);

/// Reference schedule: one single-slot call per visible (frame, human) pair, in
/// frame-major order.
std::vector<MeshTrajectory> run_hmr_sequential(const HmrEvidence& evidence, HmrClient& backend);

}  // namespace maskmesh
