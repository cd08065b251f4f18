#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "maskmesh/hmr.hpp"
#include "maskmesh/masklets.hpp"
#include "maskmesh/mock_backends.hpp"
#include "maskmesh/refiner.hpp"
#include "maskmesh/smoothing.hpp"

namespace maskmesh {

using protocol::Json;

inline constexpr const char* kEngineVersion = MASKMESH_VERSION;

/// Where each backend lives: "mock:<scene.json>", "exec:<command>" or "http://host:port".
struct BackendSpecs {
  std::string segmentation;
  std::string completion;
  std::string hmr;
};

struct PipelineConfig {
  double iou_threshold = 0.7;
  int min_area = 16;
  int max_gap = 2;
  int batch_size = 32;
  protocol::Resolution completion_resolution{1024, 512};
  SmoothingConfig smoothing;
  bool refiner_enabled = true;
  double binarize_threshold = 0.5;
  /// HMR chunks dispatched concurrently, one connection each.
  int in_flight = 1;
  BackendSpecs backends;

  void validate() const;
  RefinerConfig refiner() const;
};

/// Snapshot of every algorithmic setting (backend locations excluded).
Json config_to_json(const PipelineConfig& config);

/// Overlays the fields present in `j` onto `base`.
PipelineConfig config_from_json(const Json& j, PipelineConfig base = {});

/// Live backend connections for one run.
struct Backends {
  std::unique_ptr<SegmentationClient> segmentation;
  std::unique_ptr<CompletionClient> completion;
  std::vector<std::unique_ptr<HmrClient>> hmr;
  /// Simulated HMR latency when the HMR backend is an in-process mock.
  std::shared_ptr<mock::SimulatedClock> clock;

  std::vector<HmrClient*> hmr_workers() const;
};

std::unique_ptr<protocol::Channel> open_channel(const std::string& spec, protocol::BackendKind kind,
                                                std::shared_ptr<mock::SimulatedClock> clock = nullptr);

/// Opens only the backends the configured stages need.
Backends connect_backends(const PipelineConfig& config, bool need_segmentation,
                          bool need_completion, bool need_hmr);

struct HumanSummary {
  std::string human_id;
  std::size_t present_frames = 0;
  std::optional<double> jitter_raw;
  std::optional<double> jitter_smoothed;
};

struct RunReport {
  int frames = 0;
  std::vector<HumanSummary> humans;
  std::vector<OcclusionInterval> intervals;
  std::size_t segmentation_calls = 0;
  std::size_t completion_calls = 0;
  std::size_t hmr_calls = 0;
  std::size_t hmr_sequential_calls = 0;
  std::size_t valid_slots = 0;
  std::size_t padding_slots = 0;
  /// Wall time per stage in milliseconds, in execution order.
  std::vector<std::pair<std::string, double>> timings_ms;
};

struct PipelineOutput {
  std::vector<Masklet> masklets;
  std::optional<RefinementResult> refinement;
  std::vector<MeshTrajectory> raw;
  std::vector<MeshTrajectory> trajectories;
  RunReport report;
};

/// Mean Euclidean norm of pose+hands first differences over adjacent present frames.
double jitter_metric(const MeshTrajectory& trajectory);

// Individual stages, shared by run_pipeline and the staged CLI commands.

std::vector<Masklet> stage_segment(const ValidatedJob& job, std::span<const EncodedImage> frames,
                                   const PipelineConfig& config, SegmentationClient& backend);

RefinementResult stage_refine(const ValidatedJob& job, std::span<const EncodedImage> frames,
                              const std::vector<Masklet>& masklets, const PipelineConfig& config,
                              CompletionClient& backend);

struct HmrStageOutput {
  BatchPlan plan;
  std::vector<MeshTrajectory> trajectories;
};

HmrStageOutput stage_hmr(std::span<const EncodedImage> frames, const std::vector<Masklet>& masklets,
                         const std::vector<std::map<int, EncodedImage>>& overrides,
                         const PipelineConfig& config, std::span<HmrClient* const> workers);

/// Shape lock followed by pose/hand smoothing, per trajectory.
std::vector<MeshTrajectory> stage_smooth(const std::vector<MeshTrajectory>& raw,
                                         const SmoothingConfig& config);

/// Masklets -> (refinement) -> padded HMR -> shape lock + smoothing. Errors carry
/// the name of the failing stage.
PipelineOutput run_pipeline(const ValidatedJob& job, std::span<const EncodedImage> frames,
                            const PipelineConfig& config, Backends& backends);

RunReport summarize(const PipelineOutput& output);

}  // namespace maskmesh
