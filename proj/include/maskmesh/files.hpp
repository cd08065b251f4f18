#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "maskmesh/pipeline.hpp"

namespace maskmesh::files {

namespace fs = std::filesystem;

/// Numbered PNG frames from a directory, ordered by the number in each file name.
struct FrameDirectory {
  std::vector<FrameRef> refs;
  std::vector<EncodedImage> images;
};

FrameDirectory load_frames(const fs::path& dir);

/// Prompts JSON: [{"id","kind","frame" (1-based), "box"|"point"|"mask"}, ...].
std::vector<HumanPrompt> load_prompts(const fs::path& path);
Json prompts_to_json(const std::vector<HumanPrompt>& prompts);

/// Parses a JSON document; throws InvalidInput with the path on failure.
Json load_json(const fs::path& path);

/// Writes `j` as compact JSON plus a trailing newline (indent >= 0 pretty-prints).
void save_json(const fs::path& path, const Json& j, int indent = -1);

struct MaskletFile {
  int frames = 0;
  int width = 0;
  int height = 0;
  std::vector<HumanPrompt> prompts;
  std::vector<Masklet> masklets;
  Json config;
};

Json masklets_to_json(const ValidatedJob& job, const std::vector<Masklet>& masklets,
                      const PipelineConfig& config);
MaskletFile masklets_from_json(const Json& j);

struct RefinedFile {
  MaskletFile base;  // refined masklets
  RefinementResult refinement;
};

Json refined_to_json(const ValidatedJob& job, const RefinementResult& refinement,
                     const PipelineConfig& config);
RefinedFile refined_from_json(const Json& j);

struct TrajectoryFile {
  int frames = 0;
  ParamLayout layout;
  Json config;
  bool smoothed = false;
  std::vector<MeshTrajectory> raw;
  std::vector<MeshTrajectory> trajectories;
};

Json trajectories_to_json(const std::vector<MeshTrajectory>& raw,
                          const std::vector<MeshTrajectory>& final_trajectories, bool smoothed,
                          const Json& config_snapshot);
TrajectoryFile trajectories_from_json(const Json& j);

/// Deterministic run report (no wall times).
Json report_to_json(const RunReport& report, const Json& config_snapshot);
Json timings_to_json(const RunReport& report);

/// Summary built from a run directory's trajectories.json and report.json.
Json summarize_run(const fs::path& run_dir);

/// Builds the job description recorded in a masklet file against the given frames.
ValidatedJob job_from(const FrameDirectory& frames, const std::vector<HumanPrompt>& prompts);

}  // namespace maskmesh::files
