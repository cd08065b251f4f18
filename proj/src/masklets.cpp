#include "maskmesh/masklets.hpp"

namespace maskmesh {

std::optional<RleMask> normalize_mask(const std::optional<protocol::WireMask>& mask, int width,
                                      int height, double threshold) {
  if (!mask) return std::nullopt;
  RleMask hard = std::holds_alternative<RleMask>(*mask)
                     ? std::get<RleMask>(*mask)
                     : binarize(std::get<ProbMask>(*mask), threshold);
  hard = resample_nearest(hard, width, height);
  if (area(hard) == 0) return std::nullopt;
  return hard;
}

std::vector<Masklet> generate_masklets(const ValidatedJob& job, std::span<const EncodedImage> frames,
                                       SegmentationClient& backend, double threshold) {
  if (static_cast<int>(frames.size()) != job.frame_count()) {
    throw Error(ErrorCode::LengthMismatch, "frame images do not match the job");
  }
  const std::size_t humans = job.prompts.size();
  std::vector<Masklet> masklets(humans);
  for (std::size_t i = 0; i < humans; ++i) {
    masklets[i].human_id = job.prompts[i].human_id;
    masklets[i].masks.assign(frames.size(), std::nullopt);
  }

  const std::string session = backend.start(job);
  for (int t = 0; t < job.frame_count(); ++t) {
    const auto result = backend.frame(session, t, frames[t]);
    if (result.masks.size() != humans) {
      throw Error(ErrorCode::IdentityCountMismatch,
                  "frame " + std::to_string(t) + ": backend returned " +
                      std::to_string(result.masks.size()) + " instances for " +
                      std::to_string(humans) + " prompts");
    }
    for (std::size_t i = 0; i < humans; ++i) {
      masklets[i].masks[t] = normalize_mask(result.masks[i], job.width, job.height, threshold);
    }
  }
  return masklets;
}

}  // namespace maskmesh
