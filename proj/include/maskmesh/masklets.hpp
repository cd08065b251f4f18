#pragma once

#include <span>
#include <vector>

#include "maskmesh/clients.hpp"

namespace maskmesh {

/// Binary mask at video resolution from one backend output. Soft masks are
/// thresholded; other resolutions are resampled nearest-neighbour; empty masks
/// become absent.
std::optional<RleMask> normalize_mask(const std::optional<protocol::WireMask>& mask, int width,
                                      int height, double threshold);

/// Streams the frames to the segmentation backend in temporal order and collects
/// one masklet per prompt, in prompt order.
std::vector<Masklet> generate_masklets(const ValidatedJob& job, std::span<const EncodedImage> frames,
                                       SegmentationClient& backend, double threshold = 0.5);

}  // namespace maskmesh
