#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "maskmesh/channel.hpp"

namespace maskmesh::mock {

using protocol::Json;

/// Fixed per-call overhead plus per-slot cost, both in milliseconds.
struct LatencyModel {
  double call_ms = 100.0;
  double slot_ms = 5.0;
};

/// Accumulates simulated backend time.
class SimulatedClock {
 public:
  void advance(double ms);
  double elapsed_ms() const;
  void reset();

 private:
  std::atomic<std::int64_t> micros_{0};
};

/// Ground truth for every mock backend: per-human visible boxes and the
/// occluded extent that amodal completion should recover. Missing trailing
/// entries read as absent.
struct SceneHuman {
  std::string id;
  std::array<std::uint8_t, 3> color{200, 60, 60};
  std::vector<std::optional<PixelBox>> visible;
  std::vector<std::optional<PixelBox>> hidden;
};

struct Scene {
  int width = 64;
  int height = 48;
  int frames = 4;
  bool soft_masks = false;
  ParamLayout layout{6, 4, 5, 3, 4, {}};
  LatencyModel latency;
  std::vector<SceneHuman> humans;

  static Scene from_json(const Json& j);
  static Scene load(const std::string& path);
  Json to_json() const;

  const SceneHuman* find(const std::string& id) const;
  std::optional<RleMask> visible_mask(const SceneHuman& human, int frame) const;
  std::optional<RleMask> hidden_mask(const SceneHuman& human, int frame) const;
  /// Grey background with each human's visible box painted in its colour.
  RgbImage render(int frame) const;
  /// Box prompts at each human's first visible frame (humans never visible are skipped).
  std::vector<HumanPrompt> prompts() const;
};

/// Deterministic stand-in for a mask-prompted HMR model. Pure in (mask, image):
/// camera carries (u, v, area fraction, mask digest, image digest) as provenance.
MhrParams mock_theta(const ParamLayout& layout, const RleMask& mask, const EncodedImage& image);

std::uint32_t image_digest(const EncodedImage& image);

/// Replays the scene's visible boxes per prompt id, in prompt order; frames must
/// arrive in temporal order within a session.
class SegmentationServer : public protocol::MessageServer {
 public:
  explicit SegmentationServer(Scene scene) : scene_(std::move(scene)) {}

 protected:
  protocol::Envelope dispatch(const protocol::Envelope& request) override;

 private:
  struct Session {
    std::vector<std::string> ids;
    int frame_count = 0;
    int width = 0;
    int height = 0;
    int next_frame = 0;
  };
  Scene scene_;
  std::map<std::string, Session> sessions_;
  int session_counter_ = 0;
};

/// Completes masks as visible ∪ scripted hidden box at the requested resolution;
/// recovered images paint the completed region in the human's colour.
class CompletionServer : public protocol::MessageServer {
 public:
  explicit CompletionServer(Scene scene) : scene_(std::move(scene)) {}

 protected:
  protocol::Envelope dispatch(const protocol::Envelope& request) override;

 private:
  std::optional<RleMask> complete(const std::string& human_id, int frame,
                                  const std::optional<RleMask>& visible, int video_width,
                                  int video_height, protocol::Resolution resolution) const;
  Scene scene_;
};

class HmrServer : public protocol::MessageServer {
 public:
  HmrServer(ParamLayout layout, LatencyModel latency, std::shared_ptr<SimulatedClock> clock)
      : layout_(std::move(layout)), latency_(latency), clock_(std::move(clock)) {}

  std::int64_t batches_served() const { return batches_; }

 protected:
  protocol::Envelope dispatch(const protocol::Envelope& request) override;

 private:
  ParamLayout layout_;
  LatencyModel latency_;
  std::shared_ptr<SimulatedClock> clock_;
  std::int64_t batches_ = 0;
};

std::shared_ptr<protocol::MessageServer> make_server(protocol::BackendKind kind, const Scene& scene,
                                                     std::shared_ptr<SimulatedClock> clock = nullptr);

}  // namespace maskmesh::mock
