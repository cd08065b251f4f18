#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "maskmesh/channel.hpp"

namespace maskmesh {

/// Engine side of one backend connection: request ids, handshake and response checking.
class BackendClient {
 public:
  BackendClient(std::unique_ptr<protocol::Channel> channel, protocol::BackendKind kind);
  virtual ~BackendClient() = default;

  /// Sends `hello` on first use and caches the acknowledgement.
  const protocol::HelloAck& handshake();

  /// Requests sent so far, including the handshake.
  std::int64_t requests_sent() const { return next_request_id_; }

 protected:
  template <typename Response, typename Request>
  Response call(const Request& request);

 private:
  std::unique_ptr<protocol::Channel> channel_;
  protocol::BackendKind kind_;
  std::int64_t next_request_id_ = 0;
  std::optional<protocol::HelloAck> hello_;
};

class SegmentationClient : public BackendClient {
 public:
  explicit SegmentationClient(std::unique_ptr<protocol::Channel> channel)
      : BackendClient(std::move(channel), protocol::BackendKind::Segmentation) {}

  std::string start(const ValidatedJob& job);
  protocol::SegFrameResult frame(const std::string& session_id, int frame_index,
                                 const EncodedImage& image);
};

class CompletionClient : public BackendClient {
 public:
  explicit CompletionClient(std::unique_ptr<protocol::Channel> channel)
      : BackendClient(std::move(channel), protocol::BackendKind::Completion) {}

  protocol::CompleteResult complete(const protocol::CompletePass& request);
  protocol::RecoverResult recover(const protocol::RecoverClip& request);
};

class HmrClient : public BackendClient {
 public:
  explicit HmrClient(std::unique_ptr<protocol::Channel> channel)
      : BackendClient(std::move(channel), protocol::BackendKind::Hmr) {}

  const ParamLayout& layout();

  /// One forward pass over all slots. Output order and arity match the input.
  std::vector<MhrParams> infer(std::vector<protocol::HmrSlot> slots);
};

}  // namespace maskmesh
