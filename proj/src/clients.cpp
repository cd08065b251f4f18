#include "maskmesh/clients.hpp"

namespace maskmesh {

using namespace protocol;

BackendClient::BackendClient(std::unique_ptr<Channel> channel, BackendKind kind)
    : channel_(std::move(channel)), kind_(kind) {
  if (!channel_) throw Error(ErrorCode::BackendUnavailable, "no channel");
}

template <typename Response, typename Request>
Response BackendClient::call(const Request& request) {
  const Envelope sent = make_envelope(request, next_request_id_++);
  const Envelope reply = decode_message(channel_->exchange(encode_message(sent)));
  if (reply.request_id != sent.request_id) {
    throw Error(ErrorCode::BackendProtocolError,
                "response id " + std::to_string(reply.request_id) + " does not match request " +
                    std::to_string(sent.request_id));
  }
  if (reply.type == ErrorBody::kType) {
    const auto err = from_body<ErrorBody>(reply.body);
    throw Error(ErrorCode::BackendProtocolError,
                std::string(to_string(kind_)) + " backend error '" + err.code + "': " + err.message);
  }
  if (reply.type != Response::kType) {
    throw Error(ErrorCode::BackendProtocolError, "expected '" + std::string(Response::kType) +
                                                     "', got '" + reply.type + "'");
  }
  return from_body<Response>(reply.body);
}

const HelloAck& BackendClient::handshake() {
  if (!hello_) {
    HelloAck ack = call<HelloAck>(Hello{kind_});
    if (ack.backend_kind != kind_) {
      throw Error(ErrorCode::BackendProtocolError,
                  std::string("expected a ") + to_string(kind_) + " backend, got " +
                      to_string(ack.backend_kind));
    }
    hello_ = std::move(ack);
  }
  return *hello_;
}

std::string SegmentationClient::start(const ValidatedJob& job) {
  handshake();
  SegStart req;
  req.frame_count = job.frame_count();
  req.width = job.width;
  req.height = job.height;
  req.prompts = job.prompts;
  return call<SegStartAck>(req).session_id;
}

SegFrameResult SegmentationClient::frame(const std::string& session_id, int frame_index,
                                         const EncodedImage& image) {
  return call<SegFrameResult>(SegFrame{session_id, frame_index, image});
}

CompleteResult CompletionClient::complete(const CompletePass& request) {
  handshake();
  auto result = call<CompleteResult>(request);
  if (result.completed_masks.size() != request.frames.size()) {
    throw Error(ErrorCode::BackendProtocolError, "complete_result arity mismatch");
  }
  return result;
}

RecoverResult CompletionClient::recover(const RecoverClip& request) {
  handshake();
  auto result = call<RecoverResult>(request);
  if (result.refined_images.size() != request.frames.size() ||
      result.refined_masks.size() != request.frames.size()) {
    throw Error(ErrorCode::BackendProtocolError, "recover_result arity mismatch");
  }
  return result;
}

const ParamLayout& HmrClient::layout() { return *handshake().param_layout; }

std::vector<MhrParams> HmrClient::infer(std::vector<HmrSlot> slots) {
  const ParamLayout& expected = layout();
  const std::size_t n = slots.size();
  auto result = call<HmrResult>(HmrBatch{std::move(slots)});
  if (result.thetas.size() != n) {
    throw Error(ErrorCode::BackendProtocolError, "hmr_result returned " +
                                                     std::to_string(result.thetas.size()) +
                                                     " thetas for " + std::to_string(n) + " slots");
  }
  for (const auto& theta : result.thetas) {
    if (!theta.matches(expected)) {
      throw Error(ErrorCode::LayoutMismatch, "theta dimensions differ from handshake layout");
    }
  }
  return std::move(result.thetas);
}

}  // namespace maskmesh
