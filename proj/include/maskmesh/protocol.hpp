#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "maskmesh/image.hpp"
#include "maskmesh/types.hpp"

namespace maskmesh::protocol {

using Json = nlohmann::ordered_json;

inline constexpr int kVersion = 1;

/// One wire message: a single line of compact JSON.
struct Envelope {
  std::string type;
  std::int64_t request_id = 0;
  int version = kVersion;
  Json body = Json::object();

  bool operator==(const Envelope&) const = default;
};

/// Serializes to one JSON line terminated by '\n'. Non-finite numbers are rejected.
std::string encode_message(const Envelope& envelope);

/// Strict inverse of encode_message. Accepts an optional trailing newline.
Envelope decode_message(std::string_view line);

bool is_known_type(std::string_view type);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

enum class BackendKind { Segmentation, Completion, Hmr };

const char* to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

struct Resolution {
  int width = 0;
  int height = 0;
  bool operator==(const Resolution&) const = default;
};

/// A segmentation output: hard (RLE) or soft (probability grid) mask.
using WireMask = std::variant<RleMask, ProbMask>;

// Message bodies, one struct per catalog entry.

struct Hello {
  static constexpr const char* kType = "hello";
  BackendKind expected = BackendKind::Hmr;
};

struct HelloAck {
  static constexpr const char* kType = "hello_ack";
  BackendKind backend_kind = BackendKind::Hmr;
  std::optional<ParamLayout> param_layout;
  std::vector<std::string> capabilities;
};

struct SegStart {
  static constexpr const char* kType = "seg_start";
  int frame_count = 0;
  int width = 0;
  int height = 0;
  std::vector<HumanPrompt> prompts;
};

struct SegStartAck {
  static constexpr const char* kType = "seg_start_ack";
  std::string session_id;
};

struct SegFrame {
  static constexpr const char* kType = "seg_frame";
  std::string session_id;
  int frame_index = 0;
  EncodedImage image;
};

struct SegFrameResult {
  static constexpr const char* kType = "seg_frame_result";
  std::vector<std::optional<WireMask>> masks;
};

struct CompletePass {
  static constexpr const char* kType = "complete_pass";
  std::string human_id;
  Resolution resolution;
  std::vector<EncodedImage> frames;
  std::vector<std::optional<RleMask>> visible_masks;
};

struct CompleteResult {
  static constexpr const char* kType = "complete_result";
  std::vector<std::optional<RleMask>> completed_masks;
};

struct RecoverClip {
  static constexpr const char* kType = "recover_clip";
  std::string human_id;
  int start = 0;  // inclusive
  int end = 0;    // inclusive
  Resolution resolution;
  std::vector<EncodedImage> frames;
  std::vector<std::optional<RleMask>> visible_masks;
};

struct RecoverResult {
  static constexpr const char* kType = "recover_result";
  std::vector<EncodedImage> refined_images;
  std::vector<std::optional<RleMask>> refined_masks;
};

struct HmrSlot {
  EncodedImage image;
  RleMask mask_prompt;
  bool valid = true;
};

struct HmrBatch {
  static constexpr const char* kType = "hmr_batch";
  std::vector<HmrSlot> slots;
};

struct HmrResult {
  static constexpr const char* kType = "hmr_result";
  std::vector<MhrParams> thetas;
};

struct ErrorBody {
  static constexpr const char* kType = "error";
  std::string code;
  std::string message;
};

// Field-level JSON mapping, shared with the file formats.

Json rle_to_json(const RleMask& mask);
RleMask rle_from_json(const Json& j);
Json optional_rle_to_json(const std::optional<RleMask>& mask);
std::optional<RleMask> optional_rle_from_json(const Json& j);
Json image_to_json(const EncodedImage& image);
EncodedImage image_from_json(const Json& j);
Json layout_to_json(const ParamLayout& layout);
ParamLayout layout_from_json(const Json& j);
Json params_to_json(const MhrParams& params);
MhrParams params_from_json(const Json& j);
Json prompt_to_json(const HumanPrompt& prompt);
HumanPrompt prompt_from_json(const Json& j);
Json wire_mask_to_json(const std::optional<WireMask>& mask);
std::optional<WireMask> wire_mask_from_json(const Json& j);

Json to_body(const Hello& m);
Json to_body(const HelloAck& m);
Json to_body(const SegStart& m);
Json to_body(const SegStartAck& m);
Json to_body(const SegFrame& m);
Json to_body(const SegFrameResult& m);
Json to_body(const CompletePass& m);
Json to_body(const CompleteResult& m);
Json to_body(const RecoverClip& m);
Json to_body(const RecoverResult& m);
Json to_body(const HmrBatch& m);
Json to_body(const HmrResult& m);
Json to_body(const ErrorBody& m);

/// Parses a message body. Missing or ill-typed fields throw BackendProtocolError.
template <typename Message>
Message from_body(const Json& body);

template <>
Hello from_body<Hello>(const Json& body);
template <>
HelloAck from_body<HelloAck>(const Json& body);
template <>
SegStart from_body<SegStart>(const Json& body);
template <>
SegStartAck from_body<SegStartAck>(const Json& body);
template <>
SegFrame from_body<SegFrame>(const Json& body);
template <>
SegFrameResult from_body<SegFrameResult>(const Json& body);
template <>
CompletePass from_body<CompletePass>(const Json& body);
template <>
CompleteResult from_body<CompleteResult>(const Json& body);
template <>
RecoverClip from_body<RecoverClip>(const Json& body);
template <>
RecoverResult from_body<RecoverResult>(const Json& body);
template <>
HmrBatch from_body<HmrBatch>(const Json& body);
template <>
HmrResult from_body<HmrResult>(const Json& body);
template <>
ErrorBody from_body<ErrorBody>(const Json& body);

template <typename Message>
Envelope make_envelope(const Message& message, std::int64_t request_id) {
  return Envelope{Message::kType, request_id, kVersion, to_body(message)};
}

}  // namespace maskmesh::protocol
