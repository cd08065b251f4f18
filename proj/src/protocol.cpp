#include "maskmesh/protocol.hpp"

#include <array>
#include <cmath>
#include <cstring>

namespace maskmesh::protocol {

namespace {

constexpr std::array<const char*, 13> kTypes = {
    "hello",           "hello_ack",    "seg_start",      "seg_start_ack", "seg_frame",
    "seg_frame_result", "complete_pass", "complete_result", "recover_clip", "recover_result",
    "hmr_batch",       "hmr_result",   "error"};

[[noreturn]] void bad_body(const std::string& why) {
  throw Error(ErrorCode::BackendProtocolError, why);
}

const Json& field(const Json& obj, const char* key) {
  if (!obj.is_object()) bad_body(std::string("expected an object holding '") + key + "'");
  const auto it = obj.find(key);
  if (it == obj.end()) bad_body(std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T get(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) bad_body(std::string("field '") + key + "' must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) bad_body(std::string("field '") + key + "' must be an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) bad_body(std::string("field '") + key + "' must be a number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) bad_body(std::string("field '") + key + "' must be a string");
  }
  return v.get<T>();
}

const Json& array_field(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_array()) bad_body(std::string("field '") + key + "' must be an array");
  return v;
}

void check_finite(const Json& j) {
  if (j.is_number_float()) {
    if (!std::isfinite(j.get<double>())) {
      throw Error(ErrorCode::UnencodableValue, "non-finite number in message");
    }
  } else if (j.is_structured()) {
    for (const auto& child : j) check_finite(child);
  }
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const Json& obj, const char* key) {
  const Json& arr = array_field(obj, key);
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) bad_body(std::string("field '") + key + "' must hold numbers");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

template <typename T, typename Fn>
Json list_to_json(const std::vector<T>& items, Fn fn) {
  Json out = Json::array();
  for (const auto& item : items) out.push_back(fn(item));
  return out;
}

template <typename Fn>
auto list_from_json(const Json& obj, const char* key, Fn fn) {
  const Json& arr = array_field(obj, key);
  std::vector<decltype(fn(arr))> out;
  out.reserve(arr.size());
  for (const auto& item : arr) out.push_back(fn(item));
  return out;
}

Json resolution_to_json(const Resolution& r) { return Json{{"width", r.width}, {"height", r.height}}; }

Resolution resolution_from_json(const Json& j) {
  return {get<int>(j, "width"), get<int>(j, "height")};
}

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

bool is_known_type(std::string_view type) {
  for (const char* t : kTypes) {
    if (type == t) return true;
  }
  return false;
}

std::string encode_message(const Envelope& envelope) {
  if (!is_known_type(envelope.type)) {
    throw Error(ErrorCode::UnknownType, "cannot encode message type '" + envelope.type + "'");
  }
  check_finite(envelope.body);
  Json j;
  j["type"] = envelope.type;
  j["request_id"] = envelope.request_id;
  j["version"] = envelope.version;
  j["body"] = envelope.body;
  std::string line = j.dump();
  line.push_back('\n');
  return line;
}

Envelope decode_message(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (line.find('\n') != std::string_view::npos) {
    throw Error(ErrorCode::MalformedJson, "message spans more than one line");
  }
  Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedJson, "not valid JSON");
  if (!j.is_object()) throw Error(ErrorCode::MalformedJson, "message is not an object");

  const auto version = j.find("version");
  if (version == j.end() || !version->is_number_integer()) {
    throw Error(ErrorCode::MalformedJson, "missing integer 'version'");
  }
  if (version->get<int>() != kVersion) {
    throw Error(ErrorCode::VersionMismatch, "protocol version " +
                                                std::to_string(version->get<int>()) +
                                                " not supported");
  }
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string()) {
    throw Error(ErrorCode::MalformedJson, "missing string 'type'");
  }
  if (!is_known_type(type->get<std::string>())) {
    throw Error(ErrorCode::UnknownType, "unknown message type '" + type->get<std::string>() + "'");
  }
  const auto id = j.find("request_id");
  if (id == j.end() || !id->is_number_integer() || id->get<std::int64_t>() < 0) {
    throw Error(ErrorCode::MalformedJson, "missing non-negative integer 'request_id'");
  }
  const auto body = j.find("body");
  if (body == j.end() || !body->is_object()) {
    throw Error(ErrorCode::MalformedJson, "missing object 'body'");
  }
  if (j.size() != 4) throw Error(ErrorCode::MalformedJson, "unexpected envelope fields");

  return Envelope{type->get<std::string>(), id->get<std::int64_t>(), kVersion, *body};
}

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t(std::uint8_t(bytes[i])) << 16) |
                            (std::uint32_t(std::uint8_t(bytes[i + 1])) << 8) |
                            std::uint32_t(std::uint8_t(bytes[i + 2]));
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = std::uint32_t(std::uint8_t(bytes[i])) << 16;
    if (rest == 2) v |= std::uint32_t(std::uint8_t(bytes[i + 1])) << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) bad_body("base64 length is not a multiple of 4");
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      int d = 0;
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
      } else {
        if (pad > 0) bad_body("misplaced base64 padding");
        d = value(c);
        if (d < 0) bad_body("invalid base64 character");
      }
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<char>((v >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

const char* to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Segmentation: return "segmentation";
    case BackendKind::Completion: return "completion";
    case BackendKind::Hmr: return "hmr";
  }
  return "unknown";
}

BackendKind backend_kind_from_string(std::string_view name) {
  if (name == "segmentation") return BackendKind::Segmentation;
  if (name == "completion") return BackendKind::Completion;
  if (name == "hmr") return BackendKind::Hmr;
  bad_body("unknown backend kind '" + std::string(name) + "'");
}

Json rle_to_json(const RleMask& mask) {
  return Json{{"width", mask.width}, {"height", mask.height}, {"counts", mask.counts}};
}

RleMask rle_from_json(const Json& j) {
  RleMask m;
  m.width = get<int>(j, "width");
  m.height = get<int>(j, "height");
  for (const auto& c : array_field(j, "counts")) {
    if (!c.is_number_unsigned() && !(c.is_number_integer() && c.get<std::int64_t>() >= 0)) {
      bad_body("RLE counts must be non-negative integers");
    }
    m.counts.push_back(c.get<std::uint32_t>());
  }
  validate(m);
  return m;
}

Json optional_rle_to_json(const std::optional<RleMask>& mask) {
  return mask ? rle_to_json(*mask) : Json(nullptr);
}

std::optional<RleMask> optional_rle_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return rle_from_json(j);
}

Json image_to_json(const EncodedImage& image) {
  return Json{{"width", image.width}, {"height", image.height}, {"png", base64_encode(image.png)}};
}

EncodedImage image_from_json(const Json& j) {
  return {get<int>(j, "width"), get<int>(j, "height"), base64_decode(get<std::string>(j, "png"))};
}

Json layout_to_json(const ParamLayout& layout) {
  return Json{{"pose", layout.pose},
              {"shape", layout.shape},
              {"camera", layout.camera},
              {"skeleton", layout.skeleton},
              {"hands", layout.hands},
              {"rotation_channels", layout.rotation_channels}};
}

ParamLayout layout_from_json(const Json& j) {
  ParamLayout l;
  l.pose = get<int>(j, "pose");
  l.shape = get<int>(j, "shape");
  l.camera = get<int>(j, "camera");
  l.skeleton = get<int>(j, "skeleton");
  l.hands = get<int>(j, "hands");
  if (l.pose <= 0 || l.shape <= 0 || l.camera <= 0 || l.skeleton <= 0 || l.hands <= 0) {
    bad_body("parameter layout dimensions must be positive");
  }
  for (const auto& c : array_field(j, "rotation_channels")) {
    if (!c.is_number_integer() || c.get<int>() < 0 || c.get<int>() >= l.pose) {
      bad_body("rotation channel outside pose block");
    }
    l.rotation_channels.insert(c.get<int>());
  }
  return l;
}

Json params_to_json(const MhrParams& p) {
  return Json{{"pose", vector_to_json(p.pose)},
              {"shape", vector_to_json(p.shape)},
              {"camera", vector_to_json(p.camera)},
              {"skeleton", vector_to_json(p.skeleton)},
              {"hands", vector_to_json(p.hands)}};
}

MhrParams params_from_json(const Json& j) {
  return {vector_from_json(j, "pose"), vector_from_json(j, "shape"), vector_from_json(j, "camera"),
          vector_from_json(j, "skeleton"), vector_from_json(j, "hands")};
}

Json prompt_to_json(const HumanPrompt& prompt) {
  Json j{{"id", prompt.human_id}};
  std::visit(
      [&j, &prompt](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, BoxPrompt>) {
          j["kind"] = "box";
          j["frame"] = prompt.frame_index;
          j["box"] = {p.x0, p.y0, p.x1, p.y1};
        } else if constexpr (std::is_same_v<P, PointPrompt>) {
          j["kind"] = "point";
          j["frame"] = prompt.frame_index;
          j["point"] = {p.x, p.y};
          j["positive"] = p.positive;
        } else {
          j["kind"] = "mask";
          j["frame"] = prompt.frame_index;
          j["mask"] = rle_to_json(p);
        }
      },
      prompt.payload);
  return j;
}

HumanPrompt prompt_from_json(const Json& j) {
  HumanPrompt p;
  p.human_id = get<std::string>(j, "id");
  p.frame_index = get<int>(j, "frame");
  const auto kind = get<std::string>(j, "kind");
  auto numbers = [&](const char* key, std::size_t n) {
    const Json& arr = array_field(j, key);
    if (arr.size() != n) bad_body(std::string("field '") + key + "' has wrong length");
    std::vector<double> v;
    for (const auto& x : arr) {
      if (!x.is_number()) bad_body(std::string("field '") + key + "' must hold numbers");
      v.push_back(x.get<double>());
    }
    return v;
  };
  if (kind == "box") {
    const auto b = numbers("box", 4);
    p.payload = BoxPrompt{b[0], b[1], b[2], b[3]};
  } else if (kind == "point") {
    const auto pt = numbers("point", 2);
    const bool positive = j.contains("positive") ? get<bool>(j, "positive") : true;
    p.payload = PointPrompt{pt[0], pt[1], positive};
  } else if (kind == "mask") {
    p.payload = rle_from_json(field(j, "mask"));
  } else {
    bad_body("unknown prompt kind '" + kind + "'");
  }
  return p;
}

Json wire_mask_to_json(const std::optional<WireMask>& mask) {
  if (!mask) return nullptr;
  if (const auto* rle = std::get_if<RleMask>(&*mask)) return Json{{"rle", rle_to_json(*rle)}};
  const auto& prob = std::get<ProbMask>(*mask);
  std::string bits;
  bits.reserve(static_cast<std::size_t>(prob.size()) * 2);
  for (Eigen::Index i = 0; i < prob.size(); ++i) {
    const std::uint16_t raw = Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(prob.data()[i]));
    bits.push_back(static_cast<char>(raw & 0xff));
    bits.push_back(static_cast<char>(raw >> 8));
  }
  return Json{{"prob",
               {{"width", prob.cols()}, {"height", prob.rows()}, {"f16", base64_encode(bits)}}}};
}

std::optional<WireMask> wire_mask_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_object() && j.contains("rle")) return WireMask{rle_from_json(j["rle"])};
  const Json& p = field(j, "prob");
  const int width = get<int>(p, "width");
  const int height = get<int>(p, "height");
  const std::string bits = base64_decode(get<std::string>(p, "f16"));
  if (width < 0 || height < 0 || bits.size() != 2u * std::size_t(width) * std::size_t(height)) {
    bad_body("soft mask payload size does not match its dimensions");
  }
  ProbMask prob(height, width);
  for (Eigen::Index i = 0; i < prob.size(); ++i) {
    const std::uint16_t raw = static_cast<std::uint16_t>(
        std::uint8_t(bits[2 * i]) | (std::uint16_t(std::uint8_t(bits[2 * i + 1])) << 8));
    const float v = static_cast<float>(Eigen::half(Eigen::half_impl::raw_uint16_to_half(raw)));
    if (!(v >= 0.0f && v <= 1.0f)) bad_body("soft mask value outside [0, 1]");
    prob.data()[i] = v;
  }
  return WireMask{std::move(prob)};
}

// Bodies.

Json to_body(const Hello& m) { return Json{{"expected", to_string(m.expected)}}; }

template <>
Hello from_body<Hello>(const Json& b) {
  return {backend_kind_from_string(get<std::string>(b, "expected"))};
}

Json to_body(const HelloAck& m) {
  Json j{{"backend_kind", to_string(m.backend_kind)}};
  j["param_layout"] = m.param_layout ? layout_to_json(*m.param_layout) : Json(nullptr);
  j["capabilities"] = m.capabilities;
  return j;
}

template <>
HelloAck from_body<HelloAck>(const Json& b) {
  HelloAck m;
  m.backend_kind = backend_kind_from_string(get<std::string>(b, "backend_kind"));
  const Json& layout = field(b, "param_layout");
  if (!layout.is_null()) m.param_layout = layout_from_json(layout);
  for (const auto& c : array_field(b, "capabilities")) {
    if (!c.is_string()) bad_body("capabilities must be strings");
    m.capabilities.push_back(c.get<std::string>());
  }
  if (m.backend_kind == BackendKind::Hmr && !m.param_layout) {
    bad_body("hmr handshake must declare a param_layout");
  }
  return m;
}

Json to_body(const SegStart& m) {
  return Json{{"frames_meta",
               {{"count", m.frame_count}, {"width", m.width}, {"height", m.height}}},
              {"prompts", list_to_json(m.prompts, prompt_to_json)}};
}

template <>
SegStart from_body<SegStart>(const Json& b) {
  SegStart m;
  const Json& meta = field(b, "frames_meta");
  m.frame_count = get<int>(meta, "count");
  m.width = get<int>(meta, "width");
  m.height = get<int>(meta, "height");
  m.prompts = list_from_json(b, "prompts", prompt_from_json);
  return m;
}

Json to_body(const SegStartAck& m) { return Json{{"session_id", m.session_id}}; }

template <>
SegStartAck from_body<SegStartAck>(const Json& b) {
  return {get<std::string>(b, "session_id")};
}

Json to_body(const SegFrame& m) {
  return Json{{"session_id", m.session_id},
              {"frame_index", m.frame_index},
              {"image", image_to_json(m.image)}};
}

template <>
SegFrame from_body<SegFrame>(const Json& b) {
  return {get<std::string>(b, "session_id"), get<int>(b, "frame_index"),
          image_from_json(field(b, "image"))};
}

Json to_body(const SegFrameResult& m) {
  return Json{{"masks", list_to_json(m.masks, wire_mask_to_json)}};
}

template <>
SegFrameResult from_body<SegFrameResult>(const Json& b) {
  return {list_from_json(b, "masks", wire_mask_from_json)};
}

Json to_body(const CompletePass& m) {
  return Json{{"human_id", m.human_id},
              {"resolution", resolution_to_json(m.resolution)},
              {"frames", list_to_json(m.frames, image_to_json)},
              {"visible_masks", list_to_json(m.visible_masks, optional_rle_to_json)}};
}

template <>
CompletePass from_body<CompletePass>(const Json& b) {
  CompletePass m;
  m.human_id = get<std::string>(b, "human_id");
  m.resolution = resolution_from_json(field(b, "resolution"));
  m.frames = list_from_json(b, "frames", image_from_json);
  m.visible_masks = list_from_json(b, "visible_masks", optional_rle_from_json);
  if (m.frames.size() != m.visible_masks.size()) bad_body("frames and visible_masks differ in length");
  return m;
}

Json to_body(const CompleteResult& m) {
  return Json{{"completed_masks", list_to_json(m.completed_masks, optional_rle_to_json)}};
}

template <>
CompleteResult from_body<CompleteResult>(const Json& b) {
  return {list_from_json(b, "completed_masks", optional_rle_from_json)};
}

Json to_body(const RecoverClip& m) {
  return Json{{"human_id", m.human_id},
              {"interval", {{"start", m.start}, {"end", m.end}}},
              {"resolution", resolution_to_json(m.resolution)},
              {"frames", list_to_json(m.frames, image_to_json)},
              {"visible_masks", list_to_json(m.visible_masks, optional_rle_to_json)}};
}

template <>
RecoverClip from_body<RecoverClip>(const Json& b) {
  RecoverClip m;
  m.human_id = get<std::string>(b, "human_id");
  const Json& interval = field(b, "interval");
  m.start = get<int>(interval, "start");
  m.end = get<int>(interval, "end");
  m.resolution = resolution_from_json(field(b, "resolution"));
  m.frames = list_from_json(b, "frames", image_from_json);
  m.visible_masks = list_from_json(b, "visible_masks", optional_rle_from_json);
  if (m.end < m.start || m.frames.size() != static_cast<std::size_t>(m.end - m.start + 1) ||
      m.visible_masks.size() != m.frames.size()) {
    bad_body("clip payload does not match its interval");
  }
  return m;
}

Json to_body(const RecoverResult& m) {
  return Json{{"refined_images", list_to_json(m.refined_images, image_to_json)},
              {"refined_masks", list_to_json(m.refined_masks, optional_rle_to_json)}};
}

template <>
RecoverResult from_body<RecoverResult>(const Json& b) {
  return {list_from_json(b, "refined_images", image_from_json),
          list_from_json(b, "refined_masks", optional_rle_from_json)};
}

Json to_body(const HmrBatch& m) {
  return Json{{"slots", list_to_json(m.slots, [](const HmrSlot& s) {
                 return Json{{"image", image_to_json(s.image)},
                             {"mask_prompt", rle_to_json(s.mask_prompt)},
                             {"valid", s.valid}};
               })}};
}

template <>
HmrBatch from_body<HmrBatch>(const Json& b) {
  return {list_from_json(b, "slots", [](const Json& s) {
    return HmrSlot{image_from_json(field(s, "image")), rle_from_json(field(s, "mask_prompt")),
                   get<bool>(s, "valid")};
  })};
}

Json to_body(const HmrResult& m) { return Json{{"thetas", list_to_json(m.thetas, params_to_json)}}; }

template <>
HmrResult from_body<HmrResult>(const Json& b) {
  return {list_from_json(b, "thetas", params_from_json)};
}

Json to_body(const ErrorBody& m) { return Json{{"code", m.code}, {"message", m.message}}; }

template <>
ErrorBody from_body<ErrorBody>(const Json& b) {
  return {get<std::string>(b, "code"), get<std::string>(b, "message")};
}

}  // namespace maskmesh::protocol
