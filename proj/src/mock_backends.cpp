#include "maskmesh/mock_backends.hpp"

#include <cmath>
#include <numbers>

namespace maskmesh::mock {

using namespace protocol;

void SimulatedClock::advance(double ms) {
  micros_ += static_cast<std::int64_t>(std::llround(ms * 1000.0));
}

double SimulatedClock::elapsed_ms() const { return static_cast<double>(micros_.load()) / 1000.0; }

void SimulatedClock::reset() { micros_ = 0; }

namespace {

std::optional<PixelBox> box_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::InvalidInput, "scene boxes are [x0, y0, x1, y1] or null");
  }
  return PixelBox{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

Json box_to_json(const std::optional<PixelBox>& b) {
  if (!b) return nullptr;
  return Json::array({b->x0, b->y0, b->x1, b->y1});
}

HelloAck ack_for(BackendKind kind, std::optional<ParamLayout> layout) {
  HelloAck ack;
  ack.backend_kind = kind;
  ack.param_layout = std::move(layout);
  ack.capabilities = {"mock"};
  return ack;
}

void expect_kind(const Hello& hello, BackendKind kind) {
  if (hello.expected != kind) {
    throw RequestFailure("wrong_backend", std::string("this backend serves ") + to_string(kind));
  }
}

}  // namespace

Scene Scene::from_json(const Json& j) {
  Scene s;
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  s.frames = j.at("frames").get<int>();
  s.soft_masks = j.value("soft_masks", false);
  if (j.contains("layout")) s.layout = layout_from_json(j["layout"]);
  if (j.contains("latency")) {
    s.latency.call_ms = j["latency"].at("call_ms").get<double>();
    s.latency.slot_ms = j["latency"].at("slot_ms").get<double>();
  }
  for (const auto& h : j.at("humans")) {
    SceneHuman human;
    human.id = h.at("id").get<std::string>();
    if (h.contains("color")) {
      for (int c = 0; c < 3; ++c) human.color[c] = h["color"][c].get<std::uint8_t>();
    }
    for (const auto& b : h.at("visible")) human.visible.push_back(box_from_json(b));
    if (h.contains("hidden")) {
      for (const auto& b : h["hidden"]) human.hidden.push_back(box_from_json(b));
    } else {
      human.hidden.assign(human.visible.size(), std::nullopt);
    }
    if (static_cast<int>(human.visible.size()) != s.frames ||
        static_cast<int>(human.hidden.size()) != s.frames) {
      throw Error(ErrorCode::InvalidInput, "scene human '" + human.id + "' must list one entry per frame");
    }
    s.humans.push_back(std::move(human));
  }
  return s;
}

Scene Scene::load(const std::string& path) {
  const Json j = Json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidInput, path + " is not valid JSON");
  try {
    return from_json(j);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidInput, path + ": " + e.what());
  }
}

Json Scene::to_json() const {
  Json j{{"width", width}, {"height", height}, {"frames", frames}, {"soft_masks", soft_masks}};
  j["layout"] = layout_to_json(layout);
  j["latency"] = {{"call_ms", latency.call_ms}, {"slot_ms", latency.slot_ms}};
  Json humans_json = Json::array();
  for (const auto& h : humans) {
    Json vis = Json::array(), hid = Json::array();
    // padded to the frame count, matching how missing entries are read
    for (int f = 0; f < frames; ++f) {
      vis.push_back(box_to_json(f < static_cast<int>(h.visible.size()) ? h.visible[f] : std::nullopt));
      hid.push_back(box_to_json(f < static_cast<int>(h.hidden.size()) ? h.hidden[f] : std::nullopt));
    }
    humans_json.push_back(Json{{"id", h.id}, {"color", h.color}, {"visible", vis}, {"hidden", hid}});
  }
  j["humans"] = humans_json;
  return j;
}

const SceneHuman* Scene::find(const std::string& id) const {
  for (const auto& h : humans) {
    if (h.id == id) return &h;
  }
  return nullptr;
}

std::optional<RleMask> Scene::visible_mask(const SceneHuman& human, int frame) const {
  if (frame < 0 || frame >= static_cast<int>(human.visible.size()) || !human.visible[frame]) return std::nullopt;
  RleMask m = box_mask(width, height, *human.visible[frame]);
  if (area(m) == 0) return std::nullopt;
  return m;
}

std::optional<RleMask> Scene::hidden_mask(const SceneHuman& human, int frame) const {
  if (frame < 0 || frame >= static_cast<int>(human.hidden.size()) || !human.hidden[frame]) return std::nullopt;
  return box_mask(width, height, *human.hidden[frame]);
}

RgbImage Scene::render(int frame) const {
  RgbImage img = RgbImage::filled(width, height, 96, 96, 96);
  for (const auto& h : humans) {
    if (auto m = visible_mask(h, frame)) img.paint(*m, h.color[0], h.color[1], h.color[2]);
  }
  return img;
}

std::vector<HumanPrompt> Scene::prompts() const {
  std::vector<HumanPrompt> out;
  for (const auto& h : humans) {
    for (int t = 0; t < frames; ++t) {
      if (!h.visible[t]) continue;
      const PixelBox& b = *h.visible[t];
      out.push_back({h.id, t, BoxPrompt{double(b.x0), double(b.y0), double(b.x1), double(b.y1)}});
      break;
    }
  }
  return out;
}

std::uint32_t image_digest(const EncodedImage& image) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : image.png) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

MhrParams mock_theta(const ParamLayout& layout, const RleMask& mask, const EncodedImage& image) {
  constexpr double pi = std::numbers::pi;
  const double pixels = std::max<double>(1.0, static_cast<double>(mask.pixel_count()));
  const Eigen::Vector2d c = centroid(mask);
  const double u = mask.width > 0 ? c.x() / mask.width : 0.0;
  const double v = mask.height > 0 ? c.y() / mask.height : 0.0;
  const double a = static_cast<double>(area(mask)) / pixels;

  MhrParams theta = MhrParams::zeros(layout);
  for (int i = 0; i < layout.pose; ++i) {
    theta.pose[i] = std::sin((i + 1) * pi * u) + 0.5 * std::cos((i + 1) * pi * v) + a;
  }
  for (int i = 0; i < layout.shape; ++i) theta.shape[i] = a * (i + 1) + 0.25 * u;
  const std::array<double, 5> provenance{u, v, a, static_cast<double>(digest(mask)),
                                         static_cast<double>(image_digest(image))};
  for (int i = 0; i < layout.camera && i < 5; ++i) theta.camera[i] = provenance[i];
  for (int i = 0; i < layout.skeleton; ++i) theta.skeleton[i] = std::sqrt(a) * (i + 1) + 0.1 * v;
  for (int i = 0; i < layout.hands; ++i) theta.hands[i] = 0.5 * std::cos((i + 1) * (u + v));
  return theta;
}

Envelope SegmentationServer::dispatch(const Envelope& request) {
  if (request.type == Hello::kType) {
    expect_kind(from_body<Hello>(request.body), BackendKind::Segmentation);
    return make_envelope(ack_for(BackendKind::Segmentation, std::nullopt), 0);
  }
  if (request.type == SegStart::kType) {
    const auto start = from_body<SegStart>(request.body);
    if (start.width != scene_.width || start.height != scene_.height ||
        start.frame_count != scene_.frames) {
      throw RequestFailure("scene_mismatch", "video does not match the scripted scene");
    }
    Session session;
    for (const auto& p : start.prompts) session.ids.push_back(p.human_id);
    session.frame_count = start.frame_count;
    session.width = start.width;
    session.height = start.height;
    const std::string id = "seg-" + std::to_string(++session_counter_);
    sessions_[id] = std::move(session);
    return make_envelope(SegStartAck{id}, 0);
  }
  if (request.type == SegFrame::kType) {
    const auto frame = from_body<SegFrame>(request.body);
    const auto it = sessions_.find(frame.session_id);
    if (it == sessions_.end()) {
      throw RequestFailure("no_session", "unknown session '" + frame.session_id + "'");
    }
    Session& session = it->second;
    if (frame.frame_index != session.next_frame) {
      throw RequestFailure("out_of_order", "expected frame " + std::to_string(session.next_frame));
    }
    ++session.next_frame;
    SegFrameResult result;
    for (const auto& id : session.ids) {
      const SceneHuman* human = scene_.find(id);
      std::optional<RleMask> mask = human ? scene_.visible_mask(*human, frame.frame_index) : std::nullopt;
      if (!mask) {
        result.masks.emplace_back(std::nullopt);
      } else if (scene_.soft_masks) {
        const Bitmap bits = rle_decode(*mask);
        ProbMask prob = bits.cast<float>() * 0.75f + 0.125f;
        result.masks.emplace_back(WireMask{std::move(prob)});
      } else {
        result.masks.emplace_back(WireMask{*mask});
      }
    }
    if (session.next_frame == session.frame_count) sessions_.erase(it);
    return make_envelope(result, 0);
  }
  throw RequestFailure("unsupported", "segmentation backend cannot serve '" + request.type + "'");
}

std::optional<RleMask> CompletionServer::complete(const std::string& human_id, int frame,
                                                  const std::optional<RleMask>& visible,
                                                  int video_width, int video_height,
                                                  Resolution resolution) const {
  const SceneHuman* human = scene_.find(human_id);
  std::optional<RleMask> hidden;
  if (human && video_width == scene_.width && video_height == scene_.height) {
    hidden = scene_.hidden_mask(*human, frame);
  }
  std::optional<RleMask> full;
  if (visible && hidden) {
    full = mask_union(*visible, *hidden);
  } else if (visible) {
    full = visible;
  } else {
    full = hidden;
  }
  if (!full) return std::nullopt;
  return resample_nearest(*full, resolution.width, resolution.height);
}

Envelope CompletionServer::dispatch(const Envelope& request) {
  if (request.type == Hello::kType) {
    expect_kind(from_body<Hello>(request.body), BackendKind::Completion);
    return make_envelope(ack_for(BackendKind::Completion, std::nullopt), 0);
  }
  if (request.type == CompletePass::kType) {
    const auto pass = from_body<CompletePass>(request.body);
    CompleteResult result;
    for (std::size_t t = 0; t < pass.frames.size(); ++t) {
      result.completed_masks.push_back(complete(pass.human_id, static_cast<int>(t),
                                                pass.visible_masks[t], pass.frames[t].width,
                                                pass.frames[t].height, pass.resolution));
    }
    return make_envelope(result, 0);
  }
  if (request.type == RecoverClip::kType) {
    const auto clip = from_body<RecoverClip>(request.body);
    const SceneHuman* human = scene_.find(clip.human_id);
    RecoverResult result;
    for (std::size_t k = 0; k < clip.frames.size(); ++k) {
      const int t = clip.start + static_cast<int>(k);
      const EncodedImage& frame = clip.frames[k];
      const Resolution native{frame.width, frame.height};
      const auto full = complete(clip.human_id, t, clip.visible_masks[k], frame.width,
                                 frame.height, native);
      if (!full || !human) {
        result.refined_images.push_back(frame);
        result.refined_masks.emplace_back(std::nullopt);
        continue;
      }
      RgbImage pixels = decode_png(frame.png);
      pixels.paint(*full, human->color[0], human->color[1], human->color[2]);
      result.refined_images.push_back(encode_png(pixels));
      result.refined_masks.push_back(
          resample_nearest(*full, clip.resolution.width, clip.resolution.height));
    }
    return make_envelope(result, 0);
  }
  throw RequestFailure("unsupported", "completion backend cannot serve '" + request.type + "'");
}

Envelope HmrServer::dispatch(const Envelope& request) {
  if (request.type == Hello::kType) {
    expect_kind(from_body<Hello>(request.body), BackendKind::Hmr);
    return make_envelope(ack_for(BackendKind::Hmr, layout_), 0);
  }
  if (request.type == HmrBatch::kType) {
    const auto batch = from_body<HmrBatch>(request.body);
    HmrResult result;
    result.thetas.reserve(batch.slots.size());
    for (const auto& slot : batch.slots) {
      result.thetas.push_back(mock_theta(layout_, slot.mask_prompt, slot.image));
    }
    ++batches_;
    if (clock_) {
      clock_->advance(latency_.call_ms + latency_.slot_ms * static_cast<double>(batch.slots.size()));
    }
    return make_envelope(result, 0);
  }
  throw RequestFailure("unsupported", "hmr backend cannot serve '" + request.type + "'");
}

std::shared_ptr<MessageServer> make_server(BackendKind kind, const Scene& scene,
                                           std::shared_ptr<SimulatedClock> clock) {
  switch (kind) {
    case BackendKind::Segmentation: return std::make_shared<SegmentationServer>(scene);
    case BackendKind::Completion: return std::make_shared<CompletionServer>(scene);
    case BackendKind::Hmr:
      return std::make_shared<HmrServer>(scene.layout, scene.latency, std::move(clock));
  }
  return nullptr;
}

}  // namespace maskmesh::mock
