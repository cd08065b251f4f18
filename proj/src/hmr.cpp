#include "maskmesh/hmr.hpp"

#include <algorithm>
#include <exception>
#include <thread>

namespace maskmesh {

std::size_t BatchPlan::valid_slots() const {
  std::size_t n = 0;
  for (const auto& c : chunks) {
    n += static_cast<std::size_t>(
        std::count_if(c.slots.begin(), c.slots.end(), [](const Slot& s) { return s.valid; }));
  }
  return n;
}

std::size_t BatchPlan::padding_slots() const {
  std::size_t n = 0;
  for (const auto& c : chunks) n += c.slots.size();
  return n - valid_slots();
}

VisibilityTable visibility_of(std::span<const Masklet> masklets) {
  const Eigen::Index frames = masklets.empty() ? 0 : static_cast<Eigen::Index>(masklets[0].masks.size());
  VisibilityTable table = VisibilityTable::Constant(frames, static_cast<Eigen::Index>(masklets.size()), false);
  for (std::size_t h = 0; h < masklets.size(); ++h) {
    if (static_cast<Eigen::Index>(masklets[h].masks.size()) != frames) {
      throw Error(ErrorCode::LengthMismatch, "masklets differ in length");
    }
    for (Eigen::Index t = 0; t < frames; ++t) {
      table(t, static_cast<Eigen::Index>(h)) = masklets[h].masks[t].has_value();
    }
  }
  return table;
}

BatchPlan plan_batches(const VisibilityTable& visibility, int batch_size) {
  if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be at least 1");
  BatchPlan plan;
  const auto per_frame = visibility.rowwise().count();
  std::vector<int> busy;
  for (Eigen::Index t = 0; t < visibility.rows(); ++t) {
    if (per_frame(t) > 0) busy.push_back(static_cast<int>(t));
  }
  for (std::size_t first = 0; first < busy.size(); first += static_cast<std::size_t>(batch_size)) {
    const std::size_t last = std::min(busy.size(), first + static_cast<std::size_t>(batch_size));
    Chunk chunk{{busy.begin() + first, busy.begin() + last}, 0, {}};
    for (int t : chunk.frames) chunk.width = std::max(chunk.width, static_cast<int>(per_frame(t)));
    chunk.slots.reserve(chunk.frames.size() * static_cast<std::size_t>(chunk.width));
    for (int t : chunk.frames) {
      int filled = 0;
      for (Eigen::Index h = 0; h < visibility.cols(); ++h) {
        if (!visibility(t, h)) continue;
        chunk.slots.push_back({t, static_cast<int>(h), true});
        ++filled;
      }
      for (; filled < chunk.width; ++filled) chunk.slots.push_back({t, -1, false});
    }
    plan.chunks.push_back(std::move(chunk));
  }
  return plan;
}

std::size_t call_count(const BatchPlan& plan) { return plan.chunks.size(); }

std::size_t sequential_call_count(const BatchPlan& plan) { return plan.valid_slots(); }

const EncodedImage& HmrEvidence::image(int human, int frame) const {
  if (human >= 0 && static_cast<std::size_t>(human) < image_overrides.size()) {
    const auto& overrides = image_overrides[static_cast<std::size_t>(human)];
    if (const auto it = overrides.find(frame); it != overrides.end()) return it->second;
  }
  return frames[static_cast<std::size_t>(frame)];
}

namespace {

std::vector<MeshTrajectory> empty_trajectories(const HmrEvidence& evidence, const ParamLayout& layout) {
  std::vector<MeshTrajectory> out;
  out.reserve(evidence.masklets.size());
  for (const auto& m : evidence.masklets) {
    out.push_back({m.human_id, std::vector<std::optional<MhrParams>>(evidence.frames.size()), layout});
  }
  return out;
}

std::vector<protocol::HmrSlot> build_slots(const HmrEvidence& evidence, const Chunk& chunk) {
  const EncodedImage& pad_image = evidence.frames[static_cast<std::size_t>(chunk.frames.front())];
  std::vector<protocol::HmrSlot> slots;
  slots.reserve(chunk.slots.size());
  for (const Slot& s : chunk.slots) {
    if (s.valid) {
      const auto& mask = evidence.masklets[static_cast<std::size_t>(s.human)].masks[s.frame];
      if (!mask) throw Error(ErrorCode::InvalidInput, "plan references an absent mask");
      slots.push_back({evidence.image(s.human, s.frame), *mask, true});
    } else {
      const EncodedImage& first = evidence.frames.front();
      slots.push_back({pad_image, RleMask::empty(first.width, first.height), false});
    }
  }
  return slots;
}

void check_evidence(const HmrEvidence& evidence) {
  for (const auto& m : evidence.masklets) {
    if (m.masks.size() != evidence.frames.size()) {
      throw Error(ErrorCode::LengthMismatch, "masklet '" + m.human_id + "' has wrong length");
    }
  }
}

}  // namespace

std::vector<MeshTrajectory> run_hmr(const HmrEvidence& evidence, const BatchPlan& plan,
                                    std::span<HmrClient* const> workers) {
  if (workers.empty()) throw Error(ErrorCode::BackendUnavailable, "no HMR workers");
  check_evidence(evidence);
  const ParamLayout layout = workers.front()->layout();
  for (HmrClient* w : workers) {
    if (!(w->layout() == layout)) {
      throw Error(ErrorCode::LayoutMismatch, "HMR connections declared different layouts");
    }
  }

  std::vector<std::vector<MhrParams>> outputs(plan.chunks.size());
  auto process = [&](std::size_t worker) {
    for (std::size_t c = worker; c < plan.chunks.size(); c += workers.size()) {
      outputs[c] = workers[worker]->infer(build_slots(evidence, plan.chunks[c]));
    }
  };
  if (workers.size() == 1) {
    process(0);
  } else {
    std::vector<std::exception_ptr> errors(workers.size());
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers.size(); ++w) {
      threads.emplace_back([&, w] {
        try {
          process(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  auto trajectories = empty_trajectories(evidence, layout);
  for (std::size_t c = 0; c < plan.chunks.size(); ++c) {
    const auto& slots = plan.chunks[c].slots;
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (!slots[k].valid) continue;
      trajectories[static_cast<std::size_t>(slots[k].human)].params[slots[k].frame] =
          std::move(outputs[c][k]);
    }
  }
  for (const auto& traj : trajectories) require_finite(traj, "hmr");
  return trajectories;
}

std::vector<MeshTrajectory> run_hmr(const HmrEvidence& evidence, const BatchPlan& plan,
                                    HmrClient& backend) {
  HmrClient* workers[] = {&backend};
  return run_hmr(evidence, plan, std::span<HmrClient* const>(workers));
}

std::vector<MeshTrajectory> run_hmr_sequential(const HmrEvidence& evidence, HmrClient& backend) {
  check_evidence(evidence);
  auto trajectories = empty_trajectories(evidence, backend.layout());
  for (std::size_t t = 0; t < evidence.frames.size(); ++t) {
    for (std::size_t h = 0; h < evidence.masklets.size(); ++h) {
      const auto& mask = evidence.masklets[h].masks[t];
      if (!mask) continue;
      std::vector<protocol::HmrSlot> one{
          {evidence.image(static_cast<int>(h), static_cast<int>(t)), *mask, true}};
      trajectories[h].params[t] = std::move(backend.infer(std::move(one)).front());
    }
  }
  for (const auto& traj : trajectories) require_finite(traj, "hmr");
  return trajectories;
}

}  // namespace maskmesh
