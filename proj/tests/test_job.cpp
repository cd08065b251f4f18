#include <doctest.h>

#include "support.hpp"

using namespace testing;

namespace {

std::vector<FrameRef> video(int frames, int w = 64, int h = 64) {
  std::vector<FrameRef> v;
  for (int t = 0; t < frames; ++t) v.push_back({t, "f" + std::to_string(t) + ".png", w, h});
  return v;
}

HumanPrompt box_prompt(const std::string& id, double x0, double y0, double x1, double y1, int frame = 0) {
  return {id, frame, BoxPrompt{x0, y0, x1, y1}};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("a well-formed job validates") {
  const ValidatedJob job = validate_job(video(3), {box_prompt("a", 10, 10, 20, 20)});
  CHECK(job.frame_count() == 3);
  CHECK(job.human_count() == 1);
  CHECK(job.width == 64);
  CHECK(job.human_ids() == std::vector<std::string>{"a"});
}

TEST_CASE("frames are ordered by index") {
  auto v = video(4);
  std::swap(v[0], v[3]);
  const ValidatedJob job = validate_job(v, {box_prompt("a", 0, 0, 4, 4)});
  for (int t = 0; t < 4; ++t) CHECK(job.frames[t].index == t);
}

TEST_CASE("job validation errors") {
  CHECK(code_of([] { validate_job({}, {box_prompt("a", 0, 0, 1, 1)}); }) == ErrorCode::EmptyVideo);
  CHECK(code_of([] {
          validate_job(video(3), {box_prompt("a", 0, 0, 5, 5), box_prompt("a", 10, 10, 20, 20)});
        }) == ErrorCode::DuplicateHumanId);
  CHECK(code_of([] { validate_job(video(3), {box_prompt("a", 70, 10, 80, 20)}); }) ==
        ErrorCode::PromptOutOfBounds);
  CHECK(code_of([] { validate_job(video(3), {box_prompt("a", 20, 10, 10, 20)}); }) ==
        ErrorCode::PromptOutOfBounds);
  CHECK(code_of([] { validate_job(video(3), {{"a", 0, PointPrompt{64.5, 3, true}}}); }) ==
        ErrorCode::PromptOutOfBounds);
  CHECK(code_of([] { validate_job(video(3), {{"a", 0, RleMask::empty(32, 64)}}); }) ==
        ErrorCode::PromptOutOfBounds);
  CHECK(code_of([] { validate_job(video(3), {box_prompt("a", 0, 0, 4, 4, 3)}); }) ==
        ErrorCode::PromptOutOfBounds);
  CHECK(code_of([] {
          auto v = video(3);
          v[1].width = 32;
          validate_job(v, {box_prompt("a", 0, 0, 4, 4)});
        }) == ErrorCode::InconsistentFrameSize);
  CHECK(code_of([] {
          auto v = video(3);
          v[2].index = 5;
          validate_job(v, {box_prompt("a", 0, 0, 4, 4)});
        }) == ErrorCode::InvalidFrameIndex);
}

TEST_CASE("prompt boxes may touch the far edges") {
  CHECK_NOTHROW(validate_job(video(1), {box_prompt("a", 0, 0, 64, 64)}));
}

TEST_CASE("error classes map to exit categories") {
  CHECK(classify(ErrorCode::BackendUnavailable) == ErrorClass::Backend);
  CHECK(classify(ErrorCode::VersionMismatch) == ErrorClass::Backend);
  CHECK(classify(ErrorCode::InvalidConfig) == ErrorClass::Usage);
  CHECK(classify(ErrorCode::CorruptRle) == ErrorClass::Data);
  const StageError wrapped("hmr", Error(ErrorCode::LayoutMismatch, "pose has 3 values"));
  CHECK(wrapped.code() == ErrorCode::LayoutMismatch);
  CHECK(std::string(wrapped.what()) == "stage 'hmr': LayoutMismatch: pose has 3 values");
}

TEST_CASE("finite and aligned checks") {
  const ParamLayout layout{2, 1, 1, 1, 1, {}};
  MeshTrajectory traj{"a", {MhrParams::zeros(layout), std::nullopt}, layout};
  CHECK_NOTHROW(require_finite(traj, "test"));
  traj.params[0]->pose(1) = std::nan("");
  CHECK(code_of([&] { require_finite(traj, "test"); }) == ErrorCode::NonFiniteInput);
  const Masklet m{"a", {std::nullopt, std::nullopt, std::nullopt}};
  CHECK(code_of([&] { require_aligned(m, traj); }) == ErrorCode::LengthMismatch);
}
