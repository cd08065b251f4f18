// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <cstdio>
#include <functional>
#include <sstream>

#include "support.hpp"

using namespace testing;
using protocol::BackendKind;

namespace {

// Pinned sizes and tolerances.
constexpr int kEquivalenceJobs = 200;
constexpr int kMaxFrames = 30;
constexpr int kMaxHumans = 6;
constexpr double kMinSpeedup = 2.0;
constexpr double kMinSweepSpeedup = 1.5;
constexpr int kOcclusionPairs = 1000;
constexpr double kOcclusionThreshold = 0.7;
constexpr int kRleBitmaps = 1000;
constexpr int kRleMaxSide = 128;
constexpr double kFixedPointTol = 1e-9;
constexpr int kJitterTrajectories = 100;
constexpr int kOracleSeries = 50;
constexpr double kOracleTol = 1e-9;

struct Outcome {
  bool pass = true;
  std::string detail;
};

mock::Scene random_scene(std::mt19937& rng, int frames, int humans, int width = 40, int height = 30) {
  mock::Scene s;
  s.width = width;
  s.height = height;
  s.frames = frames;
  const double p_visible = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  std::bernoulli_distribution visible(p_visible);
  for (int h = 0; h < humans; ++h) {
    mock::SceneHuman human{"h" + std::to_string(h),
                           {std::uint8_t(rng() % 256), std::uint8_t(rng() % 256), std::uint8_t(rng() % 256)},
                           {},
                           {}};
    for (int t = 0; t < frames; ++t) {
      if (!visible(rng)) {
        human.visible.push_back(std::nullopt);
        continue;
      }
      const int x0 = int(rng() % (width - 2));
      const int y0 = int(rng() % (height - 2));
      human.visible.push_back(box(x0, y0, x0 + 1 + int(rng() % (width - x0 - 1)), y0 + 1 + int(rng() % (height - y0 - 1))));
    }
    s.humans.push_back(std::move(human));
  }
  return s;
}

/// Masklets read straight from the scene script.
std::vector<Masklet> scene_masklets(const mock::Scene& s) {
  std::vector<Masklet> out;
  for (const auto& h : s.humans) {
    Masklet m{h.id, {}};
    for (int t = 0; t < s.frames; ++t) m.masks.push_back(s.visible_mask(h, t));
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<EncodedImage> render_all(const mock::Scene& s) {
  std::vector<EncodedImage> frames;
  for (int t = 0; t < s.frames; ++t) frames.push_back(encode_png(s.render(t)));
  return frames;
}

Outcome batch_sequential_equivalence() {
  std::mt19937 rng(1001);
  int mismatches = 0;
  std::size_t slots = 0;
  for (int job = 0; job < kEquivalenceJobs; ++job) {
    const int frames = std::uniform_int_distribution<int>(1, kMaxFrames)(rng);
    const int humans = std::uniform_int_distribution<int>(1, kMaxHumans)(rng);
    const mock::Scene scene = random_scene(rng, frames, humans);
    const auto images = render_all(scene);
    const auto masklets = scene_masklets(scene);
    const HmrEvidence evidence{images, masklets, {}};
    auto server = [&] {
      return std::make_unique<protocol::LoopbackChannel>(mock::make_server(BackendKind::Hmr, scene));
    };
    HmrClient sequential_client(server());
    HmrClient batched_client(server());
    const auto sequential = run_hmr_sequential(evidence, sequential_client);
    const int batch = std::uniform_int_distribution<int>(1, 40)(rng);
    const BatchPlan plan = plan_batches(visibility_of(masklets), batch);
    slots += plan.valid_slots();
    if (run_hmr(evidence, plan, batched_client) != sequential) ++mismatches;
  }
  return {mismatches == 0, std::to_string(kEquivalenceJobs) + " jobs, " + std::to_string(slots) +
                               " valid slots, " + std::to_string(mismatches) + " mismatching jobs"};
}

/// Simulated sequential and batched HMR time for T frames with N people all visible.
std::pair<double, double> simulated_times(int frames, int humans, int batch, mock::LatencyModel latency) {
  mock::Scene s;
  s.width = 64;
  s.height = 48;
  s.frames = frames;
  s.latency = latency;
  for (int h = 0; h < humans; ++h) {
    mock::SceneHuman human{"p" + std::to_string(h), {40, 200, 40}, {}, {}};
    for (int t = 0; t < frames; ++t) human.visible.push_back(box(2 + 12 * h, 4 + t % 8, 12 + 12 * h, 40));
    s.humans.push_back(human);
  }
  const auto images = render_all(s);
  const auto masklets = scene_masklets(s);
  const HmrEvidence evidence{images, masklets, {}};
  auto clock = std::make_shared<mock::SimulatedClock>();
  HmrClient client(std::make_unique<protocol::LoopbackChannel>(mock::make_server(BackendKind::Hmr, s, clock)));
  client.handshake();
  clock->reset();
  run_hmr_sequential(evidence, client);
  const double sequential = clock->elapsed_ms();
  clock->reset();
  run_hmr(evidence, plan_batches(visibility_of(masklets), batch), client);
  return {sequential, clock->elapsed_ms()};
}

Outcome simulated_speedup() {
  const auto [seq, bat] = simulated_times(90, 5, 32, {100.0, 5.0});
  const double ratio = seq / bat;
  bool pass = ratio >= kMinSpeedup;
  double worst = ratio;
  for (double s : {1.0, 5.0, 20.0}) {
    for (double factor : {10.0, 12.5, 20.0, 50.0, 200.0}) {
      const auto [a, b] = simulated_times(90, 5, 32, {factor * s, s});
      worst = std::min(worst, a / b);
      pass = pass && a / b >= kMinSweepSpeedup;
    }
  }
  char text[160];
  std::snprintf(text, sizeof text,
                "sequential %.0f ms vs batched %.0f ms, ratio %.2f (>= %.1f); worst sweep ratio %.2f (>= %.1f)",
                seq, bat, ratio, kMinSpeedup, worst, kMinSweepSpeedup);
  return {pass, text};
}

Outcome occlusion_oracle() {
  std::mt19937 rng(3003);
  int disagreements = 0, positives = 0;
  for (int i = 0; i < kOcclusionPairs; ++i) {
    const int w = std::uniform_int_distribution<int>(1, 48)(rng);
    const int h = std::uniform_int_distribution<int>(1, 48)(rng);
    Bitmap v = random_bitmap(rng, w, h);
    Bitmap c = random_bitmap(rng, w, h);
    switch (i % 6) {
      case 0: v.setZero(); break;                                        // invisible
      case 1: c = (c != 0 || v != 0).cast<std::uint8_t>(); break;        // completed ⊇ visible
      case 2: c = v; break;                                              // unchanged
      case 3: {                                                          // same area, shifted
        v.setZero();
        c.setZero();
        const int bw = 1 + int(rng() % w), bh = 1 + int(rng() % h);
        v.topLeftCorner(bh, bw).setOnes();
        c.bottomRightCorner(bh, bw).setOnes();
        break;
      }
      case 4: v.setZero(); c.setZero(); break;                           // both empty
      default: break;
    }
    const bool got = detect_occlusion(rle_encode(v), rle_encode(c), kOcclusionThreshold);
    const bool want = pixel_occluded(v, c, kOcclusionThreshold);
    positives += want;
    disagreements += got != want;
  }
  return {disagreements == 0, std::to_string(kOcclusionPairs) + " pairs (" + std::to_string(positives) +
                                  " occluded), " + std::to_string(disagreements) + " disagreements"};
}

Outcome rle_identity() {
  std::mt19937 rng(4004);
  int failures = 0;
  for (int i = 0; i < kRleBitmaps; ++i) {
    const Bitmap b = random_bitmap(rng, kRleMaxSide);
    const RleMask m = rle_encode(b);
    if (!((rle_decode(m) == b).all()) || area(m) != pixel_area(b)) ++failures;
  }
  Bitmap row(1, 5);
  row << 0, 0, 1, 1, 0;
  const bool fixtures = rle_encode(row).counts == std::vector<std::uint32_t>{2, 2, 1} &&
                        rle_encode(Bitmap::Zero(2, 2)).counts == std::vector<std::uint32_t>{4} &&
                        rle_encode(Bitmap::Ones(2, 2)).counts == std::vector<std::uint32_t>{0, 4};
  return {failures == 0 && fixtures, std::to_string(kRleBitmaps) + " bitmaps up to " + std::to_string(kRleMaxSide) +
                                         "x" + std::to_string(kRleMaxSide) + ", " + std::to_string(failures) +
                                         " failures, fixtures " + (fixtures ? "ok" : "FAILED")};
}

Outcome smoothing_quality() {
  std::mt19937 rng(5005);
  const SmoothingConfig config;

  double worst_fixed = 0.0;
  for (int n = 1; n <= 40; ++n) {
    const double value = std::uniform_real_distribution<double>(-100, 100)(rng);
    const Eigen::VectorXd out = kalman_smooth(Eigen::VectorXd::Constant(n, value), config);
    worst_fixed = std::max(worst_fixed, (out.array() - value).abs().maxCoeff());
  }

  int not_decreasing = 0;
  const ParamLayout layout{6, 4, 5, 3, 4, {}};
  std::normal_distribution<double> noise(0.0, 0.15);
  for (int i = 0; i < kJitterTrajectories; ++i) {
    MeshTrajectory t{"x", {}, layout};
    const double freq = std::uniform_real_distribution<double>(0.01, 0.3)(rng);
    const int n = std::uniform_int_distribution<int>(10, 60)(rng);
    for (int k = 0; k < n; ++k) {
      MhrParams p = MhrParams::zeros(layout);
      for (Eigen::Index c = 0; c < p.pose.size(); ++c) p.pose(c) = std::sin(freq * k + double(c)) + noise(rng);
      for (Eigen::Index c = 0; c < p.hands.size(); ++c) p.hands(c) = 0.5 * std::cos(freq * k * (c + 1)) + noise(rng);
      t.params.push_back(p);
    }
    if (!(jitter_metric(smooth_trajectory(t, config)) < jitter_metric(t))) ++not_decreasing;
  }

  double worst_oracle = 0.0;
  for (int i = 0; i < kOracleSeries; ++i) {
    const int n = std::uniform_int_distribution<int>(1, 80)(rng);
    SmoothingConfig c;
    c.process_noise = std::pow(10.0, std::uniform_real_distribution<double>(-5, 0)(rng));
    c.measurement_noise = std::pow(10.0, std::uniform_real_distribution<double>(-4, 0)(rng));
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> z(n);
    Eigen::VectorXd ze(n);
    for (int k = 0; k < n; ++k) ze(k) = z[k] = g(rng) + 0.05 * k;
    const auto want = rts_oracle(z, c.process_noise, c.measurement_noise);
    const Eigen::VectorXd got = kalman_smooth(ze, c);
    for (int k = 0; k < n; ++k) worst_oracle = std::max(worst_oracle, std::abs(got(k) - want[k]));
  }

  const bool pass = worst_fixed <= kFixedPointTol && not_decreasing == 0 && worst_oracle <= kOracleTol;
  char text[200];
  std::snprintf(text, sizeof text,
                "fixed-point error %.2e (<= %.0e); jitter fell on %d/%d; oracle max error %.2e (<= %.0e)",
                worst_fixed, kFixedPointTol, kJitterTrajectories - not_decreasing, kJitterTrajectories, worst_oracle,
                kOracleTol);
  return {pass, text};
}

PipelineOutput run_scene(const mock::Scene& scene, PipelineConfig config = {}) {
  Rig rig = make_rig(scene);
  config.completion_resolution = {2 * scene.width, 2 * scene.height};
  Backends b = rig.backends(config.in_flight);
  return run_pipeline(rig.job, rig.frames, config, b);
}

Outcome shape_lock() {
  std::mt19937 rng(6006);
  int violations = 0, varying_raw = 0, humans = 0;
  std::vector<mock::Scene> scenes = {crossing_scene(16), load_scene("occluded.json")};
  for (int i = 0; i < 8; ++i) {
    mock::Scene s = random_scene(rng, 12, 3, 64, 48);
    // prompts need a visible frame; keep humans that appear at least once
    std::erase_if(s.humans, [&](const mock::SceneHuman& h) {
      return std::none_of(h.visible.begin(), h.visible.end(), [](const auto& b) { return b.has_value(); });
    });
    if (!s.humans.empty()) scenes.push_back(s);
  }
  for (const auto& scene : scenes) {
    const PipelineOutput out = run_scene(scene);
    for (std::size_t h = 0; h < out.trajectories.size(); ++h) {
      ++humans;
      const MhrParams* first = nullptr;
      for (const auto& p : out.trajectories[h].params) {
        if (!p) continue;
        if (!first) first = &*p;
        if (!(p->shape == first->shape) || !(p->skeleton == first->skeleton)) ++violations;
      }
      const MhrParams* raw_first = nullptr;
      bool varied = false;
      for (const auto& p : out.raw[h].params) {
        if (!p) continue;
        if (!raw_first) raw_first = &*p;
        varied = varied || !(p->shape == raw_first->shape);
      }
      varying_raw += varied;
    }
  }
  return {violations == 0 && varying_raw > 0,
          std::to_string(humans) + " identities over " + std::to_string(scenes.size()) + " scenes, " +
              std::to_string(varying_raw) + " with varying raw shape, " + std::to_string(violations) +
              " frames off the locked shape"};
}

Outcome identity_consistency() {
  int checked = 0, wrong = 0;
  for (int frames : {8, 15, 24}) {
    mock::Scene scene = crossing_scene(frames);
    Rig rig = make_rig(scene);
    PipelineConfig config;
    config.batch_size = 5;
    config.completion_resolution = {2 * scene.width, 2 * scene.height};
    Backends b = rig.backends();
    const PipelineOutput out = run_pipeline(rig.job, rig.frames, config, b);
    const auto& masklets = out.refinement ? out.refinement->masklets : out.masklets;
    const auto overrides = out.refinement ? image_overrides(*out.refinement)
                                          : std::vector<std::map<int, EncodedImage>>(masklets.size());
    for (std::size_t h = 0; h < out.trajectories.size(); ++h) {
      const auto& traj = out.trajectories[h];
      if (traj.human_id != masklets[h].human_id) ++wrong;
      for (int t = 0; t < frames; ++t) {
        const auto& p = traj.params[t];
        const auto& m = masklets[h].masks[t];
        if (p.has_value() != m.has_value()) {
          ++wrong;
          continue;
        }
        if (!p) continue;
        ++checked;
        // camera carries the digest of the mask and image the mock received
        if (p->camera(3) != double(digest(*m)) ||
            p->camera(4) != double(mock::image_digest(HmrEvidence{rig.frames, masklets, overrides}.image(int(h), t))) ||
            !(p->camera == out.raw[h].params[t]->camera)) {
          ++wrong;
        }
      }
    }
  }
  return {wrong == 0 && checked > 0,
          std::to_string(checked) + " (frame, identity) meshes traced to their own masks, " + std::to_string(wrong) +
              " mismatches"};
}

Outcome stage_composability() {
  TempDir tmp("acceptance");
  const fs::path crossing_path = tmp.path / "crossing.json";
  files::save_json(crossing_path, crossing_scene(10).to_json(), 2);
  int mismatches = 0, compared = 0;
  for (const fs::path& scene : {kDataDir / "scenes" / "occluded.json", crossing_path}) {
    const fs::path d = tmp.path / scene.stem();
    const std::string cli = quoted(kCli);
    const std::string mock = " --scene " + quoted(scene);
    const std::string frames = " --frames " + quoted(d / "frames");
    fs::create_directories(d);
    const std::string quiet = " >/dev/null 2>>" + quoted(d / "stderr.log");
    int rc = run_shell(cli + " render-scene --scene " + quoted(scene) + " --out " + quoted(d) + quiet);
    const std::string prompts = " --prompts " + quoted(d / "prompts.json");
    rc |= run_shell(cli + " run" + frames + prompts + " --out " + quoted(d / "run1") + mock + quiet);
    rc |= run_shell(cli + " run" + frames + prompts + " --out " + quoted(d / "run2") + mock + quiet);
    rc |= run_shell(cli + " segment" + frames + prompts + " --out " + quoted(d / "m.json") + mock + quiet);
    rc |= run_shell(cli + " refine" + frames + " --masklets " + quoted(d / "m.json") + " --out " + quoted(d / "r.json") + mock + quiet);
    rc |= run_shell(cli + " hmr" + frames + " --refined " + quoted(d / "r.json") + " --out " + quoted(d / "h.json") + mock + quiet);
    rc |= run_shell(cli + " smooth --in " + quoted(d / "h.json") + " --out " + quoted(d / "s.json") + quiet);
    if (rc != 0) {
      std::string log = read_file(d / "stderr.log");
      while (!log.empty() && log.back() == '\n') log.pop_back();
      return {false, "a CLI stage failed on " + scene.filename().string() + ": " + log};
    }
    const std::pair<fs::path, fs::path> pairs[] = {
        {d / "m.json", d / "run1" / "masklets.json"},
        {d / "r.json", d / "run1" / "refined.json"},
        {d / "s.json", d / "run1" / "trajectories.json"},
        {d / "run1" / "trajectories.json", d / "run2" / "trajectories.json"},
        {d / "run1" / "report.json", d / "run2" / "report.json"},
        {d / "run1" / "refined.json", d / "run2" / "refined.json"},
    };
    for (const auto& [a, b] : pairs) {
      ++compared;
      if (read_file(a) != read_file(b)) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(compared) + " staged/single and repeat-run file pairs compared, " +
                               std::to_string(mismatches) + " differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"C1 batched HMR equals sequential per-slot HMR", batch_sequential_equivalence},
      {"C2 simulated batching speedup", simulated_speedup},
      {"C3 occlusion predicate equals pixel oracle", occlusion_oracle},
      {"C4 RLE decode(encode(x)) == x", rle_identity},
      {"C5 smoothing fixed point, jitter reduction, RTS oracle", smoothing_quality},
      {"C6 shape lock holds per identity", shape_lock},
      {"C7 identity consistency through crossings", identity_consistency},
      {"C8 stage composability and determinism", stage_composability},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
