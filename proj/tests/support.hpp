#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "maskmesh/files.hpp"

namespace testing {

using namespace maskmesh;
namespace fs = std::filesystem;

inline const fs::path kDataDir = MASKMESH_TEST_DATA;
inline const fs::path kCli = MASKMESH_CLI;
inline const fs::path kGoldenDir = MASKMESH_GOLDEN_DIR;

/// Compares `actual` with a checked-in golden file; MASKMESH_REGEN_GOLDEN=1 rewrites it.
inline bool matches_golden(const std::string& name, const std::string& actual) {
  const fs::path path = kGoldenDir / name;
  if (const char* regen = std::getenv("MASKMESH_REGEN_GOLDEN"); regen && std::string(regen) == "1") {
    write_file(path, actual);
    return true;
  }
  return fs::exists(path) && read_file(path) == actual;
}

// ---- random inputs ----

/// Bitmaps of mixed texture: empty, full, sparse noise, dense noise and boxes.
inline Bitmap random_bitmap(std::mt19937& rng, int width, int height) {
  Bitmap b = Bitmap::Zero(height, width);
  const int style = std::uniform_int_distribution<int>(0, 5)(rng);
  if (style == 0) return b;
  if (style == 1) return Bitmap::Ones(height, width);
  if (style <= 3) {
    std::bernoulli_distribution on(style == 2 ? 0.05 : 0.6);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) b(y, x) = on(rng) ? 1 : 0;
    return b;
  }
  const int boxes = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int i = 0; i < boxes; ++i) {
    const int x0 = std::uniform_int_distribution<int>(0, width - 1)(rng);
    const int y0 = std::uniform_int_distribution<int>(0, height - 1)(rng);
    const int x1 = std::uniform_int_distribution<int>(x0, width)(rng);
    const int y1 = std::uniform_int_distribution<int>(y0, height)(rng);
    b.block(y0, x0, y1 - y0, x1 - x0).setOnes();
  }
  return b;
}

inline Bitmap random_bitmap(std::mt19937& rng, int max_side = 128) {
  std::uniform_int_distribution<int> side(1, max_side);
  const int w = side(rng);
  const int h = side(rng);
  return random_bitmap(rng, w, h);
}

// ---- pixel oracles: plain loops over decoded pixels ----

inline std::int64_t pixel_area(const Bitmap& b) {
  std::int64_t n = 0;
  for (int y = 0; y < b.rows(); ++y)
    for (int x = 0; x < b.cols(); ++x) n += b(y, x) != 0;
  return n;
}

inline double pixel_iou(const Bitmap& a, const Bitmap& b) {
  std::int64_t inter = 0, uni = 0;
  for (int y = 0; y < a.rows(); ++y) {
    for (int x = 0; x < a.cols(); ++x) {
      const bool p = a(y, x) != 0, q = b(y, x) != 0;
      inter += p && q;
      uni += p || q;
    }
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

inline bool pixel_occluded(const Bitmap& visible, const Bitmap& completed, double threshold) {
  return pixel_area(completed) > pixel_area(visible) && pixel_iou(visible, completed) < threshold;
}

// ---- smoothing oracle: scalar Kalman filter + RTS pass with hand-expanded 2x2 algebra ----

inline std::vector<double> rts_oracle(const std::vector<double>& z, double q, double r) {
  const std::size_t n = z.size();
  struct State { double x0, x1, p00, p01, p11; };
  std::vector<State> pred(n), filt(n);
  State s{z[0], 0.0, r, 0.0, 1.0};
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      // x <- F x ; P <- F P F' + Q with F = [[1,1],[0,1]]
      const State p = s;
      s.x0 = p.x0 + p.x1;
      s.x1 = p.x1;
      s.p00 = p.p00 + 2 * p.p01 + p.p11 + q / 3;
      s.p01 = p.p01 + p.p11 + q / 2;
      s.p11 = p.p11 + q;
    }
    pred[k] = s;
    const double innov = z[k] - s.x0;
    const double sk = s.p00 + r;
    const double k0 = s.p00 / sk, k1 = s.p01 / sk;
    const State p = s;
    s.x0 = p.x0 + k0 * innov;
    s.x1 = p.x1 + k1 * innov;
    s.p00 = p.p00 - k0 * p.p00;
    s.p01 = p.p01 - k0 * p.p01;
    s.p11 = p.p11 - k1 * p.p01;
    filt[k] = s;
  }
  std::vector<double> out(n);
  double sx0 = filt[n - 1].x0, sx1 = filt[n - 1].x1;
  out[n - 1] = sx0;
  for (std::size_t k = n - 1; k-- > 0;) {
    const State& f = filt[k];
    const State& p = pred[k + 1];
    // P_f F'
    const double a00 = f.p00 + f.p01, a01 = f.p01;
    const double a10 = f.p01 + f.p11, a11 = f.p11;
    // inverse of symmetric P_pred
    const double det = p.p00 * p.p11 - p.p01 * p.p01;
    const double i00 = p.p11 / det, i01 = -p.p01 / det, i11 = p.p00 / det;
    const double c00 = a00 * i00 + a01 * i01, c01 = a00 * i01 + a01 * i11;
    const double c10 = a10 * i00 + a11 * i01, c11 = a10 * i01 + a11 * i11;
    const double d0 = sx0 - p.x0, d1 = sx1 - p.x1;
    sx0 = f.x0 + c00 * d0 + c01 * d1;
    sx1 = f.x1 + c10 * d0 + c11 * d1;
    out[k] = sx0;
  }
  return out;
}

// ---- scenes and in-process mock rigs ----

inline mock::Scene load_scene(const std::string& name) {
  return mock::Scene::load((kDataDir / "scenes" / name).string());
}

inline std::optional<PixelBox> box(int x0, int y0, int x1, int y1) { return PixelBox{x0, y0, x1, y1}; }

/// Two humans walking past each other horizontally; their boxes overlap mid-clip.
inline mock::Scene crossing_scene(int frames = 8, int width = 96, int height = 48) {
  mock::Scene s;
  s.width = width;
  s.height = height;
  s.frames = frames;
  mock::SceneHuman left{"left", {220, 40, 40}, {}, {}};
  mock::SceneHuman right{"right", {40, 40, 220}, {}, {}};
  for (int t = 0; t < frames; ++t) {
    const int step = (width - 20) * t / std::max(1, frames - 1);
    left.visible.push_back(box(step, 10, step + 14, 40));
    right.visible.push_back(box(width - 14 - step, 8, width - step, 38));
  }
  s.humans = {left, right};
  return s;
}

struct Rig {
  mock::Scene scene;
  ValidatedJob job;
  std::vector<EncodedImage> frames;
  std::shared_ptr<mock::SimulatedClock> clock = std::make_shared<mock::SimulatedClock>();

  std::unique_ptr<protocol::Channel> channel(protocol::BackendKind kind) const {
    return std::make_unique<protocol::LoopbackChannel>(mock::make_server(kind, scene, clock));
  }
  SegmentationClient segmentation() const { return SegmentationClient(channel(protocol::BackendKind::Segmentation)); }
  CompletionClient completion() const { return CompletionClient(channel(protocol::BackendKind::Completion)); }
  HmrClient hmr() const { return HmrClient(channel(protocol::BackendKind::Hmr)); }

  Backends backends(int in_flight = 1) const {
    Backends b;
    b.segmentation = std::make_unique<SegmentationClient>(channel(protocol::BackendKind::Segmentation));
    b.completion = std::make_unique<CompletionClient>(channel(protocol::BackendKind::Completion));
    b.clock = clock;
    for (int i = 0; i < in_flight; ++i) {
      b.hmr.push_back(std::make_unique<HmrClient>(channel(protocol::BackendKind::Hmr)));
    }
    return b;
  }
};

inline Rig make_rig(mock::Scene scene) {
  Rig rig;
  std::vector<FrameRef> refs;
  for (int t = 0; t < scene.frames; ++t) {
    refs.push_back({t, "", scene.width, scene.height});
    rig.frames.push_back(encode_png(scene.render(t)));
  }
  rig.job = validate_job(refs, scene.prompts());
  rig.scene = std::move(scene);
  return rig;
}

/// Masklet from per-frame optional boxes on a width x height canvas.
inline Masklet masklet_of(const std::string& id, int width, int height,
                          const std::vector<std::optional<PixelBox>>& boxes) {
  Masklet m{id, {}};
  for (const auto& b : boxes) {
    if (b) m.masks.push_back(box_mask(width, height, *b));
    else m.masks.push_back(std::nullopt);
  }
  return m;
}

/// A scratch directory removed when the test ends.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng{std::random_device{}()};
    path = fs::temp_directory_path() / ("maskmesh-" + tag + "-" + std::to_string(rng()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

/// Runs a shell command, returning its exit status.
inline int run_shell(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
}

inline std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace testing
