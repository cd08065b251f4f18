#include <doctest.h>

#include "support.hpp"

using namespace testing;

namespace {

const fs::path kScene = kDataDir / "scenes" / "occluded.json";

/// Renders the occlusion scene into `dir`/frames and `dir`/prompts.json.
void render(const fs::path& dir) {
  REQUIRE(run_shell(quoted(kCli) + " render-scene --scene " + quoted(kScene) + " --out " + quoted(dir)) == 0);
}

int cli(const std::string& args) { return run_shell(quoted(kCli) + " " + args + " 2>/dev/null >/dev/null"); }

std::string inputs(const fs::path& dir) {
  return "--frames " + quoted(dir / "frames") + " --prompts " + quoted(dir / "prompts.json");
}

std::string scene_flag() { return " --scene " + quoted(kScene); }

}  // namespace

TEST_CASE("run writes trajectories and a report") {
  TempDir tmp("cli-run");
  render(tmp.path);
  REQUIRE(cli("run " + inputs(tmp.path) + " --out " + quoted(tmp.path / "out") + scene_flag()) == 0);
  for (const char* name : {"masklets.json", "refined.json", "trajectories.json", "report.json", "timings.json"}) {
    CHECK(fs::exists(tmp.path / "out" / name));
  }
  const Json traj = files::load_json(tmp.path / "out" / "trajectories.json");
  CHECK(traj["format"] == "maskmesh.trajectories");
  CHECK(traj["humans"] == Json::parse(R"(["a","b"])"));

  const fs::path summary = tmp.path / "summary.json";
  REQUIRE(cli("report " + quoted(tmp.path / "out") + " --out " + quoted(summary)) == 0);
  CHECK(matches_golden("occluded_report_summary.json", read_file(summary)));
  CHECK(matches_golden("occluded_report.json", read_file(tmp.path / "out" / "report.json")));
}

TEST_CASE("smooth records the noise settings it used") {
  TempDir tmp("cli-smooth");
  render(tmp.path);
  REQUIRE(cli("run " + inputs(tmp.path) + " --out " + quoted(tmp.path / "out") + scene_flag()) == 0);
  const fs::path out = tmp.path / "resmoothed.json";
  REQUIRE(cli("smooth --in " + quoted(tmp.path / "out" / "trajectories.json") + " --q 1e-3 --r 1e-2 --out " +
              quoted(out)) == 0);
  const Json j = files::load_json(out);
  CHECK(j["config"]["smoothing"]["q"] == 1e-3);
  CHECK(j["config"]["smoothing"]["r"] == 1e-2);
  CHECK(read_file(out) == read_file(tmp.path / "out" / "trajectories.json"));

  REQUIRE(cli("smooth --in " + quoted(out) + " --r 0.5 --out " + quoted(out)) == 0);
  CHECK(files::load_json(out)["config"]["smoothing"]["r"] == 0.5);
}

TEST_CASE("staged commands reproduce run byte for byte") {
  TempDir tmp("cli-stages");
  render(tmp.path);
  const fs::path d = tmp.path;
  const std::string frames = " --frames " + quoted(d / "frames");
  REQUIRE(cli("run " + inputs(d) + " --out " + quoted(d / "out") + scene_flag()) == 0);
  REQUIRE(cli("segment " + inputs(d) + " --out " + quoted(d / "m.json") + scene_flag()) == 0);
  REQUIRE(cli("refine" + frames + " --masklets " + quoted(d / "m.json") + " --out " + quoted(d / "r.json") + scene_flag()) == 0);
  REQUIRE(cli("hmr" + frames + " --refined " + quoted(d / "r.json") + " --out " + quoted(d / "h.json") + scene_flag()) == 0);
  REQUIRE(cli("smooth --in " + quoted(d / "h.json") + " --out " + quoted(d / "s.json")) == 0);
  CHECK(read_file(d / "m.json") == read_file(d / "out" / "masklets.json"));
  CHECK(read_file(d / "r.json") == read_file(d / "out" / "refined.json"));
  CHECK(read_file(d / "s.json") == read_file(d / "out" / "trajectories.json"));
}

TEST_CASE("out-of-process backends give the same run") {
  TempDir tmp("cli-exec");
  render(tmp.path);
  const fs::path d = tmp.path;
  REQUIRE(cli("run " + inputs(d) + " --out " + quoted(d / "a") + scene_flag()) == 0);
  auto exec = [](const char* kind) {
    return std::string("'exec:") + kCli.string() + " serve-mock --kind " + kind + " --scene " + kScene.string() + "'";
  };
  REQUIRE(cli("run " + inputs(d) + " --out " + quoted(d / "b") + " --seg-backend " + exec("segmentation") +
              " --completion-backend " + exec("completion") + " --hmr-backend " + exec("hmr")) == 0);
  CHECK(read_file(d / "a" / "trajectories.json") == read_file(d / "b" / "trajectories.json"));
  CHECK(read_file(d / "a" / "report.json") == read_file(d / "b" / "report.json"));
}

TEST_CASE("configuration precedence: defaults, then config file, then flags") {
  TempDir tmp("cli-config");
  render(tmp.path);
  const fs::path config = tmp.path / "config.json";
  write_file(config, R"({"batch_size": 4, "max_gap": 0, "smoothing": {"q": 0.5}})");
  REQUIRE(cli("run " + inputs(tmp.path) + " --out " + quoted(tmp.path / "out") + scene_flag() + " --config " +
              quoted(config) + " --batch-size 2") == 0);
  const Json c = files::load_json(tmp.path / "out" / "report.json")["config"];
  CHECK(c["batch_size"] == 2);
  CHECK(c["max_gap"] == 0);
  CHECK(c["smoothing"]["q"] == 0.5);
  CHECK(c["smoothing"]["r"] == 1e-2);
  CHECK(c["iou_threshold"] == 0.7);
}

TEST_CASE("exit codes") {
  TempDir tmp("cli-exit");
  render(tmp.path);
  const std::string out = " --out " + quoted(tmp.path / "out");
  CHECK(cli("run --frames x") == 1);
  CHECK(cli("fly") == 1);
  CHECK(cli("run " + inputs(tmp.path) + out + scene_flag() + " --batch-size 0") == 1);
  CHECK(cli("run " + inputs(tmp.path) + out + scene_flag() + " --hmr-backend http://127.0.0.1:1") == 2);
  CHECK(cli("run " + inputs(tmp.path) + out + scene_flag() + " --seg-backend 'exec:exit 0'") == 2);
  write_file(tmp.path / "bad.json", R"([{"id":"a","kind":"box","frame":1,"box":[60,0,90,10]}])");
  CHECK(cli("run --frames " + quoted(tmp.path / "frames") + " --prompts " + quoted(tmp.path / "bad.json") + out +
            scene_flag()) == 3);
  CHECK(cli("run --frames " + quoted(tmp.path / "nowhere") + " --prompts " + quoted(tmp.path / "prompts.json") +
            out + scene_flag()) == 3);
  CHECK_FALSE(fs::exists(tmp.path / "out"));
  CHECK(cli("--help") == 0);
}
