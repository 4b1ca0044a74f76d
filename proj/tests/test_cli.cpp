#include <doctest.h>

#include <cstdlib>
#include <set>
#include <sstream>

#include "head3d/cli.hpp"
#include "head3d/io.hpp"
#include "head3d/service.hpp"

using namespace head3d;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "head3d");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("head3d_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t entries(const fs::path& dir) {
  return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir), fs::directory_iterator()));
}

}  // namespace

TEST_CASE("cli: usage and help") {
  CHECK(cli({}).code == 1);
  const Result unknown = cli({"frobnicate"});
  CHECK(unknown.code == 1);
  CHECK_FALSE(unknown.err.empty());

  const Result help = cli({"--help"});
  CHECK(help.code == 0);
  for (const char* sub : {"render-synthetic", "estimate-canonical", "transfer", "novel-view", "metrics", "ablation",
                          "serve"}) {
    CHECK(help.out.find(sub) != std::string::npos);
    const Result h = cli({sub, "--help"});
    CHECK(h.code == 0);
    CHECK(h.out.find("--") != std::string::npos);
  }
  CHECK(cli({"transfer", "--help"}).out.find("--estimator") != std::string::npos);
  CHECK(cli({"serve", "--help"}).out.find("127.0.0.1:8008") != std::string::npos);
}

TEST_CASE("cli: argument validation") {
  const fs::path root = fresh("validation");
  CHECK(cli({"render-synthetic", "--frames", "2", "--fov", "0", "--out", (root / "a").string()}).code == 1);
  CHECK(cli({"render-synthetic", "--frames", "2", "--fov", "180", "--out", (root / "a").string()}).code == 1);
  CHECK(cli({"render-synthetic", "--frames", "0", "--out", (root / "a").string()}).code == 1);
  CHECK(cli({"metrics", "--a", (root / "missing").string(), "--b", root.string()}).code == 1);
  CHECK(cli({"transfer", "--subject", root.string()}).code == 1);
  CHECK(cli({"transfer", "--subject", root.string(), "--driving", root.string(), "--estimator", "magic",
             "--out", (root / "x").string()})
            .code == 1);
  CHECK(entries(root) == 0);
  // Runtime failure: the directory holds no frames.
  const Result empty = cli({"metrics", "--a", root.string(), "--b", root.string()});
  CHECK(empty.code == 2);
  CHECK(empty.err.find("frame_0000.png") != std::string::npos);

  ::unsetenv("HEAD3D_OUT");
  CHECK(cli({"render-synthetic", "--frames", "2"}).code == 1);
}

TEST_CASE("cli: end-to-end synthetic workflow") {
  const fs::path root = fresh("workflow");
  const fs::path scene = root / "scene.json";
  write_json(scene, {{"checker_period", 0.03}, {"trajectory", {{{"yaw", -15.0}}, {{"yaw", 15.0}}}}});

  const Result r = cli({"render-synthetic", "--config", scene.string(), "--frames", "7", "--out",
                        (root / "seq").string()});
  REQUIRE(r.code == 0);
  for (int i = 0; i < 7; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d.png", i);
    CHECK(fs::exists(root / "seq" / name));
    std::snprintf(name, sizeof name, "depth_%04d.pfm", i);
    CHECK(fs::exists(root / "seq" / name));
  }
  CHECK_FALSE(fs::exists(root / "seq" / "frame_0007.png"));
  CHECK(read_json(root / "seq" / "summary.json")["frames"] == 7);
  CHECK(read_json(root / "seq" / "poses.json").size() == 7);

  const Result m = cli({"metrics", "--a", (root / "seq").string(), "--b", (root / "seq").string()});
  CHECK(m.code == 0);
  CHECK(m.out.rfind("mse 0\n", 0) == 0);
  const Result mj = cli({"--json", "metrics", "--a", (root / "seq").string(), "--b", (root / "seq").string()});
  CHECK(nlohmann::json::parse(mj.out)["psnr"] == 99.0);

  // Driving video: a different trajectory.
  write_json(root / "drive.json", {{"trajectory", {{{"yaw", 10.0}, {"pitch", 5.0}}, {{"yaw", -10.0}}}}});
  REQUIRE(cli({"render-synthetic", "--config", (root / "drive.json").string(), "--frames", "4", "--out",
               (root / "drive").string()})
              .code == 0);

  const Result t = cli({"transfer", "--subject", (root / "seq").string(), "--driving", (root / "drive").string(),
                        "--n", "3", "--estimator", "oracle", "--save-attention", "--out", (root / "out").string()});
  REQUIRE(t.code == 0);
  const nlohmann::json report = read_json(root / "out" / "report.json");
  REQUIRE(report["frames"].size() == 4);
  for (const auto& f : report["frames"]) {
    CHECK(f["flagged"] == false);
    CHECK(f["psnr"].get<double>() > 25.0);
  }
  CHECK(report["config"]["n"] == 3);
  CHECK(fs::exists(root / "out" / "frame_0003.png"));
  CHECK(fs::exists(root / "out" / "attention_0000_head.png"));
  CHECK(fs::exists(root / "out" / "report.txt"));
  CHECK(read_video(root / "out").size() == 4);

  const Result e = cli({"estimate-canonical", "--subject", (root / "seq").string(), "--n", "3", "--out",
                        (root / "session").string()});
  REQUIRE(e.code == 0);
  const Session s = load_session(root / "session");
  CHECK(s.canonical.valid.count() > 1000);

  REQUIRE(cli({"novel-view", "--session", (root / "session").string(), "--out", (root / "nv0").string()}).code == 0);
  const Image nv0 = read_png(root / "nv0" / "novel_view.png");
  const NovelViewService svc(s);
  CHECK(encode_png(nv0) == svc.render_png({}));
  REQUIRE(cli({"novel-view", "--session", (root / "session").string(), "--yaw", "15", "--out",
               (root / "nv15").string()})
              .code == 0);
  CHECK(read_json(root / "nv15" / "summary.json")["pose"]["yaw"] == 15.0);
  CHECK(encode_png(read_png(root / "nv15" / "novel_view.png")) != encode_png(nv0));

  const std::set<std::string> expected{"scene.json", "seq", "drive.json", "drive", "out", "session", "nv0", "nv15"};
  std::set<std::string> seen;
  for (const auto& entry : fs::directory_iterator(root)) seen.insert(entry.path().filename().string());
  CHECK(seen == expected);

  // Too many references for the subject: a runtime error.
  CHECK(cli({"transfer", "--subject", (root / "drive").string(), "--driving", (root / "drive").string(), "--n",
             "9", "--out", (root / "fail").string()})
            .code == 2);
}

TEST_CASE("cli: output directory from the environment and ablation") {
  const fs::path root = fresh("env");
  ::setenv("HEAD3D_OUT", root.string().c_str(), 1);
  const Result r = cli({"--threads", "1", "ablation", "--frames", "8", "--n-values", "1,3", "--width", "64",
                        "--height", "64", "--fov", "20"});
  ::unsetenv("HEAD3D_OUT");
  REQUIRE(r.code == 0);
  const nlohmann::json rep = read_json(root / "ablation" / "report.json");
  REQUIRE(rep["rows"].size() == 4);
  CHECK(rep["rows"][0]["n"] == 1);
  CHECK(rep["rows"][3]["disable_canonical_head"] == true);
  CHECK(fs::exists(root / "ablation" / "table.txt"));
  CHECK(r.out.find("variant") != std::string::npos);
  CHECK(entries(root) == 1);
}
