#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "head3d/io.hpp"
#include "head3d/synth.hpp"
#include "test_support.hpp"

using namespace head3d;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("head3d_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("png round trip quantizes to 8 bits") {
  std::mt19937 rng(3);
  const fs::path dir = scratch("png");
  for (int ch : {1, 3, 4}) {
    const Image img = head3d::testing::random_image(rng, 17, 9, ch);
    write_png(dir / "a.png", img);
    const Image back = read_png(dir / "a.png", ch);
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.values().size(); ++i)
      CHECK(std::abs(back.values()[i] - img.values()[i]) <= 0.5f / 255.0f + 1e-6f);
    // A second round trip is lossless.
    CHECK(encode_png(back) == encode_png(img));
    CHECK(decode_png(encode_png(back), ch).values() == back.values());
  }
  Image out_of_range(2, 1, 1);
  out_of_range.at(0, 0, 0) = -3.0f;
  out_of_range.at(1, 0, 0) = 7.0f;
  const Image clamped = decode_png(encode_png(out_of_range), 1);
  CHECK(clamped.at(0, 0, 0) == 0.0f);
  CHECK(clamped.at(1, 0, 0) == 1.0f);
  CHECK_THROWS_AS(encode_png(Image(4, 4, 2)), std::invalid_argument);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), IoError);
  CHECK_THROWS_AS(decode_png({1, 2, 3}), IoError);
}

TEST_CASE("mask png round trip") {
  const fs::path dir = scratch("mask");
  Mask m(13, 7);
  for (int v = 0; v < 7; ++v)
    for (int u = 0; u < 13; ++u) m.set(u, v, (u * 7 + v * 3) % 5 == 0);
  write_mask_png(dir / "m.png", m);
  CHECK(read_mask_png(dir / "m.png").values() == m.values());
}

TEST_CASE("pfm layout and round trip") {
  const fs::path dir = scratch("pfm");
  DepthMap d(3, 2);
  d.set(0, 0, 1.5);
  d.set(2, 0, 0.25);
  d.set(1, 1, 2.0);
  write_pfm(dir / "d.pfm", d);

  // Hand-built expectation: header, then the bottom row first, as float32 LE.
  std::ifstream f(dir / "d.pfm", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string header = "Pf\n3 2\n-1.0\n";
  REQUIRE(bytes.size() == header.size() + 6 * 4);
  CHECK(bytes.substr(0, header.size()) == header);
  const float expected[6] = {0.0f, 2.0f, 0.0f, 1.5f, 0.0f, 0.25f};
  for (int i = 0; i < 6; ++i) {
    unsigned char b[4];
    std::memcpy(b, bytes.data() + header.size() + 4 * i, 4);
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
    CHECK(std::bit_cast<float>(bits) == expected[i]);
  }

  const DepthMap back = read_pfm(dir / "d.pfm");
  CHECK(back.mask().values() == d.mask().values());
  CHECK(back.at(0, 0) == 1.5);
  CHECK(back.at(1, 1) == 2.0);

  std::ofstream(dir / "bad.pfm") << "PF\n1 1\n-1.0\n";
  CHECK_THROWS_AS(read_pfm(dir / "bad.pfm"), IoError);
  std::ofstream(dir / "short.pfm") << "Pf\n4 4\n-1.0\nxx";
  CHECK_THROWS_AS(read_pfm(dir / "short.pfm"), IoError);
}

TEST_CASE("pose json forms") {
  std::mt19937 rng(8);
  const Pose p = head3d::testing::random_pose(rng, 30.0, 0.2);
  const Pose back = pose_from_json(nlohmann::json::parse(pose_to_json(p).dump()));
  CHECK((back.R - p.R).norm() == 0.0);
  CHECK((back.t - p.t).norm() == 0.0);

  nlohmann::json flat = pose_to_json(p);
  nlohmann::json nine = nlohmann::json::array();
  for (const auto& row : flat["R"])
    for (const auto& x : row) nine.push_back(x);
  flat["R"] = nine;
  CHECK((pose_from_json(flat).R - p.R).norm() == 0.0);

  const nlohmann::json euler = {{"yaw", 10.0}, {"pitch", -5.0}, {"roll", 2.0}, {"t", {0.01, 0.0, 0.02}}};
  const Pose e = pose_from_json(euler);
  const Pose expect = pose_from_euler(10.0, -5.0, 2.0, Eigen::Vector3d(0.01, 0.0, 0.02));
  CHECK((e.R - expect.R).norm() == 0.0);
  CHECK((e.t - expect.t).norm() == 0.0);
  nlohmann::json pivoted = euler;
  pivoted["pivot"] = 1.0;
  const Pose hp = head_pose({10.0, -5.0, 2.0, Eigen::Vector3d(0.01, 0.0, 0.02)}, 1.0);
  CHECK((pose_from_json(pivoted).t - hp.t).norm() == 0.0);

  CHECK_THROWS_AS(pose_from_json(nlohmann::json::array()), IoError);
  CHECK_THROWS_AS(pose_from_json({{"R", {1, 0, 0}}}), IoError);
  CHECK_THROWS_AS(pose_from_json({{"R", {2, 0, 0, 0, 1, 0, 0, 0, 1}}}), IoError);
  CHECK_THROWS_AS(pose_from_json({{"yaw", "x"}}), IoError);
  CHECK_THROWS_AS(pose_from_json({{"t", {0, 0, 0}}}), IoError);
}

TEST_CASE("video directory round trip") {
  const fs::path dir = scratch("video");
  const CameraIntrinsics K = intrinsics_from_fov(32, 24, 10.0);
  TrajectorySpec traj;
  traj.keys = {{-5.0}, {5.0}};
  traj.frames = 3;
  VideoSequence seq = render_sequence(SyntheticScene{}, traj, K);
  seq[1].pose.reset();
  const VideoCamera cam{32, 24, 10.0};
  write_video(dir, seq, &cam);
  CHECK(fs::exists(dir / "frame_0002.png"));
  CHECK(fs::exists(dir / "depth_0000.pfm"));
  CHECK(fs::exists(dir / "mask_0001.png"));

  const VideoSequence back = read_video(dir);
  REQUIRE(back.size() == 3);
  CHECK_FALSE(back[1].pose);
  REQUIRE(back[2].pose);
  CHECK((back[2].pose->R - seq[2].pose->R).norm() == 0.0);
  CHECK(back[0].mask->values() == seq[0].mask->values());
  CHECK(back[0].depth->mask().values() == seq[0].depth->mask().values());
  for (int v = 0; v < 24; ++v)
    for (int u = 0; u < 32; ++u)
      if (seq[0].depth->valid(u, v)) CHECK(std::abs(back[0].depth->at(u, v) - seq[0].depth->at(u, v)) < 1e-6);
  const auto camera = read_video_camera(dir);
  REQUIRE(camera);
  CHECK(camera->fov_deg == 10.0);

  CHECK_THROWS_AS(read_video(scratch("empty")), IoError);
  CHECK_THROWS_AS(read_video(dir / "frame_0000.png"), IoError);
}

TEST_CASE("session round trip") {
  const fs::path dir = scratch("session");
  const CameraIntrinsics K = intrinsics_from_fov(32, 24, 12.0);
  const SyntheticScene scene;
  const Render r = render_frame(scene, Pose::identity(), K);
  Session s;
  s.K = K;
  s.fov_deg = 12.0;
  s.created = utc_timestamp();
  s.canonical = {r.rgb, mask_depth(r.depth, r.head), r.head};
  s.reference = {r.rgb, r.depth, Pose::identity(), r.head};
  save_session(dir, s);
  const Session back = load_session(dir);
  CHECK(back.K.f == K.f);
  CHECK(back.K.width == 32);
  CHECK(back.created == s.created);
  CHECK(back.canonical.valid.values() == s.canonical.valid.values());
  CHECK(encode_png(back.canonical.rgb) == encode_png(s.canonical.rgb));
  CHECK(back.reference.mask->values() == r.head.values());

  nlohmann::json meta = read_json(dir / "meta.json");
  meta["width"] = 64;
  write_json(dir / "meta.json", meta);
  CHECK_THROWS_AS(load_session(dir), IoError);
  CHECK_THROWS_AS(load_session(scratch("nosession")), IoError);
  Session incomplete = s;
  incomplete.reference.pose.reset();
  CHECK_THROWS_AS(save_session(dir, incomplete), std::invalid_argument);
}

TEST_CASE("depth visualization and tables") {
  DepthMap d(3, 1);
  d.set(0, 0, 1.0);
  d.set(1, 0, 2.0);
  const Image vis = depth_visualization(d);
  CHECK(vis.at(0, 0, 0) == 1.0f);
  CHECK(vis.at(1, 0, 0) == doctest::Approx(0.2f));
  CHECK(vis.at(2, 0, 0) == 0.0f);

  const std::string t = format_table({"name", "mse"}, {{"N=1", "0.5"}, {"longer", "12.25"}});
  CHECK(t ==
        "name      mse\n"
        "------  -----\n"
        "N=1       0.5\n"
        "longer  12.25\n");
}
