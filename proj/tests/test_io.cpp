#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "handfit/io.hpp"
#include "oracles.hpp"

using namespace handfit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("handfit_test_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("shipped default skeleton satisfies all invariants") {
  const SkeletonAssets a =
      load_skeleton(fs::path(HANDFIT_DATA_DIR) / "skeleton_default.json");
  CHECK(a.topo.joints.size() == 21);
  CHECK(a.topo.bones.size() == 20);
  CHECK(a.topo.dofs.size() == 20);
  CHECK(a.blobs.size() == 26);
  CHECK((a.bone_model.b_avg.array() > 0.0).all());
  for (int k = 0; k < kArticDofCount; ++k) CHECK(a.limits.lo[k] < a.limits.hi[k]);
}

TEST_CASE("config with a negative lambda is rejected by name") {
  TempDir tmp;
  const fs::path p = tmp.path / "bad.json";
  std::ofstream(p) << R"({"weights": {"lambda_bone": -0.5}})";
  try {
    load_config(p);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("lambda_bone") != std::string::npos);
  }
}

TEST_CASE("malformed JSON raises ParseError with the file name") {
  TempDir tmp;
  const fs::path p = tmp.path / "broken.json";
  std::ofstream(p) << "{ not json";
  try {
    load_camera(p);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("broken.json") != std::string::npos);
  }
}

TEST_CASE("fit result round trip is bit exact for finite doubles") {
  TempDir tmp;
  std::mt19937 rng(120);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FitResult r;
  for (int i = 0; i < kPoseDofCount; ++i) r.theta.theta[i] = u(rng) * std::pow(10.0, (i % 7) - 3);
  for (int i = 0; i < kShapeDofCount; ++i) r.beta.beta[i] = u(rng) * 1e-3;
  r.theta.theta[25] = 512.0078125;
  r.report.e_total = -0.12345678901234567;
  r.report.e_dissim = -0.3;
  r.iterations = 321;
  r.seed_index = 2;
  JointArray joints;
  for (auto& j : joints) j = {u(rng) * 100.0, u(rng) * 100.0, 400.0 + u(rng)};

  const fs::path p = tmp.path / "fit.json";
  save_fit_result(p, r, joints);
  const FitResult back = load_fit_result(p);
  CHECK(back.theta.theta == r.theta.theta);
  CHECK(back.beta.beta == r.beta.beta);
  CHECK(back.report.e_total == r.report.e_total);
  CHECK(back.iterations == r.iterations);
  CHECK(back.seed_index == r.seed_index);
}

TEST_CASE("pose and ground truth files load with validation") {
  TempDir tmp;
  const fs::path p = tmp.path / "pose.json";
  std::ofstream(p) << R"({"theta": [0,0,0,0,0, 0,0,0,0,0, 0,0,0,0,0, 0,0,0,0,0, 0,0,0, 10.0, 60.0, 500.0]})";
  const PoseFile pf = load_pose(p);
  CHECK(pf.theta.theta[23] == 10.0);
  CHECK(pf.beta.beta.norm() == 0.0);

  const fs::path bad = tmp.path / "bad_pose.json";
  std::ofstream(bad) << R"({"theta": [1, 2, 3]})";
  CHECK_THROWS_AS(load_pose(bad), ValidationError);
}

TEST_CASE("PGM depth round trip quantizes to integer millimeters") {
  TempDir tmp;
  DepthImage img;
  img.width = 7;
  img.height = 5;
  img.depth_mm.assign(35, 0.0);
  img.at(3, 2) = 443.7;
  img.at(0, 0) = 65600.0;  // clamps to the 16-bit ceiling
  const fs::path p = tmp.path / "depth.pgm";
  save_depth_pgm(p, img);
  const DepthImage back = load_depth(p);
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.at(3, 2) == 444.0);
  CHECK(back.at(0, 0) == 65535.0);
  CHECK(back.at(1, 1) == 0.0);
}

TEST_CASE("raw float depth round trip preserves float32 values") {
  TempDir tmp;
  std::mt19937 rng(121);
  std::uniform_real_distribution<double> u(100.0, 900.0);
  DepthImage img;
  img.width = 33;
  img.height = 17;
  img.depth_mm.resize(static_cast<size_t>(33) * 17);
  for (double& d : img.depth_mm) d = static_cast<float>(u(rng));
  const fs::path p = tmp.path / "depth.rdf";
  save_depth_raw(p, img);
  const DepthImage back = load_depth(p);
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.depth_mm == img.depth_mm);
}

TEST_CASE("loaders reject truncated depth files") {
  TempDir tmp;
  DepthImage img;
  img.width = 16;
  img.height = 16;
  img.depth_mm.assign(256, 300.0);
  const fs::path p = tmp.path / "full.rdf";
  save_depth_raw(p, img);

  // Chop the payload; the loader must refuse it.
  std::ifstream in(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  in.close();
  const fs::path cut = tmp.path / "cut.rdf";
  std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(load_depth(cut), ParseError);

  const fs::path cut_pgm = tmp.path / "cut.pgm";
  save_depth_pgm(tmp.path / "full.pgm", img);
  std::ifstream in2(tmp.path / "full.pgm", std::ios::binary);
  std::string bytes2((std::istreambuf_iterator<char>(in2)), {});
  in2.close();
  std::ofstream(cut_pgm, std::ios::binary) << bytes2.substr(0, bytes2.size() - 10);
  CHECK_THROWS_AS(load_depth(cut_pgm), ParseError);
}

TEST_CASE("atomic_write leaves no temp file and replaces atomically") {
  TempDir tmp;
  const fs::path p = tmp.path / "out.txt";
  atomic_write(p, "first");
  atomic_write(p, "second");
  std::ifstream in(p);
  std::string content((std::istreambuf_iterator<char>(in)), {});
  CHECK(content == "second");
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));
}

TEST_CASE("annotations parse targets of both kinds") {
  TempDir tmp;
  const fs::path p = tmp.path / "ann.json";
  std::ofstream(p) << R"({"frames": [{
    "name": "f0",
    "crop_center": [0.0, 50.0, 480.0],
    "targets": [
      {"joint_index": 0, "kind": "3d", "value": [1.0, 2.0, 480.0]},
      {"joint_index": 8, "kind": "2d", "value": [64.0, 70.0], "visible": false}
    ]}]})";
  const auto frames = load_annotations(p);
  REQUIRE(frames.size() == 1);
  REQUIRE(frames[0].targets.size() == 2);
  CHECK(frames[0].targets[0].kind == TargetKind::Point3D);
  CHECK(frames[0].targets[1].kind == TargetKind::Point2D);
  CHECK_FALSE(frames[0].targets[1].visible);
  CHECK(frames[0].crop_center.z() == 480.0);

  const fs::path bad = tmp.path / "bad_ann.json";
  std::ofstream(bad) << R"({"frames": [{"crop_center": [0,0,480],
    "targets": [{"joint_index": 77, "kind": "3d", "value": [0,0,0]}]}]})";
  CHECK_THROWS_AS(load_annotations(bad), ValidationError);
}
