#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "handfit/depth_encode.hpp"
#include "handfit/energy.hpp"
#include "handfit/fitter.hpp"
#include "handfit/skeleton.hpp"

namespace handfit {

// Fully loaded skeleton definition file: topology, shape space, limits, and
// the blob layout.
struct SkeletonAssets {
  SkeletonTopology topo;
  BoneLengthModel bone_model;
  JointLimitTable limits;
  std::vector<Blob3D> blobs;
};

struct CameraFile {
  CameraIntrinsics cam;
  int width = 0;   // optional in the file, 0 when absent
  int height = 0;
};

struct FrameAnnotation {
  std::string name;
  Eigen::Vector3d crop_center = Eigen::Vector3d::Zero();
  std::vector<JointTarget> targets;
};

struct RunConfig {
  EnergyWeights weights;
  FitConfig fit;
  double quadtree_c_mm = 20.0;
  double crop_side_mm = 300.0;
  int image_size = 128;
};

struct PoseFile {
  PoseParams theta;
  BoneCoeffs beta;
};

struct GroundTruth {
  JointArray joints;
  PoseParams theta;
  BoneCoeffs beta;
};

// Loaders validate every module invariant before returning and throw
// ParseError (malformed file) or ValidationError (invariant violation).
SkeletonAssets load_skeleton(const std::filesystem::path& path);
CameraFile load_camera(const std::filesystem::path& path);
std::vector<FrameAnnotation> load_annotations(const std::filesystem::path& path);
RunConfig load_config(const std::filesystem::path& path);
PoseFile load_pose(const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);
FitResult load_fit_result(const std::filesystem::path& path);

void save_fit_result(const std::filesystem::path& path, const FitResult& result,
                     const JointArray& joints);
void save_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);

// Depth images: 16-bit PGM (P5, maxval 65535, big-endian samples, value =
// integer mm, 0 = invalid) or raw float ("RDF1" magic, little-endian uint32
// width and height, float32 mm row-major, 0 = invalid). load_depth picks the
// format from the file content.
DepthImage load_depth(const std::filesystem::path& path);
void save_depth_pgm(const std::filesystem::path& path, const DepthImage& img);
void save_depth_raw(const std::filesystem::path& path, const DepthImage& img);

// Write-temp-then-rename; partial files never appear under the final name.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

}  // namespace handfit
