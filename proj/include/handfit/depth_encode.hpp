#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "handfit/gauss_surface.hpp"

namespace handfit {

// Raw sensor grid, mm per pixel, 0 = invalid.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> depth_mm;

  double at(int x, int y) const { return depth_mm[static_cast<size_t>(y) * width + x]; }
  double& at(int x, int y) { return depth_mm[static_cast<size_t>(y) * width + x]; }
};

// Cropped, resampled depth frame. Depth stays in absolute mm; the normalized
// channel maps [center.z - side/2, center.z + side/2] to [-1, 1] and exists
// for parity with downstream consumers of the normalized crop.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<double> depth_mm;     // absolute mm, only meaningful where valid
  std::vector<double> normalized;   // [-1, 1]
  std::vector<uint8_t> valid;
  Eigen::Vector3d crop_center = Eigen::Vector3d::Zero();  // mm, re-centered
  double crop_side_mm = 300.0;
  CameraIntrinsics crop_cam;  // intrinsics of the resampled crop

  bool is_valid(int x, int y) const { return valid[static_cast<size_t>(y) * width + x] != 0; }
  double depth_at(int x, int y) const { return depth_mm[static_cast<size_t>(y) * width + x]; }
  int valid_count() const;
};

// Quadtree summary of one homogeneous-depth region.
struct ImageBlob {
  Eigen::Vector2d mu_px = Eigen::Vector2d::Zero();  // region center
  double sigma_px = 0.0;                            // half the region side
  double z_mm = 0.0;                                // mean valid depth
};

struct QuadtreeLeaf {
  int x = 0, y = 0, w = 0, h = 0;
  int valid_count = 0;
  ImageBlob blob;  // meaningful only when valid_count > 0
};

// Crop the raw image to a cube of `crop_side_mm` about `crop_center`,
// re-crop with the cube centered at the average depth of the first crop, and
// resample to out_size x out_size (nearest neighbor). Throws EmptyCrop when
// no valid pixel falls inside the cube.
DepthFrame preprocess(const DepthImage& raw, const CameraIntrinsics& cam,
                      const Eigen::Vector3d& crop_center, double crop_side_mm = 300.0,
                      int out_size = 128);

// Recursive NW,NE,SW,SE subdivision until the valid-depth range of a quadrant
// is < c_mm or the quadrant is a single pixel. Leaves tile the frame; leaves
// without valid pixels emit no blob.
std::vector<QuadtreeLeaf> quadtree_leaves(const DepthFrame& frame, double c_mm);

std::vector<ImageBlob> quadtree_encode(const DepthFrame& frame, double c_mm);

// Back-project every valid pixel of the frame into the camera frame (mm).
std::vector<Eigen::Vector3d> frame_point_cloud(const DepthFrame& frame);

}  // namespace handfit
