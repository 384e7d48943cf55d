#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "handfit/depth_encode.hpp"
#include "handfit/gauss_surface.hpp"
#include "handfit/skeleton.hpp"

namespace handfit {

struct RenderSpec {
  CameraIntrinsics cam;
  int width = 128;
  int height = 128;
  double iso_sigma = 1.0;       // sphere radius in units of blob sigma
  double noise_sigma_mm = 0.0;  // optional additive depth noise
  uint32_t noise_seed = 0;
};

struct RenderOutput {
  DepthImage depth;       // mm, 0 where no blob is hit
  JointArray joints;      // ground-truth keypoints
  PoseParams theta;
  BoneCoeffs beta;
  int coverage = 0;       // number of valid pixels
};

// Ray-cast the blob model: per pixel, the nearest intersection of the pixel
// ray with any blob's iso-sphere; depth is the z of the hit point. Throws
// BehindCamera if any blob center has z <= 0.
RenderOutput render_depth(const SkeletonTopology& topo, const BoneLengthModel& model,
                          const PoseParams& pose, const BoneCoeffs& coeffs,
                          const std::vector<Blob3D>& blobs, const RenderSpec& spec);

// Plausible articulation for synthetic data: one curl factor per finger with
// fixed per-joint ratios plus small jitter, bounded abduction and global
// rotation, translation near (0, 60, 500) mm. Deterministic given the
// generator state.
PoseParams sample_natural_pose(const SkeletonTopology& topo, std::mt19937& rng);

}  // namespace handfit
