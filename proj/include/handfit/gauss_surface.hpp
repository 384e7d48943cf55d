#pragma once

#include <vector>

#include <Eigen/Core>

#include "handfit/skeleton.hpp"

namespace handfit {

struct CameraIntrinsics {
  double fx = 1.0;  // px
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

// One isotropic 3D Gaussian rigidly attached to a bone, parameterized by the
// fraction t along the bone and a spatial standard deviation in mm.
struct Blob3D {
  int bone_index = 0;
  double t = 0.5;          // in [0, 1]
  double sigma_mm = 10.0;  // > 0
};

struct PlacedBlob {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // mm, camera frame
  double sigma_mm = 0.0;
  int source = -1;  // index into the Blob3D list
};

struct ProjectedBlob {
  Eigen::Vector2d mu_px = Eigen::Vector2d::Zero();
  double sigma_px = 0.0;
  double z_mm = 0.0;  // camera-facing surface depth (center z minus sigma)
  int source = -1;
};

std::vector<PlacedBlob> place_blobs(const SkeletonTopology& topo, const FkResult& fk,
                                    const std::vector<Blob3D>& blobs);

std::vector<PlacedBlob> place_blobs(const SkeletonTopology& topo, const PoseParams& pose,
                                    const BoneVec& lengths, const std::vector<Blob3D>& blobs);

// Perspective projection of an isotropic Gaussian: the center projects
// through the pinhole, the image sigma is fbar*sigma/z with fbar=(fx+fy)/2,
// and the depth is offset to the camera-facing surface z - sigma.
// Throws BehindCamera for z <= 0.
ProjectedBlob project_blob(const CameraIntrinsics& cam, const Eigen::Vector3d& center,
                           double sigma_mm);

// Analytic derivatives of one projected blob with respect to (theta, beta).
struct ProjectedBlobJacobian {
  ProjectedBlob value;
  double sigma_h_mm = 0.0;
  Eigen::Matrix<double, 2, kParamCount> d_mu;
  Eigen::Matrix<double, 1, kParamCount> d_sigma;
  Eigen::Matrix<double, 1, kParamCount> d_z;
};

std::vector<ProjectedBlobJacobian> projected_blob_jacobians(
    const SkeletonTopology& topo, const FkResult& fk, const FkJacobian& jac,
    const std::vector<Blob3D>& blobs, const CameraIntrinsics& cam);

std::vector<ProjectedBlobJacobian> projected_blob_jacobians(
    const SkeletonTopology& topo, const PoseParams& pose, const BoneLengthModel& model,
    const BoneCoeffs& coeffs, const std::vector<Blob3D>& blobs, const CameraIntrinsics& cam);

}  // namespace handfit
