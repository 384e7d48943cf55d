#include "handfit/gauss_surface.hpp"

namespace handfit {

std::vector<PlacedBlob> place_blobs(const SkeletonTopology& topo, const FkResult& fk,
                                    const std::vector<Blob3D>& blobs) {
  std::vector<PlacedBlob> out;
  out.reserve(blobs.size());
  for (size_t i = 0; i < blobs.size(); ++i) {
    const Blob3D& blob = blobs[i];
    if (blob.bone_index < 0 || blob.bone_index >= kBoneCount)
      throw ValidationError("blob bone_index out of range");
    if (!(blob.sigma_mm > 0.0)) throw ValidationError("blob sigma_mm must be positive");
    if (blob.t < 0.0 || blob.t > 1.0) throw ValidationError("blob t must be in [0,1]");
    const BoneDef& bone = topo.bones[blob.bone_index];
    const Eigen::Vector3d& p = fk.joints[bone.parent_joint];
    const Eigen::Vector3d& c = fk.joints[bone.child_joint];
    out.push_back({p + blob.t * (c - p), blob.sigma_mm, static_cast<int>(i)});
  }
  return out;
}

std::vector<PlacedBlob> place_blobs(const SkeletonTopology& topo, const PoseParams& pose,
                                    const BoneVec& lengths, const std::vector<Blob3D>& blobs) {
  return place_blobs(topo, forward_kinematics(topo, pose, lengths), blobs);
}

ProjectedBlob project_blob(const CameraIntrinsics& cam, const Eigen::Vector3d& center,
                           double sigma_mm) {
  if (!(center.z() > 0.0))
    throw BehindCamera("blob center at z = " + std::to_string(center.z()) + " mm");
  const double fbar = 0.5 * (cam.fx + cam.fy);
  ProjectedBlob p;
  p.mu_px.x() = cam.fx * center.x() / center.z() + cam.cx;
  p.mu_px.y() = cam.fy * center.y() / center.z() + cam.cy;
  p.sigma_px = fbar * sigma_mm / center.z();
  p.z_mm = center.z() - sigma_mm;
  return p;
}

std::vector<ProjectedBlobJacobian> projected_blob_jacobians(
    const SkeletonTopology& topo, const FkResult& fk, const FkJacobian& jac,
    const std::vector<Blob3D>& blobs, const CameraIntrinsics& cam) {
  const double fbar = 0.5 * (cam.fx + cam.fy);
  std::vector<ProjectedBlobJacobian> out;
  out.reserve(blobs.size());
  const std::vector<PlacedBlob> placed = place_blobs(topo, fk, blobs);
  for (size_t i = 0; i < blobs.size(); ++i) {
    const Blob3D& blob = blobs[i];
    const BoneDef& bone = topo.bones[blob.bone_index];

    // Center Jacobian: affine blend of the two joint blocks.
    Eigen::Matrix<double, 3, kParamCount> d_center =
        (1.0 - blob.t) * jac.block<3, kParamCount>(3 * bone.parent_joint, 0) +
        blob.t * jac.block<3, kParamCount>(3 * bone.child_joint, 0);

    const Eigen::Vector3d& c = placed[i].center;
    ProjectedBlobJacobian pj;
    pj.value = project_blob(cam, c, blob.sigma_mm);
    pj.value.source = static_cast<int>(i);
    pj.sigma_h_mm = blob.sigma_mm;

    const double inv_z = 1.0 / c.z();
    pj.d_mu = Eigen::Matrix<double, 2, kParamCount>::Zero();
    pj.d_mu.row(0) = cam.fx * inv_z * d_center.row(0) -
                     (cam.fx * c.x() * inv_z * inv_z) * d_center.row(2);
    pj.d_mu.row(1) = cam.fy * inv_z * d_center.row(1) -
                     (cam.fy * c.y() * inv_z * inv_z) * d_center.row(2);
    pj.d_sigma = -(fbar * blob.sigma_mm * inv_z * inv_z) * d_center.row(2);
    pj.d_z = d_center.row(2);
    out.push_back(std::move(pj));
  }
  return out;
}

std::vector<ProjectedBlobJacobian> projected_blob_jacobians(
    const SkeletonTopology& topo, const PoseParams& pose, const BoneLengthModel& model,
    const BoneCoeffs& coeffs, const std::vector<Blob3D>& blobs, const CameraIntrinsics& cam) {
  const BoneVec lengths = decode_bones(model, coeffs);
  const FkResult fk = forward_kinematics(topo, pose, lengths);
  const FkJacobian jac = fk_jacobian(topo, fk, model);
  return projected_blob_jacobians(topo, fk, jac, blobs, cam);
}

}  // namespace handfit
