// Shared pipeline fixtures for tests: render a synthetic frame, preprocess
// it, and assemble energy inputs, mirroring what the CLI does per frame.
#pragma once

#include <random>

#include "handfit/energy.hpp"
#include "handfit/io.hpp"
#include "handfit/synth.hpp"

namespace handfit::fixtures {

inline CameraIntrinsics sample_camera() { return {240.0, 240.0, 120.0, 120.0}; }

struct SynthFrame {
  RenderOutput render;
  DepthFrame frame;
  std::vector<ImageBlob> image_blobs;
  double self_sim = 0.0;
  Eigen::Vector3d crop_center = Eigen::Vector3d::Zero();
};

inline SynthFrame make_synth_frame(const SkeletonAssets& assets, const PoseParams& pose,
                                   const BoneCoeffs& coeffs, double c_mm = 20.0,
                                   const CameraIntrinsics& cam = sample_camera(),
                                   int raw_size = 240) {
  RenderSpec spec;
  spec.cam = cam;
  spec.width = raw_size;
  spec.height = raw_size;

  SynthFrame out;
  out.render = render_depth(assets.topo, assets.bone_model, pose, coeffs, assets.blobs, spec);
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const Eigen::Vector3d& j : out.render.joints) centroid += j;
  centroid /= kJointCount;
  out.crop_center = centroid;
  out.frame = preprocess(out.render.depth, cam, centroid);
  out.image_blobs = quadtree_encode(out.frame, c_mm);
  out.self_sim = image_self_similarity(out.image_blobs);
  return out;
}

inline EnergyInputs frame_inputs(const SkeletonAssets& assets, const SynthFrame& sf,
                                 const std::vector<std::pair<int, int>>& exclusions,
                                 const std::vector<JointTarget>* targets = nullptr,
                                 const EnergyWeights& weights = EnergyWeights{}) {
  EnergyInputs in;
  in.topo = &assets.topo;
  in.bone_model = &assets.bone_model;
  in.limits = &assets.limits;
  in.blobs = &assets.blobs;
  in.collision_excluded = &exclusions;
  in.image_blobs = &sf.image_blobs;
  in.image_self_sim = sf.self_sim;
  in.crop_cam = sf.frame.crop_cam;
  in.targets = targets;
  in.target_cam = sample_camera();
  in.weights = weights;
  return in;
}

// The six easy-to-annotate keypoints: wrist plus the five fingertips.
inline std::vector<JointTarget> fingertip_targets(const JointArray& joints) {
  std::vector<JointTarget> t;
  for (int j : {0, 4, 8, 12, 16, 20})
    t.push_back({j, TargetKind::Point3D, joints[j], true});
  return t;
}

// Random full-energy state kept away from the nondifferentiable boundaries
// (limit bounds, the 2*sigma_h depth cutoff and the |z| kink, the slack
// radius), for finite-difference gradient checks.
struct FdState {
  PoseParams pose;
  BoneCoeffs coeffs;
  std::vector<ImageBlob> image_blobs;
  std::vector<JointTarget> targets;
};

inline bool state_clear_of_boundaries(const SkeletonAssets& assets,
                                      const CameraIntrinsics& crop_cam, const FdState& st,
                                      double slack) {
  const JointLimitTable& limits = assets.limits;
  for (int k = 0; k < kArticDofCount; ++k) {
    if (std::abs(st.pose.theta[k] - limits.lo[k]) < 1e-3) return false;
    if (std::abs(st.pose.theta[k] - limits.hi[k]) < 1e-3) return false;
  }
  const BoneVec len = decode_bones(assets.bone_model, st.coeffs);
  const FkResult fk = forward_kinematics(assets.topo, st.pose, len);
  const auto placed = place_blobs(assets.topo, fk, assets.blobs);
  for (const PlacedBlob& pb : placed) {
    const ProjectedBlob proj = project_blob(crop_cam, pb.center, pb.sigma_mm);
    for (const ImageBlob& img : st.image_blobs) {
      const double dz = std::abs(img.z_mm - proj.z_mm);
      const double margin = 1e-3 * pb.sigma_mm;
      if (std::abs(dz - 2.0 * pb.sigma_mm) < margin) return false;  // cutoff
      if (dz < margin) return false;                                // |z| kink
    }
  }
  for (const JointTarget& t : st.targets) {
    double phi;
    if (t.kind == TargetKind::Point3D) {
      phi = (fk.joints[t.joint_index] - t.value).norm();
    } else {
      Eigen::Vector3d ray((t.value.x() - crop_cam.cx) / crop_cam.fx,
                          (t.value.y() - crop_cam.cy) / crop_cam.fy, 1.0);
      ray.normalize();
      const Eigen::Vector3d& f = fk.joints[t.joint_index];
      phi = (f - f.dot(ray) * ray).norm();
    }
    if (std::abs(phi - slack) < 0.1 || phi < 0.1) return false;
  }
  return true;
}

// Pose sampler shared by FD-state generation; articulation drawn uniformly in
// the limit interior with a margin, bounded global motion.
inline PoseParams uniform_pose(std::mt19937& rng, const SkeletonTopology& topo,
                               double margin = 0.1,
                               const Eigen::Vector3d& around = {0.0, 60.0, 500.0}) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  PoseParams pose;
  for (int k = 0; k < kArticDofCount; ++k) {
    const double lo = topo.dofs[k].limit_lo + margin;
    const double hi = topo.dofs[k].limit_hi - margin;
    pose.theta[k] = lo + (hi - lo) * u01(rng);
  }
  for (int r = 0; r < 3; ++r) pose.theta[kGlobalRotIndex + r] = -0.4 + 0.8 * u01(rng);
  pose.theta[kGlobalPosIndex + 0] = around.x() + 25.0 * (2.0 * u01(rng) - 1.0);
  pose.theta[kGlobalPosIndex + 1] = around.y() + 25.0 * (2.0 * u01(rng) - 1.0);
  pose.theta[kGlobalPosIndex + 2] = around.z() + 60.0 * (2.0 * u01(rng) - 1.0);
  return pose;
}

inline FdState random_fd_state(std::mt19937& rng, const SkeletonAssets& assets,
                               const CameraIntrinsics& crop_cam, double slack) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int attempt = 0; attempt < 200; ++attempt) {
    FdState st;
    st.pose = uniform_pose(rng, assets.topo);
    // Push a few DOF outside their limits so the limit term is active.
    for (int rep = 0; rep < 3; ++rep) {
      const int k = static_cast<int>(u01(rng) * kArticDofCount) % kArticDofCount;
      st.pose.theta[k] = u01(rng) < 0.5
                             ? assets.limits.lo[k] - 0.05 - 0.2 * u01(rng)
                             : assets.limits.hi[k] + 0.05 + 0.2 * u01(rng);
    }
    for (int i = 0; i < kShapeDofCount; ++i)
      st.coeffs.beta[i] = 0.8 * (2.0 * u01(rng) - 1.0);

    std::uniform_int_distribution<int> count(5, 25);
    std::uniform_real_distribution<double> pos(0.0, 128.0);
    std::uniform_real_distribution<double> sig(2.0, 20.0);
    st.image_blobs.resize(count(rng));
    const double z0 = st.pose.theta[kGlobalPosIndex + 2];
    for (ImageBlob& b : st.image_blobs) {
      b.mu_px = {pos(rng), pos(rng)};
      b.sigma_px = sig(rng);
      b.z_mm = z0 - 40.0 + 80.0 * u01(rng);
    }

    const BoneVec len = decode_bones(assets.bone_model, st.coeffs);
    const FkResult fk = forward_kinematics(assets.topo, st.pose, len);
    for (int j : {0, 4, 8, 16}) {
      JointTarget t;
      t.joint_index = j;
      t.kind = TargetKind::Point3D;
      Eigen::Vector3d off(u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5);
      t.value = fk.joints[j] + (10.0 + 40.0 * u01(rng)) * off.normalized();
      st.targets.push_back(t);
    }
    for (int j : {12, 20}) {
      JointTarget t;
      t.joint_index = j;
      t.kind = TargetKind::Point2D;
      const Eigen::Vector3d& p = fk.joints[j];
      t.value = {crop_cam.fx * p.x() / p.z() + crop_cam.cx + 8.0 * (u01(rng) - 0.5),
                 crop_cam.fy * p.y() / p.z() + crop_cam.cy + 8.0 * (u01(rng) - 0.5), 0.0};
      st.targets.push_back(t);
    }
    if (state_clear_of_boundaries(assets, crop_cam, st, slack)) return st;
  }
  throw std::runtime_error("could not sample a boundary-clear state");
}

}  // namespace handfit::fixtures
