#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "handfit/depth_encode.hpp"
#include "handfit/gauss_surface.hpp"
#include "handfit/skeleton.hpp"

namespace handfit {

struct EnergyWeights {
  double lambda_dissim = 1.0;
  double lambda_collision = 1e-5;
  double lambda_bone = 1e-2;
  double lambda_lim = 1.0;
  double lambda_joint = 1e-4;  // per mm^2
  double slack_mm = 0.0;
};

enum class TargetKind { Point2D, Point3D };

// Supervision for one keypoint. 3D targets live in camera-frame mm; 2D
// targets are annotated pixels and constrain the joint to the back-projected
// ray (they need camera intrinsics at evaluation time).
struct JointTarget {
  int joint_index = 0;
  TargetKind kind = TargetKind::Point3D;
  Eigen::Vector3d value = Eigen::Vector3d::Zero();  // 2D targets use x,y only
  bool visible = true;
};

struct EnergyReport {
  double e_total = 0.0;
  double e_dissim = 0.0;
  double e_collision = 0.0;
  double e_bone = 0.0;
  double e_lim = 0.0;
  double e_joint = 0.0;
  ParamVec grad = ParamVec::Zero();
};

// A projected model Gaussian paired with the sigma of its unprojected source,
// which drives the depth weighting.
struct ModelBlob2D {
  Eigen::Vector2d mu_px = Eigen::Vector2d::Zero();
  double sigma_px = 0.0;
  double z_mm = 0.0;
  double sigma_h_mm = 0.0;
};

// Integral over R^2 of the product of two unit-peak isotropic Gaussians:
// 2*pi*sa^2*sb^2/(sa^2+sb^2) * exp(-d^2 / (2*(sa^2+sb^2))).
double overlap_2d(const Eigen::Vector2d& mu_a, double sigma_a,
                  const Eigen::Vector2d& mu_b, double sigma_b);

// Same for R^3: (2*pi*sa^2*sb^2/(sa^2+sb^2))^(3/2) * exp(-d^2/(2*(sa^2+sb^2))).
double overlap_3d(const Eigen::Vector3d& mu_a, double sigma_a,
                  const Eigen::Vector3d& mu_b, double sigma_b);

// Linear depth falloff: 1 - |zi-zp| / (2*sigma_h), clamped to 0 at and beyond
// the 2*sigma_h cutoff.
double depth_weight(double z_i, double z_p, double sigma_h);

// Self-similarity of the image blobs (the normalizer of the similarity
// score, all ordered pairs including i == k). Computed once per frame by
// callers that evaluate the energy repeatedly.
double image_self_similarity(const std::vector<ImageBlob>& image_blobs);

// E_dissim = -S_sim. Throws EmptyImage when there are no image blobs.
double dissimilarity(const std::vector<ImageBlob>& image_blobs,
                     const std::vector<ModelBlob2D>& model_blobs);

// Pairs of blob indices excluded from the collision sum: blobs on the same
// bone or on bones sharing a joint.
std::vector<std::pair<int, int>> collision_exclusions(const SkeletonTopology& topo,
                                                      const std::vector<Blob3D>& blobs);

// Sum of 3D overlap integrals over non-excluded unordered pairs.
double collision(const std::vector<PlacedBlob>& placed,
                 const std::vector<std::pair<int, int>>& excluded);

double bone_prior(const BoneCoeffs& coeffs);

// Quadratic penalty outside [lo, hi] per articulation DOF; global DOF free.
double joint_limits(const PoseParams& pose, const JointLimitTable& limits);

// Slack-radius keypoint loss. 3D targets use the l2 distance, 2D targets the
// distance to the back-projected ray. Throws MissingIntrinsics if a 2D
// target is evaluated without a camera.
double joint_supervision(const JointArray& joints, const std::vector<JointTarget>& targets,
                         const std::optional<CameraIntrinsics>& cam, double slack_mm);

// Everything total_energy needs besides (theta, beta). Image-dependent
// fields may be empty when the corresponding weight is zero.
struct EnergyInputs {
  const SkeletonTopology* topo = nullptr;
  const BoneLengthModel* bone_model = nullptr;
  const JointLimitTable* limits = nullptr;
  const std::vector<Blob3D>* blobs = nullptr;
  const std::vector<std::pair<int, int>>* collision_excluded = nullptr;  // optional cache
  const std::vector<ImageBlob>* image_blobs = nullptr;
  double image_self_sim = -1.0;  // < 0 -> computed on the fly
  CameraIntrinsics crop_cam;     // projects model blobs into the frame
  const std::vector<JointTarget>* targets = nullptr;
  std::optional<CameraIntrinsics> target_cam;  // for 2D targets
  EnergyWeights weights;
};

// Weighted total per-term energy and, when requested, the full analytic
// gradient with respect to (theta, beta). Terms with zero weight are
// skipped and report 0. e_total accumulates terms in the fixed order
// dissim, collision, bone, lim, joint.
EnergyReport total_energy(const EnergyInputs& in, const PoseParams& pose,
                          const BoneCoeffs& coeffs, bool with_grad = true);

}  // namespace handfit
