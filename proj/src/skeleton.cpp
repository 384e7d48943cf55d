#include "handfit/skeleton.hpp"

#include <Eigen/Geometry>

namespace handfit {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

void SkeletonTopology::finalize() {
  require(static_cast<int>(joints.size()) == kJointCount,
          "skeleton must define exactly 21 joints");
  require(static_cast<int>(bones.size()) == kBoneCount,
          "skeleton must define exactly 20 bones");
  require(static_cast<int>(dofs.size()) == kArticDofCount,
          "skeleton must define exactly 20 articulation DOF");
  require(joints[0].parent == -1, "joint 0 must be the wrist root");

  bone_at_joint.assign(kJointCount, -1);
  for (int b = 0; b < kBoneCount; ++b) {
    const BoneDef& bone = bones[b];
    require(bone.child_joint > 0 && bone.child_joint < kJointCount,
            "bone child_joint out of range");
    require(bone.parent_joint >= 0 && bone.parent_joint < kJointCount,
            "bone parent_joint out of range");
    require(joints[bone.child_joint].parent == bone.parent_joint,
            "bone endpoints must match the joint parent table");
    require(bone_at_joint[bone.child_joint] == -1,
            "every joint may have at most one incoming bone");
    require(std::abs(bone.rest_dir.norm() - 1.0) < 1e-6,
            "bone rest_dir must be a unit vector");
    bone_at_joint[bone.child_joint] = b;
  }
  for (int j = 1; j < kJointCount; ++j) {
    require(joints[j].parent >= 0 && joints[j].parent < kJointCount,
            "non-root joint must have a parent");
    require(bone_at_joint[j] != -1, "every non-root joint needs an incoming bone");
  }

  // Parents-first order; also proves the parent graph is a tree rooted at 0.
  order.clear();
  order.reserve(kJointCount);
  std::vector<char> placed(kJointCount, 0);
  order.push_back(0);
  placed[0] = 1;
  while (static_cast<int>(order.size()) < kJointCount) {
    bool advanced = false;
    for (int j = 1; j < kJointCount; ++j) {
      if (!placed[j] && placed[joints[j].parent]) {
        order.push_back(j);
        placed[j] = 1;
        advanced = true;
      }
    }
    require(advanced, "joint parent graph must be a tree rooted at the wrist");
  }

  dofs_of_joint.assign(kJointCount, {});
  for (int k = 0; k < kArticDofCount; ++k) {
    const DofDef& d = dofs[k];
    require(d.joint >= 0 && d.joint < kJointCount, "DOF joint out of range");
    require(std::abs(d.axis.norm() - 1.0) < 1e-6, "DOF axis must be a unit vector");
    require(d.limit_lo < d.limit_hi, "DOF limits must satisfy lo < hi");
    dofs_of_joint[d.joint].push_back(k);
  }

  subtree.assign(kJointCount, 0);
  chain_bones.assign(kJointCount, {});
  // Reverse order: children before parents, so subtree masks accumulate up.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int j = *it;
    subtree[j] |= 1u << j;
    if (j != 0) subtree[joints[j].parent] |= subtree[j];
  }
  for (int j : order) {
    if (j == 0) continue;
    chain_bones[j] = chain_bones[joints[j].parent];
    chain_bones[j].push_back(bone_at_joint[j]);
  }
}

JointLimitTable SkeletonTopology::limit_table() const {
  JointLimitTable t;
  for (int k = 0; k < kArticDofCount; ++k) {
    t.lo[k] = dofs[k].limit_lo;
    t.hi[k] = dofs[k].limit_hi;
  }
  return t;
}

BoneVec decode_bones(const BoneLengthModel& model, const BoneCoeffs& coeffs) {
  if (!coeffs.beta.allFinite()) throw ValidationError("beta must be finite");
  BoneVec b = model.b_avg + model.m_pca * coeffs.beta;
  for (int i = 0; i < kBoneCount; ++i) {
    if (!(b[i] > 0.0)) {
      throw NonPositiveBoneLength("decoded length of bone " + std::to_string(i) +
                                  " is " + std::to_string(b[i]) + " mm");
    }
  }
  return b;
}

FkResult forward_kinematics(const SkeletonTopology& topo, const PoseParams& pose,
                            const BoneVec& lengths) {
  if (!pose.theta.allFinite()) throw ValidationError("theta must be finite");
  if ((lengths.array() <= 0.0).any())
    throw ValidationError("forward kinematics requires positive bone lengths");

  const double az = pose.theta[kGlobalRotIndex];
  const double ay = pose.theta[kGlobalRotIndex + 1];
  const double ax = pose.theta[kGlobalRotIndex + 2];
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(az, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Matrix3d ry = Eigen::AngleAxisd(ay, Eigen::Vector3d::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(ax, Eigen::Vector3d::UnitX()).toRotationMatrix();

  FkResult fk;
  fk.rot_axis[0] = Eigen::Vector3d::UnitZ();
  fk.rot_axis[1] = rz * Eigen::Vector3d::UnitY();
  fk.rot_axis[2] = rz * ry * Eigen::Vector3d::UnitX();
  fk.joints[0] = pose.theta.segment<3>(kGlobalPosIndex);

  // frame[j]: rotation applied to bones leaving joint j (global rotation plus
  // every articulation on the chain including j's own DOFs).
  std::array<Eigen::Matrix3d, kJointCount> frame;
  for (int j : topo.order) {
    Eigen::Matrix3d a;
    if (j == 0) {
      a = rz * ry * rx;
    } else {
      const int parent = topo.joints[j].parent;
      const int b = topo.bone_at_joint[j];
      fk.bone_dir[b] = frame[parent] * topo.bones[b].rest_dir;
      fk.joints[j] = fk.joints[parent] + lengths[b] * fk.bone_dir[b];
      a = frame[parent];
    }
    for (int k : topo.dofs_of_joint[j]) {
      const DofDef& d = topo.dofs[k];
      fk.dof_axis[k] = a * d.axis;
      a = a * Eigen::AngleAxisd(pose.theta[k], d.axis).toRotationMatrix();
    }
    frame[j] = a;
  }
  return fk;
}

FkJacobian fk_jacobian(const SkeletonTopology& topo, const FkResult& fk,
                       const BoneLengthModel& model) {
  FkJacobian jac = FkJacobian::Zero();
  for (int q = 0; q < kJointCount; ++q) {
    const int row = 3 * q;
    // Articulation: revolute DOF k moves q iff q lies in the subtree of the
    // DOF's joint; the derivative is axis x (p_q - pivot).
    for (int k = 0; k < kArticDofCount; ++k) {
      const int j = topo.dofs[k].joint;
      if (topo.subtree[j] & (1u << q)) {
        jac.block<3, 1>(row, k) = fk.dof_axis[k].cross(fk.joints[q] - fk.joints[j]);
      }
    }
    // Global rotation pivots about the wrist.
    for (int r = 0; r < 3; ++r) {
      jac.block<3, 1>(row, kGlobalRotIndex + r) =
          fk.rot_axis[r].cross(fk.joints[q] - fk.joints[0]);
    }
    jac.block<3, 3>(row, kGlobalPosIndex).setIdentity();
    // Shape: d p_q / d len_b is the world direction of bone b for every bone
    // on the root->q chain; chain through m_pca for beta.
    for (int b : topo.chain_bones[q]) {
      jac.block<3, kShapeDofCount>(row, kPoseDofCount) +=
          fk.bone_dir[b] * model.m_pca.row(b);
    }
  }
  return jac;
}

FkJacobian fk_jacobian(const SkeletonTopology& topo, const PoseParams& pose,
                       const BoneLengthModel& model, const BoneCoeffs& coeffs) {
  const BoneVec lengths = decode_bones(model, coeffs);
  const FkResult fk = forward_kinematics(topo, pose, lengths);
  return fk_jacobian(topo, fk, model);
}

}  // namespace handfit
