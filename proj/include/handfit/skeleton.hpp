#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "handfit/errors.hpp"

namespace handfit {

inline constexpr int kJointCount = 21;
inline constexpr int kBoneCount = 20;
inline constexpr int kArticDofCount = 20;
inline constexpr int kPoseDofCount = 26;  // 20 articulation + 3 rotation + 3 translation
inline constexpr int kShapeDofCount = 20;
inline constexpr int kParamCount = kPoseDofCount + kShapeDofCount;  // 46

// theta layout: [0..19] articulation angles (rad), [20..22] global rotation
// (intrinsic Z-Y-X Euler, rad), [23..25] global translation (mm).
inline constexpr int kGlobalRotIndex = 20;
inline constexpr int kGlobalPosIndex = 23;

using PoseVec = Eigen::Matrix<double, kPoseDofCount, 1>;
using ShapeVec = Eigen::Matrix<double, kShapeDofCount, 1>;
using BoneVec = Eigen::Matrix<double, kBoneCount, 1>;
using ParamVec = Eigen::Matrix<double, kParamCount, 1>;
using JointArray = std::array<Eigen::Vector3d, kJointCount>;

struct PoseParams {
  PoseVec theta = PoseVec::Zero();
};

struct BoneCoeffs {
  ShapeVec beta = ShapeVec::Zero();
};

struct JointDef {
  std::string name;
  int parent = -1;  // -1 for the wrist root
};

struct BoneDef {
  int parent_joint = -1;
  int child_joint = -1;
  Eigen::Vector3d rest_dir = Eigen::Vector3d::Zero();  // unit, rest frame
};

// One articulation DOF: a rotation about `axis` applied at `joint`. DOFs of a
// 2-DOF joint compose in theta-index order.
struct DofDef {
  std::string name;
  int joint = -1;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  double limit_lo = 0.0;  // rad
  double limit_hi = 0.0;
};

struct JointLimitTable {
  Eigen::Array<double, kArticDofCount, 1> lo;
  Eigen::Array<double, kArticDofCount, 1> hi;
};

struct SkeletonTopology {
  std::vector<JointDef> joints;  // 21, index 0 = wrist
  std::vector<BoneDef> bones;    // 20
  std::vector<DofDef> dofs;      // 20, index = theta index

  // Derived by finalize():
  std::vector<int> bone_at_joint;             // joint -> incoming bone, -1 for root
  std::vector<std::vector<int>> dofs_of_joint;
  std::vector<std::vector<int>> chain_bones;  // bones on the root->joint path
  std::vector<uint32_t> subtree;              // bit q set iff q is in subtree(j)
  std::vector<int> order;                     // parents-first traversal

  // Validates all topology invariants and builds the derived tables.
  // Throws ValidationError naming the violated invariant.
  void finalize();

  JointLimitTable limit_table() const;
};

// Affine bone length space b = b_avg + m_pca * beta. Columns of m_pca are
// basis vectors pre-scaled by their standard deviation, so beta is expected
// to be standard-normal sized.
struct BoneLengthModel {
  BoneVec b_avg = BoneVec::Zero();
  Eigen::Matrix<double, kBoneCount, kBoneCount> m_pca =
      Eigen::Matrix<double, kBoneCount, kBoneCount>::Identity();
};

// Throws NonPositiveBoneLength if any decoded length is <= 0.
BoneVec decode_bones(const BoneLengthModel& model, const BoneCoeffs& coeffs);

// Joint positions plus the world-frame quantities the analytic Jacobian and
// the blob placement need.
struct FkResult {
  JointArray joints;                                      // mm, camera frame
  std::array<Eigen::Vector3d, kBoneCount> bone_dir;       // world unit directions
  std::array<Eigen::Vector3d, kArticDofCount> dof_axis;   // world rotation axes
  std::array<Eigen::Vector3d, 3> rot_axis;                // world axes of the Euler DOF
};

FkResult forward_kinematics(const SkeletonTopology& topo, const PoseParams& pose,
                            const BoneVec& lengths);

// d(joint positions)/d(theta, beta); rows are joint-major x,y,z.
using FkJacobian = Eigen::Matrix<double, 3 * kJointCount, kParamCount>;

FkJacobian fk_jacobian(const SkeletonTopology& topo, const FkResult& fk,
                       const BoneLengthModel& model);

FkJacobian fk_jacobian(const SkeletonTopology& topo, const PoseParams& pose,
                       const BoneLengthModel& model, const BoneCoeffs& coeffs);

}  // namespace handfit
