#include <doctest.h>

#include <random>

#include "handfit/skeleton.hpp"
#include "oracles.hpp"

using namespace handfit;

TEST_CASE("decode_bones at beta = 0 returns the mean exactly") {
  const auto& a = oracle::default_assets();
  const BoneVec b = decode_bones(a.bone_model, BoneCoeffs{});
  for (int i = 0; i < kBoneCount; ++i) CHECK(b[i] == a.bone_model.b_avg[i]);
}

TEST_CASE("decode_bones with identity basis adds 1mm on the selected bone") {
  BoneLengthModel model;
  model.b_avg.setConstant(50.0);
  model.m_pca.setIdentity();
  for (int k : {0, 7, 19}) {
    BoneCoeffs c;
    c.beta[k] = 1.0;
    const BoneVec b = decode_bones(model, c);
    for (int i = 0; i < kBoneCount; ++i) CHECK(b[i] == doctest::Approx(i == k ? 51.0 : 50.0));
  }
}

TEST_CASE("decode_bones matches a scalar matvec oracle") {
  const auto& a = oracle::default_assets();
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    BoneCoeffs c;
    for (int i = 0; i < kShapeDofCount; ++i) c.beta[i] = u(rng);
    const BoneVec b = decode_bones(a.bone_model, c);
    for (int r = 0; r < kBoneCount; ++r) {
      double expect = a.bone_model.b_avg[r];
      for (int k = 0; k < kShapeDofCount; ++k) expect += a.bone_model.m_pca(r, k) * c.beta[k];
      CHECK(b[r] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("decode_bones is affine in beta") {
  const auto& a = oracle::default_assets();
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BoneCoeffs c1, c2, sum;
  for (int i = 0; i < kShapeDofCount; ++i) {
    c1.beta[i] = u(rng);
    c2.beta[i] = u(rng);
  }
  sum.beta = c1.beta + c2.beta;
  const BoneVec lhs = decode_bones(a.bone_model, c1) + decode_bones(a.bone_model, c2) -
                      decode_bones(a.bone_model, BoneCoeffs{});
  const BoneVec rhs = decode_bones(a.bone_model, sum);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12 * rhs.cwiseAbs().maxCoeff());
}

TEST_CASE("decode_bones rejects non-positive lengths") {
  const auto& a = oracle::default_assets();
  BoneCoeffs c;
  c.beta[0] = -1e4;
  CHECK_THROWS_AS(decode_bones(a.bone_model, c), NonPositiveBoneLength);
}

TEST_CASE("rest pose is the rest layout shifted by the translation") {
  const auto& a = oracle::default_assets();
  const BoneVec len = decode_bones(a.bone_model, BoneCoeffs{});
  PoseParams pose;
  pose.theta.segment<3>(kGlobalPosIndex) = Eigen::Vector3d(12.0, -7.0, 430.0);

  // Scalar rest layout: cumulative sums along each chain.
  JointArray rest;
  rest[0].setZero();
  for (int j : a.topo.order) {
    if (j == 0) continue;
    const int b = a.topo.bone_at_joint[j];
    rest[j] = rest[a.topo.joints[j].parent] + len[b] * a.topo.bones[b].rest_dir;
  }
  const FkResult fk = forward_kinematics(a.topo, pose, len);
  for (int j = 0; j < kJointCount; ++j) {
    const Eigen::Vector3d expect = rest[j] + pose.theta.segment<3>(kGlobalPosIndex);
    CHECK((fk.joints[j] - expect).norm() < 1e-9);
  }
}

TEST_CASE("bone lengths are reproduced by FK for random poses") {
  const auto& a = oracle::default_assets();
  std::mt19937 rng(43);
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    BoneCoeffs c;
    for (int i = 0; i < kShapeDofCount; ++i) c.beta[i] = u(rng);
    const BoneVec len = decode_bones(a.bone_model, c);
    const PoseParams pose = oracle::random_pose(rng, a.topo);
    const FkResult fk = forward_kinematics(a.topo, pose, len);
    for (int b = 0; b < kBoneCount; ++b) {
      const double d =
          (fk.joints[a.topo.bones[b].child_joint] - fk.joints[a.topo.bones[b].parent_joint])
              .norm();
      CHECK(d == doctest::Approx(len[b]).epsilon(1e-9));
    }
  }
}

TEST_CASE("translation shifts every joint by the same offset") {
  const auto& a = oracle::default_assets();
  std::mt19937 rng(44);
  const BoneVec len = decode_bones(a.bone_model, BoneCoeffs{});
  const PoseParams pose = oracle::random_pose(rng, a.topo);
  PoseParams shifted = pose;
  const Eigen::Vector3d dt(31.0, -17.0, 52.0);
  shifted.theta.segment<3>(kGlobalPosIndex) += dt;
  const FkResult f0 = forward_kinematics(a.topo, pose, len);
  const FkResult f1 = forward_kinematics(a.topo, shifted, len);
  for (int j = 0; j < kJointCount; ++j)
    CHECK((f1.joints[j] - f0.joints[j] - dt).norm() < 1e-9);
}

TEST_CASE("single-knuckle flexion rotates the descendants about the knuckle") {
  const auto& a = oracle::default_assets();
  const BoneVec len = decode_bones(a.bone_model, BoneCoeffs{});
  // index_mcp_flex is DOF 4 in the default file; flex by delta from rest.
  const int dof = 4;
  REQUIRE(a.topo.dofs[dof].name == "index_mcp_flex");
  const double delta = 0.37;
  PoseParams flexed;
  flexed.theta[dof] = delta;

  const FkResult rest = forward_kinematics(a.topo, PoseParams{}, len);
  const FkResult bent = forward_kinematics(a.topo, flexed, len);

  const int knuckle = a.topo.dofs[dof].joint;
  const Eigen::Vector3d axis = a.topo.dofs[dof].axis;
  const Eigen::Matrix3d k =
      (Eigen::Matrix3d() << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(),
       axis.x(), 0)
          .finished();
  const Eigen::Matrix3d rot =
      Eigen::Matrix3d::Identity() + std::sin(delta) * k + (1.0 - std::cos(delta)) * (k * k);
  for (int j = 0; j < kJointCount; ++j) {
    Eigen::Vector3d expect;
    if (a.topo.subtree[knuckle] & (1u << j)) {
      expect = rest.joints[knuckle] + rot * (rest.joints[j] - rest.joints[knuckle]);
    } else {
      expect = rest.joints[j];
    }
    CHECK((bent.joints[j] - expect).norm() < 1e-9);
  }
}

TEST_CASE("FK matches the path-walking reference on random configurations") {
  const auto& a = oracle::default_assets();
  std::mt19937 rng(45);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int trial = 0; trial < 25; ++trial) {
    BoneCoeffs c;
    for (int i = 0; i < kShapeDofCount; ++i) c.beta[i] = u(rng);
    const BoneVec len = decode_bones(a.bone_model, c);
    const PoseParams pose = oracle::random_pose(rng, a.topo);
    const FkResult fk = forward_kinematics(a.topo, pose, len);
    const JointArray ref = oracle::fk_reference(a.topo, pose, len);
    for (int j = 0; j < kJointCount; ++j) CHECK((fk.joints[j] - ref[j]).norm() < 1e-8);
  }
}

TEST_CASE("fk_jacobian translation block is identity for every joint") {
  const auto& a = oracle::default_assets();
  std::mt19937 rng(46);
  const PoseParams pose = oracle::random_pose(rng, a.topo);
  const FkJacobian jac = fk_jacobian(a.topo, pose, a.bone_model, BoneCoeffs{});
  for (int j = 0; j < kJointCount; ++j) {
    CHECK((jac.block<3, 3>(3 * j, kGlobalPosIndex) - Eigen::Matrix3d::Identity()).norm() ==
          0.0);
  }
}

TEST_CASE("fk_jacobian is zero across unrelated fingers") {
  const auto& a = oracle::default_assets();
  std::mt19937 rng(47);
  const PoseParams pose = oracle::random_pose(rng, a.topo);
  const FkJacobian jac = fk_jacobian(a.topo, pose, a.bone_model, BoneCoeffs{});
  // index DOFs (4..7) vs middle-finger joints (9..12) and thumb joints (1..4).
  for (int k = 4; k <= 7; ++k) {
    for (int j : {9, 10, 11, 12, 1, 2, 3, 4}) {
      CHECK(jac.block<3, 1>(3 * j, k).norm() == 0.0);
    }
  }
}

TEST_CASE("fk_jacobian matches finite differences on random configurations") {
  const auto& a = oracle::default_assets();
  std::mt19937 rng(48);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    BoneCoeffs c;
    for (int i = 0; i < kShapeDofCount; ++i) c.beta[i] = u(rng);
    const PoseParams pose = oracle::random_pose(rng, a.topo);
    const FkJacobian jac = fk_jacobian(a.topo, pose, a.bone_model, c);

    Eigen::VectorXd x(kParamCount);
    x.head<kPoseDofCount>() = pose.theta;
    x.tail<kShapeDofCount>() = c.beta;
    for (int j : {0, 4, 8, 12, 16, 20}) {  // a joint per finger plus a tip
      for (int axis = 0; axis < 3; ++axis) {
        auto f = [&](const Eigen::VectorXd& v) {
          PoseParams p;
          p.theta = v.head<kPoseDofCount>();
          BoneCoeffs b;
          b.beta = v.tail<kShapeDofCount>();
          const BoneVec len = decode_bones(a.bone_model, b);
          return forward_kinematics(a.topo, p, len).joints[j][axis];
        };
        const Eigen::VectorXd fd = oracle::fd_gradient(f, x, 1e-5);
        const Eigen::VectorXd an = jac.row(3 * j + axis).transpose();
        worst = std::max(worst, oracle::grad_rel_error(an, fd));
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("topology validation rejects broken inputs") {
  SkeletonTopology topo = oracle::default_assets().topo;
  topo.joints[5].parent = 6;  // create a cycle 5 <-> 6
  topo.joints[6].parent = 5;
  CHECK_THROWS_AS(topo.finalize(), ValidationError);
}
