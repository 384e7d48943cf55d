// Test-only oracles: independent reference implementations used to freeze
// expected values. These deliberately avoid the library's computation paths.
#pragma once

#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "handfit/depth_encode.hpp"
#include "handfit/io.hpp"
#include "handfit/skeleton.hpp"

namespace handfit::oracle {

// Central finite differences of a scalar function.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h);

// max_i |a_i - b_i| normalized by the gradient magnitude.
double grad_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Composite Simpson quadrature of the product of two unit-peak isotropic
// Gaussians, as a literal grid sum.
double overlap_2d_quadrature(const Eigen::Vector2d& mu_a, double sa,
                             const Eigen::Vector2d& mu_b, double sb, int n = 1024);
double overlap_3d_quadrature(const Eigen::Vector3d& mu_a, double sa,
                             const Eigen::Vector3d& mu_b, double sb, int n = 256);
// Same tensor-grid Simpson sum computed through the per-axis factorization of
// the separable integrand; exact reorganization of the triple loop, usable at
// much higher n.
double overlap_3d_quadrature_factored(const Eigen::Vector3d& mu_a, double sa,
                                      const Eigen::Vector3d& mu_b, double sb, int n = 4096);

// Independent forward kinematics: walks the ancestor chain per joint and
// composes hand-written Rodrigues rotations.
JointArray fk_reference(const SkeletonTopology& topo, const PoseParams& pose,
                        const BoneVec& lengths);

// Shared fixture: the shipped default skeleton.
const SkeletonAssets& default_assets();

// Random pose clamped to the articulation limit interior, with bounded
// global rotation and a translation near (x0, y0, z0).
PoseParams random_pose(std::mt19937& rng, const SkeletonTopology& topo, double margin = 0.1,
                       const Eigen::Vector3d& around = {0.0, 60.0, 500.0});

std::vector<ImageBlob> random_image_blobs(std::mt19937& rng, int min_n = 3, int max_n = 30);

}  // namespace handfit::oracle
