#include "handfit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace handfit {

RenderOutput render_depth(const SkeletonTopology& topo, const BoneLengthModel& model,
                          const PoseParams& pose, const BoneCoeffs& coeffs,
                          const std::vector<Blob3D>& blobs, const RenderSpec& spec) {
  if (spec.width < 1 || spec.height < 1)
    throw ValidationError("render target must be at least 1x1");
  const BoneVec lengths = decode_bones(model, coeffs);
  const FkResult fk = forward_kinematics(topo, pose, lengths);
  const std::vector<PlacedBlob> placed = place_blobs(topo, fk, blobs);
  for (const PlacedBlob& b : placed) {
    if (!(b.center.z() > 0.0))
      throw BehindCamera("blob center behind the camera during rendering");
  }

  RenderOutput out;
  out.depth.width = spec.width;
  out.depth.height = spec.height;
  out.depth.depth_mm.assign(static_cast<size_t>(spec.width) * spec.height, 0.0);
  out.joints = fk.joints;
  out.theta = pose;
  out.beta = coeffs;

  std::mt19937 rng(spec.noise_seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma_mm);

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      // Unit ray through the pixel center.
      Eigen::Vector3d dir((x + 0.5 - spec.cam.cx) / spec.cam.fx,
                          (y + 0.5 - spec.cam.cy) / spec.cam.fy, 1.0);
      dir.normalize();
      double best = std::numeric_limits<double>::infinity();
      for (const PlacedBlob& b : placed) {
        const double radius = spec.iso_sigma * b.sigma_mm;
        const double proj = dir.dot(b.center);
        const double disc = proj * proj - b.center.squaredNorm() + radius * radius;
        if (disc < 0.0) continue;
        const double root = std::sqrt(disc);
        double lambda = proj - root;           // front surface
        if (lambda <= 0.0) lambda = proj + root;  // camera inside the sphere
        if (lambda <= 0.0) continue;
        best = std::min(best, lambda);
      }
      if (std::isfinite(best)) {
        double depth = best * dir.z();
        if (spec.noise_sigma_mm > 0.0) depth += noise(rng);
        if (depth > 0.0) {
          out.depth.at(x, y) = depth;
          ++out.coverage;
        }
      }
    }
  }
  return out;
}

PoseParams sample_natural_pose(const SkeletonTopology& topo, std::mt19937& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PoseParams p;
  double curl[5];
  for (double& c : curl) c = 0.8 * u01(rng);
  for (int k = 0; k < kArticDofCount; ++k) {
    const std::string& name = topo.dofs[k].name;
    const int finger = k / 4;
    double v;
    if (name.find("abduct") != std::string::npos) {
      v = 0.15 * u(rng);
    } else if (name.find("cmc") != std::string::npos ||
               name.find("mcp") != std::string::npos) {
      v = curl[finger] + 0.1 * u(rng);
    } else if (name.find("pip") != std::string::npos) {
      v = 1.1 * curl[finger] + 0.1 * u(rng);
    } else {  // dip and thumb ip
      v = 0.7 * curl[finger] + 0.1 * u(rng);
    }
    p.theta[k] = std::clamp(v, topo.dofs[k].limit_lo + 0.05, topo.dofs[k].limit_hi - 0.05);
  }
  for (int r = 0; r < 3; ++r) p.theta[kGlobalRotIndex + r] = 0.35 * u(rng);
  p.theta[kGlobalPosIndex + 0] = 25.0 * u(rng);
  p.theta[kGlobalPosIndex + 1] = 60.0 + 25.0 * u(rng);
  p.theta[kGlobalPosIndex + 2] = 500.0 + 60.0 * u(rng);
  return p;
}

}  // namespace handfit
