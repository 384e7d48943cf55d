#include "handfit/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace handfit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Pair terms whose exponent falls below this contribute ~1e-18 of their peak
// and are skipped in both the value and the gradient.
constexpr double kExpCutoff = -40.0;

}  // namespace

double overlap_2d(const Eigen::Vector2d& mu_a, double sigma_a,
                  const Eigen::Vector2d& mu_b, double sigma_b) {
  const double sa2 = sigma_a * sigma_a;
  const double sb2 = sigma_b * sigma_b;
  const double s2 = sa2 + sb2;
  const double d2 = (mu_a - mu_b).squaredNorm();
  const double amp = kTwoPi * sa2 * sb2 / s2;
  return amp * std::exp(-d2 / (2.0 * s2));
}

double overlap_3d(const Eigen::Vector3d& mu_a, double sigma_a,
                  const Eigen::Vector3d& mu_b, double sigma_b) {
  const double s2 = sigma_a * sigma_a + sigma_b * sigma_b;
  const double d2 = (mu_a - mu_b).squaredNorm();
  const double amp = kTwoPi * sigma_a * sigma_a * sigma_b * sigma_b / s2;
  return amp * std::sqrt(amp) * std::exp(-d2 / (2.0 * s2));
}

double depth_weight(double z_i, double z_p, double sigma_h) {
  const double dz = std::abs(z_i - z_p);
  if (dz >= 2.0 * sigma_h) return 0.0;
  return 1.0 - dz / (2.0 * sigma_h);
}

double image_self_similarity(const std::vector<ImageBlob>& image_blobs) {
  double denom = 0.0;
  for (const ImageBlob& a : image_blobs)
    for (const ImageBlob& b : image_blobs)
      denom += overlap_2d(a.mu_px, a.sigma_px, b.mu_px, b.sigma_px);
  return denom;
}

double dissimilarity(const std::vector<ImageBlob>& image_blobs,
                     const std::vector<ModelBlob2D>& model_blobs) {
  if (image_blobs.empty()) throw EmptyImage("dissimilarity needs at least one image blob");
  const double denom = image_self_similarity(image_blobs);
  double num = 0.0;
  for (const ImageBlob& img : image_blobs) {
    for (const ModelBlob2D& mb : model_blobs) {
      const double w = depth_weight(img.z_mm, mb.z_mm, mb.sigma_h_mm);
      if (w == 0.0) continue;
      num += w * overlap_2d(img.mu_px, img.sigma_px, mb.mu_px, mb.sigma_px);
    }
  }
  return -num / denom;
}

std::vector<std::pair<int, int>> collision_exclusions(const SkeletonTopology& topo,
                                                      const std::vector<Blob3D>& blobs) {
  auto bones_adjacent = [&](int a, int b) {
    const BoneDef& ba = topo.bones[a];
    const BoneDef& bb = topo.bones[b];
    return ba.parent_joint == bb.parent_joint || ba.parent_joint == bb.child_joint ||
           ba.child_joint == bb.parent_joint || ba.child_joint == bb.child_joint;
  };
  std::vector<std::pair<int, int>> excluded;
  const int n = static_cast<int>(blobs.size());
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const int bj = blobs[j].bone_index;
      const int bk = blobs[k].bone_index;
      if (bj == bk || bones_adjacent(bj, bk)) excluded.emplace_back(j, k);
    }
  }
  return excluded;
}

double collision(const std::vector<PlacedBlob>& placed,
                 const std::vector<std::pair<int, int>>& excluded) {
  const int n = static_cast<int>(placed.size());
  std::vector<char> skip(static_cast<size_t>(n) * n, 0);
  for (const auto& [j, k] : excluded) {
    skip[static_cast<size_t>(j) * n + k] = 1;
    skip[static_cast<size_t>(k) * n + j] = 1;
  }
  double e = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      if (skip[static_cast<size_t>(j) * n + k]) continue;
      e += overlap_3d(placed[j].center, placed[j].sigma_mm, placed[k].center,
                      placed[k].sigma_mm);
    }
  }
  return e;
}

double bone_prior(const BoneCoeffs& coeffs) { return coeffs.beta.squaredNorm(); }

double joint_limits(const PoseParams& pose, const JointLimitTable& limits) {
  double e = 0.0;
  for (int k = 0; k < kArticDofCount; ++k) {
    const double t = pose.theta[k];
    if (t < limits.lo[k]) {
      const double d = limits.lo[k] - t;
      e += d * d;
    } else if (t > limits.hi[k]) {
      const double d = t - limits.hi[k];
      e += d * d;
    }
  }
  return e;
}

namespace {

Eigen::Vector3d target_ray(const CameraIntrinsics& cam, const Eigen::Vector2d& px) {
  Eigen::Vector3d d((px.x() - cam.cx) / cam.fx, (px.y() - cam.cy) / cam.fy, 1.0);
  return d.normalized();
}

// Distance Phi for one target plus its derivative direction w.r.t. the joint
// position (d Phi / d F = dir).
struct TargetDistance {
  double phi = 0.0;
  Eigen::Vector3d dir = Eigen::Vector3d::Zero();
};

TargetDistance target_distance(const Eigen::Vector3d& joint, const JointTarget& t,
                               const std::optional<CameraIntrinsics>& cam) {
  TargetDistance out;
  if (t.kind == TargetKind::Point3D) {
    const Eigen::Vector3d v = joint - t.value;
    out.phi = v.norm();
    if (out.phi > 0.0) out.dir = v / out.phi;
  } else {
    if (!cam) throw MissingIntrinsics("2D joint target requires camera intrinsics");
    const Eigen::Vector3d ray = target_ray(*cam, t.value.head<2>());
    const Eigen::Vector3d v = joint - joint.dot(ray) * ray;  // residual off the ray
    out.phi = v.norm();
    if (out.phi > 0.0) out.dir = v / out.phi;  // v is already orthogonal to the ray
  }
  return out;
}

}  // namespace

double joint_supervision(const JointArray& joints, const std::vector<JointTarget>& targets,
                         const std::optional<CameraIntrinsics>& cam, double slack_mm) {
  double e = 0.0;
  for (const JointTarget& t : targets) {
    if (!t.visible) continue;
    if (t.joint_index < 0 || t.joint_index >= kJointCount)
      throw ValidationError("joint target index out of range");
    const TargetDistance d = target_distance(joints[t.joint_index], t, cam);
    if (d.phi > slack_mm) {
      const double over = d.phi - slack_mm;
      e += over * over;
    }
  }
  return e;
}

EnergyReport total_energy(const EnergyInputs& in, const PoseParams& pose,
                          const BoneCoeffs& coeffs, bool with_grad) {
  if (in.topo == nullptr || in.bone_model == nullptr)
    throw ValidationError("total_energy requires a skeleton and a bone model");
  const EnergyWeights& w = in.weights;
  EnergyReport rep;

  const bool needs_fk = w.lambda_dissim > 0.0 || w.lambda_collision > 0.0 || w.lambda_joint > 0.0;
  BoneVec lengths;
  FkResult fk;
  FkJacobian jac;
  if (needs_fk) {
    lengths = decode_bones(*in.bone_model, coeffs);
    fk = forward_kinematics(*in.topo, pose, lengths);
    if (with_grad) jac = fk_jacobian(*in.topo, fk, *in.bone_model);
  }

  // --- dissimilarity ---------------------------------------------------
  if (w.lambda_dissim > 0.0) {
    if (in.blobs == nullptr || in.image_blobs == nullptr)
      throw ValidationError("dissimilarity weight is active but blob inputs are missing");
    if (in.image_blobs->empty())
      throw EmptyImage("dissimilarity needs at least one image blob");
    const double denom =
        in.image_self_sim >= 0.0 ? in.image_self_sim : image_self_similarity(*in.image_blobs);

    // The value path mirrors the gradient path term by term so that energies
    // from the two are bit-identical.
    double num = 0.0;
    ParamVec g = ParamVec::Zero();
    std::vector<ProjectedBlobJacobian> projected;
    std::vector<ModelBlob2D> flat;
    if (with_grad) {
      projected = projected_blob_jacobians(*in.topo, fk, jac, *in.blobs, in.crop_cam);
    } else {
      const auto placed = place_blobs(*in.topo, fk, *in.blobs);
      flat.reserve(placed.size());
      for (const PlacedBlob& pb : placed) {
        const ProjectedBlob proj = project_blob(in.crop_cam, pb.center, pb.sigma_mm);
        flat.push_back({proj.mu_px, proj.sigma_px, proj.z_mm, pb.sigma_mm});
      }
    }
    const size_t n_model = with_grad ? projected.size() : flat.size();
    for (const ImageBlob& img : *in.image_blobs) {
      for (size_t p = 0; p < n_model; ++p) {
        const Eigen::Vector2d& mu_p = with_grad ? projected[p].value.mu_px : flat[p].mu_px;
        const double sigma_p = with_grad ? projected[p].value.sigma_px : flat[p].sigma_px;
        const double z_p = with_grad ? projected[p].value.z_mm : flat[p].z_mm;
        const double sigma_h = with_grad ? projected[p].sigma_h_mm : flat[p].sigma_h_mm;

        const double wz = depth_weight(img.z_mm, z_p, sigma_h);
        if (wz == 0.0) continue;
        // Same expression sequence as overlap_2d so the two paths agree
        // bit for bit.
        const double si2 = img.sigma_px * img.sigma_px;
        const double sp2 = sigma_p * sigma_p;
        const double s2 = si2 + sp2;
        const Eigen::Vector2d d = mu_p - img.mu_px;
        const double expo = -d.squaredNorm() / (2.0 * s2);
        if (expo < kExpCutoff) continue;
        const double amp = kTwoPi * si2 * sp2 / s2;
        const double e = std::exp(expo);
        const double s = amp * e;
        num += wz * s;
        if (!with_grad) continue;

        const ProjectedBlobJacobian& pb = projected[p];
        // dS/dmu_p and dS/dsigma_p of the closed-form overlap.
        const Eigen::Vector2d ds_dmu = -s / s2 * d;
        const double ds_dsigma =
            sigma_p / (s2 * s2) * e * (2.0 * kTwoPi * si2 * si2 + amp * d.squaredNorm());
        // dDelta/dz_p on the interior branch; sign(0) treated as 0.
        const double dz = z_p - img.z_mm;
        const double dw_dz = dz > 0.0  ? -1.0 / (2.0 * sigma_h)
                             : dz < 0.0 ? 1.0 / (2.0 * sigma_h)
                                        : 0.0;
        g.noalias() += wz * (pb.d_mu.transpose() * ds_dmu);
        g.noalias() += (wz * ds_dsigma) * pb.d_sigma.transpose();
        g.noalias() += (s * dw_dz) * pb.d_z.transpose();
      }
    }
    rep.e_dissim = -num / denom;
    if (with_grad) rep.grad.noalias() += (w.lambda_dissim * (-1.0 / denom)) * g;
  }

  // --- collision --------------------------------------------------------
  if (w.lambda_collision > 0.0) {
    if (in.blobs == nullptr)
      throw ValidationError("collision weight is active but the blob layout is missing");
    std::vector<std::pair<int, int>> local_excl;
    const std::vector<std::pair<int, int>>* excl = in.collision_excluded;
    if (excl == nullptr) {
      local_excl = collision_exclusions(*in.topo, *in.blobs);
      excl = &local_excl;
    }
    const auto placed = place_blobs(*in.topo, fk, *in.blobs);
    const int n = static_cast<int>(placed.size());
    std::vector<char> skip(static_cast<size_t>(n) * n, 0);
    for (const auto& [j, k] : *excl) {
      skip[static_cast<size_t>(j) * n + k] = 1;
      skip[static_cast<size_t>(k) * n + j] = 1;
    }
    std::vector<Eigen::Matrix<double, 3, kParamCount>> center_jac;
    if (with_grad) {
      center_jac.reserve(placed.size());
      for (const Blob3D& blob : *in.blobs) {
        const BoneDef& bone = in.topo->bones[blob.bone_index];
        center_jac.emplace_back(
            (1.0 - blob.t) * jac.block<3, kParamCount>(3 * bone.parent_joint, 0) +
            blob.t * jac.block<3, kParamCount>(3 * bone.child_joint, 0));
      }
    }
    double e = 0.0;
    for (int j = 0; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        if (skip[static_cast<size_t>(j) * n + k]) continue;
        const double s2 = placed[j].sigma_mm * placed[j].sigma_mm +
                          placed[k].sigma_mm * placed[k].sigma_mm;
        const Eigen::Vector3d d = placed[j].center - placed[k].center;
        const double expo = -d.squaredNorm() / (2.0 * s2);
        if (expo < kExpCutoff) continue;
        const double amp = kTwoPi * placed[j].sigma_mm * placed[j].sigma_mm *
                           placed[k].sigma_mm * placed[k].sigma_mm / s2;
        const double s = amp * std::sqrt(amp) * std::exp(expo);
        e += s;
        if (with_grad) {
          const Eigen::Vector3d ds_dmu = -s / s2 * d;
          rep.grad.noalias() += w.lambda_collision *
                                ((center_jac[j] - center_jac[k]).transpose() * ds_dmu);
        }
      }
    }
    rep.e_collision = e;
  }

  // --- bone prior ---------------------------------------------------------
  if (w.lambda_bone > 0.0) {
    rep.e_bone = bone_prior(coeffs);
    if (with_grad)
      rep.grad.segment<kShapeDofCount>(kPoseDofCount) += w.lambda_bone * 2.0 * coeffs.beta;
  }

  // --- joint limits ---------------------------------------------------------
  if (w.lambda_lim > 0.0) {
    if (in.limits == nullptr)
      throw ValidationError("limit weight is active but the limit table is missing");
    rep.e_lim = joint_limits(pose, *in.limits);
    if (with_grad) {
      for (int k = 0; k < kArticDofCount; ++k) {
        const double t = pose.theta[k];
        if (t < in.limits->lo[k]) {
          rep.grad[k] += w.lambda_lim * 2.0 * (t - in.limits->lo[k]);
        } else if (t > in.limits->hi[k]) {
          rep.grad[k] += w.lambda_lim * 2.0 * (t - in.limits->hi[k]);
        }
      }
    }
  }

  // --- joint supervision ---------------------------------------------------
  if (w.lambda_joint > 0.0 && in.targets != nullptr && !in.targets->empty()) {
    double e = 0.0;
    for (const JointTarget& t : *in.targets) {
      if (!t.visible) continue;
      if (t.joint_index < 0 || t.joint_index >= kJointCount)
        throw ValidationError("joint target index out of range");
      TargetDistance d;
      if (t.kind == TargetKind::Point3D) {
        const Eigen::Vector3d v = fk.joints[t.joint_index] - t.value;
        d.phi = v.norm();
        if (d.phi > 0.0) d.dir = v / d.phi;
      } else {
        if (!in.target_cam)
          throw MissingIntrinsics("2D joint target requires camera intrinsics");
        const Eigen::Vector3d ray = target_ray(*in.target_cam, t.value.head<2>());
        const Eigen::Vector3d& f = fk.joints[t.joint_index];
        const Eigen::Vector3d v = f - f.dot(ray) * ray;
        d.phi = v.norm();
        if (d.phi > 0.0) d.dir = v / d.phi;
      }
      if (d.phi > w.slack_mm) {
        const double over = d.phi - w.slack_mm;
        e += over * over;
        if (with_grad) {
          rep.grad.noalias() +=
              (w.lambda_joint * 2.0 * over) *
              (jac.block<3, kParamCount>(3 * t.joint_index, 0).transpose() * d.dir);
        }
      }
    }
    rep.e_joint = e;
  }

  // Fixed accumulation order; tests rely on recomposing e_total bit-exactly.
  rep.e_total = w.lambda_dissim * rep.e_dissim;
  rep.e_total += w.lambda_collision * rep.e_collision;
  rep.e_total += w.lambda_bone * rep.e_bone;
  rep.e_total += w.lambda_lim * rep.e_lim;
  rep.e_total += w.lambda_joint * rep.e_joint;
  return rep;
}

}  // namespace handfit
