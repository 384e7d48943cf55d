#include "handfit/fitter.hpp"

#include <algorithm>
#include <cmath>

namespace handfit {

ParamVec FitConfig::param_scale() const {
  ParamVec s = ParamVec::Ones();
  s.segment<3>(kGlobalPosIndex).setConstant(translation_scale);
  return s;
}

std::vector<FitSeed> default_seeds(const SkeletonTopology& topo, const BoneLengthModel& model,
                                   const Eigen::Vector3d& crop_center) {
  BoneCoeffs zero;
  const BoneVec lengths = decode_bones(model, zero);

  auto curl = [&](double mcp, double pip, double dip, double thumb) {
    PoseParams p;
    for (int k = 0; k < kArticDofCount; ++k) {
      const std::string& name = topo.dofs[k].name;
      if (name.find("abduct") != std::string::npos) continue;
      const bool is_thumb = name.rfind("thumb", 0) == 0;
      if (is_thumb) {
        p.theta[k] = thumb;
      } else if (name.find("mcp") != std::string::npos) {
        p.theta[k] = mcp;
      } else if (name.find("pip") != std::string::npos) {
        p.theta[k] = pip;
      } else if (name.find("dip") != std::string::npos) {
        p.theta[k] = dip;
      }
    }
    return p;
  };

  std::vector<PoseParams> poses;
  poses.push_back(PoseParams{});                 // flat
  poses.push_back(curl(0.5, 0.6, 0.4, 0.3));     // half curl
  poses.push_back(curl(1.2, 1.4, 0.8, 0.7));     // fist
  {
    PoseParams pinch = curl(0.8, 0.9, 0.5, 0.6);  // curled with straighter index
    for (int k = 0; k < kArticDofCount; ++k) {
      if (topo.dofs[k].name.rfind("index", 0) == 0 &&
          topo.dofs[k].name.find("abduct") == std::string::npos) {
        pinch.theta[k] *= 0.4;
      }
    }
    poses.push_back(pinch);
  }
  {
    PoseParams spread;                            // flat with splayed fingers
    for (int k = 0; k < kArticDofCount; ++k) {
      if (topo.dofs[k].name.find("abduct") != std::string::npos) {
        spread.theta[k] = 0.5 * (topo.dofs[k].limit_lo + topo.dofs[k].limit_hi) +
                          0.35 * (topo.dofs[k].limit_hi - topo.dofs[k].limit_lo);
      }
    }
    poses.push_back(spread);
  }

  std::vector<FitSeed> seeds;
  for (PoseParams& p : poses) {
    // Put the rest-pose centroid of this pose at the crop center.
    p.theta.segment<3>(kGlobalPosIndex).setZero();
    const FkResult fk = forward_kinematics(topo, p, lengths);
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const Eigen::Vector3d& j : fk.joints) centroid += j;
    centroid /= kJointCount;
    p.theta.segment<3>(kGlobalPosIndex) = crop_center - centroid;
    seeds.push_back({p, BoneCoeffs{}});
  }
  return seeds;
}

std::vector<FitStage> default_stages(const EnergyWeights& weights, int max_iters) {
  FitStage align;
  align.weights = weights;
  align.weights.lambda_collision = 0.0;
  align.weights.lambda_bone = 0.0;
  align.weights.lambda_lim = 0.0;
  align.global_only = true;
  align.iters = std::max(1, max_iters / 2);

  FitStage full;
  full.weights = weights;
  full.global_only = false;
  full.iters = max_iters;

  FitStage polish = full;
  polish.step_scale = 0.2;
  return {align, full, polish};
}

namespace {

struct RunResult {
  ParamVec x;
  int iterations = 0;
  std::vector<double> trace;  // accepted energies, stage objective
};

EnergyReport eval_energy(const EnergyInputs& in, const EnergyWeights& w, const ParamVec& x,
                         bool with_grad) {
  EnergyInputs staged = in;
  staged.weights = w;
  PoseParams pose;
  pose.theta = x.head<kPoseDofCount>();
  BoneCoeffs coeffs;
  coeffs.beta = x.tail<kShapeDofCount>();
  return total_energy(staged, pose, coeffs, with_grad);
}

// Adaptive-moment descent with step halving. Accepted iterates never
// increase the energy; a run stops when no halved step helps or when the
// relative decrease stays below tolerance for `patience` iterations.
RunResult run_descent(const EnergyInputs& in, const FitStage& stage, const FitConfig& cfg,
                      const ParamVec& x0) {
  RunResult out;
  out.x = x0;
  ParamVec m = ParamVec::Zero();
  ParamVec v = ParamVec::Zero();
  const ParamVec scale = cfg.param_scale();

  double energy = eval_energy(in, stage.weights, out.x, false).e_total;
  out.trace.push_back(energy);
  int calm = 0;
  for (int it = 1; it <= stage.iters; ++it) {
    const EnergyReport rep = eval_energy(in, stage.weights, out.x, true);
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * rep.grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * rep.grad.cwiseProduct(rep.grad);
    const double bc1 = 1.0 - std::pow(cfg.beta1, it);
    const double bc2 = 1.0 - std::pow(cfg.beta2, it);
    ParamVec step;
    const double base = cfg.step_size * stage.step_scale;
    for (int i = 0; i < kParamCount; ++i) {
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      step[i] = base * scale[i] * mh / (std::sqrt(vh) + cfg.eps);
    }
    if (stage.global_only) {
      step.head<kArticDofCount>().setZero();
      step.tail<kShapeDofCount>().setZero();
    }

    bool accepted = false;
    double mult = 1.0;
    for (int h = 0; h <= cfg.max_halvings; ++h, mult *= 0.5) {
      const ParamVec cand = out.x - mult * step;
      double cand_energy;
      try {
        cand_energy = eval_energy(in, stage.weights, cand, false).e_total;
      } catch (const NonPositiveBoneLength&) {
        continue;  // shrink until bone lengths stay positive
      }
      if (cand_energy <= energy) {
        const double decrease = energy - cand_energy;
        out.x = cand;
        out.iterations = it;
        accepted = true;
        calm = decrease < cfg.tolerance * std::max(std::abs(energy), 1e-12) ? calm + 1 : 0;
        energy = cand_energy;
        out.trace.push_back(energy);
        break;
      }
    }
    if (!accepted || calm >= cfg.patience) break;
  }
  return out;
}

}  // namespace

FitResult fit_frame(const EnergyInputs& in, const FitConfig& config) {
  const bool has_image = in.image_blobs != nullptr && !in.image_blobs->empty();
  const bool has_targets = in.targets != nullptr && !in.targets->empty();
  if (!has_image && !has_targets)
    throw NoSignal("fit needs image blobs or joint targets");
  if (in.topo == nullptr || in.bone_model == nullptr)
    throw ValidationError("fit requires a skeleton and bone model");
  if (config.seeds.empty()) throw ValidationError("fit requires at least one seed");

  std::vector<FitStage> stages = config.stages;
  if (stages.empty()) stages = default_stages(in.weights, config.max_iters);
  // Terms without signal are dropped rather than failing deep inside the
  // energy: no image -> no dissimilarity, no targets -> no supervision.
  for (FitStage& s : stages) {
    if (!has_image) s.weights.lambda_dissim = 0.0;
    if (!has_targets) s.weights.lambda_joint = 0.0;
  }
  const EnergyWeights& full = stages.back().weights;

  FitResult best;
  double best_energy = std::numeric_limits<double>::infinity();
  for (size_t si = 0; si < config.seeds.size(); ++si) {
    ParamVec x;
    x.head<kPoseDofCount>() = config.seeds[si].theta.theta;
    x.tail<kShapeDofCount>() = config.seeds[si].beta.beta;

    double seed_energy;
    try {
      seed_energy = eval_energy(in, full, x, false).e_total;
    } catch (const NonPositiveBoneLength&) {
      continue;  // seed itself is outside the usable shape space
    }

    ParamVec cur = x;
    int iters = 0;
    std::vector<double> trace;
    for (const FitStage& stage : stages) {
      RunResult r = run_descent(in, stage, config, cur);
      cur = r.x;
      iters += r.iterations;
      trace.insert(trace.end(), r.trace.begin(), r.trace.end());
    }

    // The staged schedule may change the objective between stages; guard the
    // invariant final energy <= seed energy under the full weights.
    double final_energy = eval_energy(in, full, cur, false).e_total;
    if (seed_energy < final_energy) {
      cur = x;
      final_energy = seed_energy;
    }

    BoneCoeffs coeffs;
    coeffs.beta = cur.tail<kShapeDofCount>();
    try {
      decode_bones(*in.bone_model, coeffs);
    } catch (const NonPositiveBoneLength&) {
      continue;  // reject runs that left the usable shape space
    }

    if (final_energy < best_energy) {
      best_energy = final_energy;
      best.theta.theta = cur.head<kPoseDofCount>();
      best.beta.beta = cur.tail<kShapeDofCount>();
      best.report = eval_energy(in, full, cur, true);
      best.iterations = iters;
      best.seed_index = static_cast<int>(si);
      best.energy_trace = std::move(trace);
    }
  }
  if (best.seed_index < 0)
    throw ValidationError("no seed produced a usable fit (bone lengths stayed non-positive)");
  return best;
}

}  // namespace handfit
