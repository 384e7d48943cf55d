#pragma once

#include <string>
#include <vector>

#include "handfit/energy.hpp"

namespace handfit {

// One optimization stage: which energy terms are active, whether only the
// global 6 DOF move, and a multiplier on the base step size.
struct FitStage {
  EnergyWeights weights;
  bool global_only = false;
  int iters = 400;
  double step_scale = 1.0;
};

struct FitSeed {
  PoseParams theta;
  BoneCoeffs beta;
};

struct FitConfig {
  int max_iters = 400;      // default stage length
  double step_size = 0.01;  // base step per unit of param_scale
  double beta1 = 0.9;       // first-moment decay
  double beta2 = 0.999;     // second-moment decay
  double eps = 1e-8;
  double tolerance = 1e-7;  // relative energy decrease
  int patience = 8;         // consecutive below-tolerance iterations to stop
  int max_halvings = 30;
  double translation_scale = 100.0;  // mm of translation per unit step
  std::vector<FitSeed> seeds;        // empty -> canonical seed set
  std::vector<FitStage> stages;      // empty -> default two-stage schedule

  ParamVec param_scale() const;
};

struct FitResult {
  PoseParams theta;
  BoneCoeffs beta;
  EnergyReport report;  // full-weight energy at the solution
  int iterations = 0;
  int seed_index = -1;
  std::vector<double> energy_trace;  // accepted energies of the winning run
};

// Canonical seed poses (flat, half-curl, fist, pinch, spread), wrist placed
// so the rest-pose hand centroid lands on crop_center.
std::vector<FitSeed> default_seeds(const SkeletonTopology& topo, const BoneLengthModel& model,
                                   const Eigen::Vector3d& crop_center);

// Default schedule: global alignment on dissimilarity+supervision, all terms
// on all DOF, then a reduced-step polish pass.
std::vector<FitStage> default_stages(const EnergyWeights& weights, int max_iters);

// Minimize the total energy from every seed with adaptive-moment descent and
// step halving; returns the best seed's result. Deterministic. Throws
// NoSignal when there are neither image blobs nor targets.
FitResult fit_frame(const EnergyInputs& in, const FitConfig& config);

}  // namespace handfit
