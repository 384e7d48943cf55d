#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "handfit/skeleton.hpp"

namespace handfit {

// One evaluated frame: predictions, optional ground truth subset, and the
// foreground point cloud used by MDPC.
struct EvalRecord {
  JointArray predicted;
  JointArray ground_truth;
  std::vector<int> gt_subset;  // joint indices with ground truth (empty = all 21)
  std::vector<Eigen::Vector3d> cloud;
};

// Mean Euclidean distance over the subset joints of all frames.
double mean_per_joint_error(const std::vector<JointArray>& pred,
                            const std::vector<JointArray>& gt,
                            const std::vector<int>& subset = {});

// Fraction of frames whose maximum joint error is <= each threshold.
// Thresholds must be sorted ascending; the curve is monotone in [0, 1].
std::vector<double> pcf_curve(const std::vector<double>& per_frame_max_error,
                              const std::vector<double>& thresholds);

struct MdpcResult {
  std::vector<double> per_joint;  // mm
  double median = 0.0;
  double average = 0.0;
};

// Minimum distance from each predicted joint to the point cloud.
// Throws EmptyCloud for an empty cloud.
MdpcResult mdpc(const JointArray& joints, const std::vector<Eigen::Vector3d>& cloud);

struct ClusterF1 {
  double subject0 = 0.0;
  double subject1 = 0.0;
};

// k-means (k=2) over bone-length vectors followed by the best cluster/subject
// assignment; F1 = 2PR/(P+R) per subject. labels must contain both 0 and 1.
// Throws DegenerateClusters when all vectors are identical.
ClusterF1 bone_cluster_f1(const std::vector<BoneVec>& vectors, const std::vector<int>& labels);

}  // namespace handfit
