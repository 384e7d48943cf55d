#include "handfit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace handfit {

double mean_per_joint_error(const std::vector<JointArray>& pred,
                            const std::vector<JointArray>& gt,
                            const std::vector<int>& subset) {
  if (pred.size() != gt.size())
    throw ValidationError("prediction and ground-truth frame counts differ");
  if (pred.empty()) throw ValidationError("no frames to evaluate");
  std::vector<int> idx = subset;
  if (idx.empty()) {
    idx.resize(kJointCount);
    for (int j = 0; j < kJointCount; ++j) idx[j] = j;
  }
  for (int j : idx) {
    if (j < 0 || j >= kJointCount) throw ValidationError("subset joint index out of range");
  }
  double sum = 0.0;
  for (size_t f = 0; f < pred.size(); ++f)
    for (int j : idx) sum += (pred[f][j] - gt[f][j]).norm();
  return sum / (static_cast<double>(pred.size()) * idx.size());
}

std::vector<double> pcf_curve(const std::vector<double>& per_frame_max_error,
                              const std::vector<double>& thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw ValidationError("pcf thresholds must be sorted ascending");
  if (per_frame_max_error.empty()) throw ValidationError("no frames to evaluate");
  std::vector<double> curve;
  curve.reserve(thresholds.size());
  for (double t : thresholds) {
    long n = std::count_if(per_frame_max_error.begin(), per_frame_max_error.end(),
                           [t](double e) { return e <= t; });
    curve.push_back(static_cast<double>(n) / per_frame_max_error.size());
  }
  return curve;
}

MdpcResult mdpc(const JointArray& joints, const std::vector<Eigen::Vector3d>& cloud) {
  if (cloud.empty()) throw EmptyCloud("MDPC needs a nonempty point cloud");
  MdpcResult r;
  r.per_joint.reserve(kJointCount);
  for (const Eigen::Vector3d& j : joints) {
    double best = std::numeric_limits<double>::infinity();
    for (const Eigen::Vector3d& p : cloud) best = std::min(best, (j - p).squaredNorm());
    r.per_joint.push_back(std::sqrt(best));
  }
  std::vector<double> sorted = r.per_joint;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  r.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  r.average = 0.0;
  for (double d : r.per_joint) r.average += d;
  r.average /= n;
  return r;
}

namespace {

struct KmeansRun {
  std::vector<int> assign;
  double inertia = std::numeric_limits<double>::infinity();
};

KmeansRun lloyd(const std::vector<BoneVec>& x, BoneVec c0, BoneVec c1) {
  const int n = static_cast<int>(x.size());
  KmeansRun run;
  run.assign.assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const int a = (x[i] - c0).squaredNorm() <= (x[i] - c1).squaredNorm() ? 0 : 1;
      if (a != run.assign[i]) {
        run.assign[i] = a;
        changed = true;
      }
    }
    BoneVec s0 = BoneVec::Zero(), s1 = BoneVec::Zero();
    int n0 = 0, n1 = 0;
    for (int i = 0; i < n; ++i) {
      if (run.assign[i] == 0) {
        s0 += x[i];
        ++n0;
      } else {
        s1 += x[i];
        ++n1;
      }
    }
    if (n0 > 0) c0 = s0 / n0;
    if (n1 > 0) c1 = s1 / n1;
    if (!changed && iter > 0) break;
  }
  run.inertia = 0.0;
  for (int i = 0; i < n; ++i)
    run.inertia += (x[i] - (run.assign[i] == 0 ? c0 : c1)).squaredNorm();
  return run;
}

double f1_score(long tp, long fp, long fn) {
  const double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  const double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

ClusterF1 bone_cluster_f1(const std::vector<BoneVec>& vectors, const std::vector<int>& labels) {
  const int n = static_cast<int>(vectors.size());
  if (n < 2 || labels.size() != vectors.size())
    throw ValidationError("bone clustering needs >= 2 labeled vectors");
  bool has0 = false, has1 = false;
  for (int l : labels) {
    if (l == 0) has0 = true;
    else if (l == 1) has1 = true;
    else throw ValidationError("subject labels must be 0 or 1");
  }
  if (!has0 || !has1) throw ValidationError("both subjects must be present");

  bool all_same = true;
  for (int i = 1; i < n && all_same; ++i) all_same = vectors[i] == vectors[0];
  if (all_same) throw DegenerateClusters("all bone-length vectors are identical");

  // Restart 0 seeds with the farthest pair; the remaining restarts draw
  // random pairs from a restart-indexed generator, so the result is a pure
  // function of the input order.
  int far_a = 0, far_b = 1;
  double far_d = -1.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = (vectors[i] - vectors[j]).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far_a = i;
        far_b = j;
      }
    }
  }
  KmeansRun best;
  for (int restart = 0; restart < 50; ++restart) {
    int a = far_a, b = far_b;
    if (restart > 0) {
      std::mt19937 rng(restart);
      std::uniform_int_distribution<int> pick(0, n - 1);
      a = pick(rng);
      do { b = pick(rng); } while (b == a);
    }
    if (vectors[a] == vectors[b]) continue;
    KmeansRun run = lloyd(vectors, vectors[a], vectors[b]);
    if (run.inertia < best.inertia) best = run;
  }

  // Two possible cluster->subject assignments; keep the better-scoring one.
  ClusterF1 out;
  double best_mean = -1.0;
  for (int flip = 0; flip < 2; ++flip) {
    long tp0 = 0, fp0 = 0, fn0 = 0, tp1 = 0, fp1 = 0, fn1 = 0;
    for (int i = 0; i < n; ++i) {
      const int cluster = flip ? 1 - best.assign[i] : best.assign[i];
      if (cluster == 0 && labels[i] == 0) ++tp0;
      if (cluster == 0 && labels[i] == 1) ++fp0;
      if (cluster == 1 && labels[i] == 0) ++fn0;
      if (cluster == 1 && labels[i] == 1) ++tp1;
      if (cluster == 1 && labels[i] == 0) ++fp1;
      if (cluster == 0 && labels[i] == 1) ++fn1;
    }
    const double f0 = f1_score(tp0, fp0, fn0);
    const double f1 = f1_score(tp1, fp1, fn1);
    if (0.5 * (f0 + f1) > best_mean) {
      best_mean = 0.5 * (f0 + f1);
      out.subject0 = f0;
      out.subject1 = f1;
    }
  }
  return out;
}

}  // namespace handfit
