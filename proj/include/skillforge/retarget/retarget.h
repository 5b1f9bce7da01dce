#pragma once

#include <span>
#include <string>
#include <vector>

#include "skillforge/mocap/motion_clip.h"

namespace skillforge {

struct IkOptions {
  int maxIterations = 100;
  double stepTolerance = 1e-8;
  double initialDamping = 1e-3;
};

struct IkResult {
  Pose pose;
  double residual = 0.0;  // sum of squared marker errors, m^2
  double cost = 0.0;      // residual + beta * |q - qRef|^2
  int iterations = 0;
  bool converged = false;
};

// Levenberg-damped Gauss-Newton over the root transform and all joints.
// `targets` holds one world position per tree marker; NaN entries are treated
// as missing and ignored. Joint limits are enforced by projection.
IkResult solveFrameIk(
    const KinematicTree& tree,
    std::span<const Vec3> markerOffsets,
    std::span<const Vec3> targets,
    const Pose& init,
    double beta,
    const Eigen::VectorXd& qRef,
    const IkOptions& options = {});

struct MarkerFit {
  std::vector<Vec3> offsets;
  // Markers with too few observations to pin down their free components.
  // Their offsets stay at the (symmetrized) initial value.
  std::vector<bool> unobservable;
};

// Projects offsets onto the subspace allowed by the tree's symmetry maps:
// paired markers mirror each other and self-paired markers lose the
// reflected component. Orbits are averaged.
std::vector<Vec3> symmetrizeOffsets(const KinematicTree& tree, std::span<const Vec3> offsets);

// Linear least squares for marker offsets over all frames with poses held
// fixed. Fixed markers keep `initial`.
MarkerFit optimizeMarkers(
    const KinematicTree& tree,
    std::span<const Pose> poses,
    std::span<const std::vector<Vec3>> targets,
    std::span<const Vec3> initial);

// Robot marker -> reference marker column.
struct MarkerCorrespondence {
  std::vector<int> referenceIndex;
};

MarkerCorrespondence loadCorrespondence(const std::string& path, const KinematicTree& tree);
MarkerCorrespondence identityCorrespondence(const KinematicTree& tree);

struct RetargetProblem {
  KinematicTree tree;
  MotionClip reference;  // frames carry marker world positions
  MarkerCorrespondence correspondence;
  std::vector<Vec3> initialOffsets;  // empty: the tree's declared offsets
  Eigen::VectorXd qRef;              // empty: the tree's reference pose
  double beta = 0.01;
  double relativeTolerance = 1e-6;
  double discontinuityThreshold = 0.5;  // rad between consecutive frames
  IkOptions ik;
};

struct RetargetResult {
  std::vector<Vec3> markerOffsets;
  std::vector<bool> unobservableMarkers;
  MotionClip clip;
  std::vector<double> frameResiduals;
  // Objective after the initial IK pass, then after each alternation.
  std::vector<double> objective;
  int alternations = 0;
  int unconvergedFrames = 0;
  // Frames t where max |q_t - q_{t-1}| exceeds the threshold.
  std::vector<int> discontinuities;
};

RetargetResult retargetClip(const RetargetProblem& problem, int outerIterations);

// CSV report: one row per alternation (objective) and per frame (residual).
void writeRetargetReport(const RetargetResult& result, const std::string& path);

}  // namespace skillforge
