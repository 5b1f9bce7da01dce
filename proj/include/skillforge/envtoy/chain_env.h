#pragma once

#include <Eigen/Core>
#include <vector>

#include "skillforge/common/random.h"
#include "skillforge/kinematics/kinematic_tree.h"
#include "skillforge/mocap/motion_clip.h"

namespace skillforge {

struct ChainWalkerConfig {
  double controlRate = 30.0;   // Hz
  double velocityLimit = 0.0;  // rad/s for every joint; 0 keeps the tree's limits

  void validate() const;
};

struct ChainState {
  Pose pose;
  Eigen::VectorXd lastAction;
};

// Kinematic stand-in for a simulator: joints move toward their setpoints by at
// most velocityLimit * dt per step and the root is placed where the caller says.
class ChainWalkerEnv {
 public:
  ChainWalkerEnv(KinematicTree tree, ChainWalkerConfig config = {});

  const KinematicTree& tree() const {
    return tree_;
  }
  const ChainWalkerConfig& config() const {
    return config_;
  }
  double dt() const {
    return 1.0 / config_.controlRate;
  }
  int actionSize() const {
    return static_cast<int>(tree_.jointCount());
  }
  // Largest joint change per step, rad.
  const Eigen::VectorXd& stepLimit() const {
    return stepLimit_;
  }

  ChainState reset(const MotionFrame& frame) const;
  ChainState step(const ChainState& state, const Eigen::VectorXd& action, const Transform& root) const;

 private:
  KinematicTree tree_;
  ChainWalkerConfig config_;
  Eigen::VectorXd stepLimit_;
};

inline constexpr int kContextFrames = 5;

// World transforms of every body, one list per clip frame.
using BodyTrack = std::vector<std::vector<Transform>>;
BodyTrack clipBodyTransforms(const KinematicTree& tree, const MotionClip& clip);

// Difference between each reference body in frames t+1 .. t+5 and the same
// body in the current pose. Per body: position offset in the current root
// frame (3), then the rotation from current to reference body as a
// quaternion w,x,y,z with w >= 0 (4).
Eigen::VectorXd referenceContext(
    const BodyTrack& reference,
    size_t t,
    const Transform& currentRoot,
    const std::vector<Transform>& currentBodies);
Eigen::VectorXd referenceContext(const KinematicTree& tree, const MotionClip& clip, size_t t, const Pose& current);

int contextSize(const KinematicTree& tree);

// Mean planar root speed, m/s.
double clipSpeed(const MotionClip& clip);

// Picks clips so that mean speeds are roughly uniform: a non-empty speed bin
// first, then a clip inside it. Start frames skip the last `excludeLast` frames.
class ClipSampler {
 public:
  ClipSampler(const std::vector<double>& speeds, const std::vector<size_t>& frameCounts, int bins = 10, int excludeLast = 15);

  size_t sampleClip(Rng& rng) const;
  size_t sampleStart(size_t clip, Rng& rng) const;
  const std::vector<std::vector<size_t>>& bins() const {
    return bins_;
  }

 private:
  std::vector<std::vector<size_t>> bins_;
  std::vector<size_t> frameCounts_;
  int excludeLast_;
};

// Sinusoidal joint motions with a forward root drift, one speed per clip.
ClipDataset makeSyntheticChainClips(const KinematicTree& tree, int count, double rate, double duration, uint64_t seed);

}  // namespace skillforge
