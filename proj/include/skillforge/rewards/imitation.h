#pragma once

#include <vector>

#include "skillforge/kinematics/kinematic_tree.h"

namespace skillforge {

// Everything the imitation terms compare, for either the robot or the reference.
struct RobotRefState {
  std::vector<Vec3> bodyPositions;
  std::vector<Quaternion> bodyOrientations;
  Eigen::VectorXd q;
  Eigen::VectorXd qVel;
  Vec3 com = Vec3::Zero();
  std::vector<Vec3> endEffectors;
  Eigen::VectorXd currents;
};

// Builds a state from forward kinematics. The centre of mass is the mean body
// origin since trees carry no inertia.
RobotRefState measureState(
    const KinematicTree& tree,
    const Pose& pose,
    const Eigen::VectorXd& qVel = {},
    const Eigen::VectorXd& currents = {});

struct ImitationRewardConfig {
  double comWeight = 0.1;     // a
  double appWeight = 0.15;    // b
  double quatWeight = 0.65;   // c
  double truncScale = 0.3;    // r_trunc = 1 - delta / truncScale
  double comScale = 20.0;     // d
  double velScale = 0.1;      // e
  double appScale = 80.0;     // f
  double quatScale = 2.0;     // g
  double terminationThreshold = 0.3;
  double currentPenalty = 5e-4;

  static ImitationRewardConfig anymal();
  static ImitationRewardConfig op3();

  // Throws InvalidInput unless scales > 0 and 0 < threshold <= truncScale.
  void validate() const;
};

// Mean per-coordinate L1 body position error plus mean absolute joint error.
double trackingDeviation(const RobotRefState& state, const RobotRefState& ref);

inline bool trackingTerminated(double deviation, double threshold) {
  return deviation > threshold;
}

struct RewardBreakdown {
  double deviation = 0.0;
  double trunc = 0.0;
  double com = 0.0;
  double vel = 0.0;
  double app = 0.0;
  double quat = 0.0;
  double amp = 0.0;
  double total = 0.0;
  bool truncClamped = false;
  bool terminated = false;
};

RewardBreakdown imitationReward(
    const RobotRefState& state,
    const RobotRefState& ref,
    const ImitationRewardConfig& config);

// Sum of squared actuator currents, the energy proxy.
double currentEnergy(const Eigen::VectorXd& currents);

}  // namespace skillforge
