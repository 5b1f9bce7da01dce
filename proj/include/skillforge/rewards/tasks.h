#pragma once

#include "skillforge/common/random.h"
#include "skillforge/kinematics/quaternion.h"

namespace skillforge {

// Velocity tracking: exp(-|v - target|^2 / resolution).
double walkingReward(const Vec3& velocity, const Vec3& target, double resolution);

// Exponential velocity filter used in place of the raw velocity.
struct VelocityFilter {
  double constant = 0.95;
  Vec3 value = Vec3::Zero();

  const Vec3& update(const Vec3& velocity) {
    value = constant * value + (1.0 - constant) * velocity;
    return value;
  }
};

struct WalkingTask {
  double resolution = 0.5;
  bool filtered = false;

  static WalkingTask anymal() {
    return {0.5, false};
  }
  static WalkingTask op3() {
    return {0.05, true};
  }
};

double dribblingReward(const Vec3& ball, const Vec3& target, double resolution);

struct DribblingTask {
  double resolution = 1.0;
  double minStep = 0.5;  // m, target displacement range
  double maxStep = 2.0;

  static DribblingTask anymal() {
    return {1.0, 0.5, 2.0};
  }
  static DribblingTask op3() {
    return {0.5, 0.3, 1.5};
  }
};

// Forward, lateral and yaw-rate targets that switch at Poisson-distributed
// times. On a switch each component is replaced with probability 0.5 by
// either 0 or a uniform draw in [-range, range], the latter with probability
// `nonzeroProbability`.
class VelocityCommandProcess {
 public:
  VelocityCommandProcess(const Vec3& range, const Vec3& nonzeroProbability, double meanGap = 5.0);

  static VelocityCommandProcess anymal();
  static VelocityCommandProcess op3();

  // Draws the first switch time and sets the target to zero.
  void reset(Rng& rng);
  // Advances time by dt, applying every switch that falls inside the step.
  const Vec3& step(double dt, Rng& rng);
  // One switch event. Returns which components were replaced.
  Eigen::Vector3i applySwitch(Rng& rng);

  const Vec3& target() const {
    return target_;
  }
  const Vec3& range() const {
    return range_;
  }
  double timeToSwitch() const {
    return timeToSwitch_;
  }

 private:
  Vec3 range_;
  Vec3 nonzero_;
  double meanGap_;
  Vec3 target_ = Vec3::Zero();
  double timeToSwitch_ = 0.0;
  bool started_ = false;
};

// New ball target: prev moved by U(minStep, maxStep) in a uniform planar direction.
Vec3 stepBallTarget(const Vec3& previous, double minStep, double maxStep, Rng& rng);

class BallTargetProcess {
 public:
  BallTargetProcess(double minStep, double maxStep, double meanGap = 10.0);

  static BallTargetProcess anymal();
  static BallTargetProcess op3();

  void reset(const Vec3& start, Rng& rng);
  const Vec3& step(double dt, Rng& rng);
  const Vec3& target() const {
    return target_;
  }

 private:
  double minStep_;
  double maxStep_;
  double meanGap_;
  Vec3 target_ = Vec3::Zero();
  double timeToSwitch_ = 0.0;
};

// Wraps an angle to (-pi, pi].
double wrapAngle(double angle);

// Planar feedback law on (x, y, heading): target = v + gain * (p_desired - p),
// with the heading error wrapped first.
Vec3 trackingCommand(const Vec3& velocity, const Vec3& desired, const Vec3& current, double gain);

struct TerminationFlags {
  bool selfCollision = false;
  bool nonFootContact = false;
  double baseTilt = 0.0;        // rad
  double robotBallDistance = 0.0;   // m
  double ballTargetDistance = 0.0;  // m
};

struct TerminationLimits {
  double maxTilt = 0.7853981633974483;  // 45 degrees
  double maxDistance = 5.0;             // m
};

bool walkingTerminated(const TerminationFlags& flags, const TerminationLimits& limits = {});
bool dribblingTerminated(const TerminationFlags& flags, const TerminationLimits& limits = {});

}  // namespace skillforge
