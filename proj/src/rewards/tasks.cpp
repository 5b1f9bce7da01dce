#include "skillforge/rewards/tasks.h"

#include <cmath>
#include <numbers>

#include "skillforge/common/error.h"

namespace skillforge {

double walkingReward(const Vec3& velocity, const Vec3& target, double resolution) {
  throwIf(!(resolution > 0.0), "walking reward: resolution must be > 0");
  return std::exp(-(velocity - target).squaredNorm() / resolution);
}

double dribblingReward(const Vec3& ball, const Vec3& target, double resolution) {
  throwIf(!(resolution > 0.0), "dribbling reward: resolution must be > 0");
  return std::exp(-(ball - target).squaredNorm() / resolution);
}

VelocityCommandProcess::VelocityCommandProcess(const Vec3& range, const Vec3& nonzeroProbability, double meanGap)
    : range_(range), nonzero_(nonzeroProbability), meanGap_(meanGap) {
  throwIf((range.array() <= 0.0).any(), "velocity command: ranges must be > 0");
  throwIf(
      (nonzeroProbability.array() < 0.0).any() || (nonzeroProbability.array() > 1.0).any(),
      "velocity command: probabilities must lie in [0, 1]");
  throwIf(!(meanGap > 0.0), "velocity command: mean switch gap must be > 0");
}

VelocityCommandProcess VelocityCommandProcess::anymal() {
  return {Vec3(1.5, 0.4, 1.2), Vec3(0.9, 0.25, 0.5)};
}

VelocityCommandProcess VelocityCommandProcess::op3() {
  return {Vec3(0.4, 0.2, 1.0), Vec3(0.9, 0.25, 0.5)};
}

void VelocityCommandProcess::reset(Rng& rng) {
  target_.setZero();
  timeToSwitch_ = exponentialScale(rng, meanGap_);
  started_ = true;
}

Eigen::Vector3i VelocityCommandProcess::applySwitch(Rng& rng) {
  Eigen::Vector3i replaced = Eigen::Vector3i::Zero();
  for (int i = 0; i < 3; ++i) {
    const double sample = uniform(rng, -range_[i], range_[i]);
    const double gate = bernoulli(rng, nonzero_[i]) ? 1.0 : 0.0;
    const double replace = bernoulli(rng, 0.5) ? 1.0 : 0.0;
    target_[i] = target_[i] - replace * (target_[i] - sample * gate);
    replaced[i] = static_cast<int>(replace);
  }
  return replaced;
}

const Vec3& VelocityCommandProcess::step(double dt, Rng& rng) {
  throwIf(!(dt > 0.0), "velocity command: dt must be > 0");
  if (!started_) reset(rng);
  // exponential gaps are memoryless, so carrying the residual gap is exact
  while (timeToSwitch_ <= dt) {
    dt -= timeToSwitch_;
    applySwitch(rng);
    timeToSwitch_ = exponentialScale(rng, meanGap_);
  }
  timeToSwitch_ -= dt;
  return target_;
}

Vec3 stepBallTarget(const Vec3& previous, double minStep, double maxStep, Rng& rng) {
  throwIf(!(minStep > 0.0 && minStep <= maxStep), "ball target: need 0 < min <= max");
  const double distance = minStep == maxStep ? minStep : uniform(rng, minStep, maxStep);
  const double heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
  return previous + Vec3(distance * std::cos(heading), distance * std::sin(heading), 0.0);
}

BallTargetProcess::BallTargetProcess(double minStep, double maxStep, double meanGap)
    : minStep_(minStep), maxStep_(maxStep), meanGap_(meanGap) {
  throwIf(!(minStep > 0.0 && minStep <= maxStep), "ball target: need 0 < min <= max");
  throwIf(!(meanGap > 0.0), "ball target: mean gap must be > 0");
}

BallTargetProcess BallTargetProcess::anymal() {
  return {0.5, 2.0};
}

BallTargetProcess BallTargetProcess::op3() {
  return {0.3, 1.5};
}

void BallTargetProcess::reset(const Vec3& start, Rng& rng) {
  target_ = start;
  timeToSwitch_ = exponentialScale(rng, meanGap_);
}

const Vec3& BallTargetProcess::step(double dt, Rng& rng) {
  throwIf(!(dt > 0.0), "ball target: dt must be > 0");
  while (timeToSwitch_ <= dt) {
    dt -= timeToSwitch_;
    target_ = stepBallTarget(target_, minStep_, maxStep_, rng);
    timeToSwitch_ = exponentialScale(rng, meanGap_);
  }
  timeToSwitch_ -= dt;
  return target_;
}

double wrapAngle(double angle) {
  const double twoPi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(angle + std::numbers::pi, twoPi);
  if (wrapped <= 0.0) wrapped += twoPi;
  return wrapped - std::numbers::pi;
}

Vec3 trackingCommand(const Vec3& velocity, const Vec3& desired, const Vec3& current, double gain) {
  throwIf(!(gain >= 0.0), "tracking controller: gain must be >= 0");
  Vec3 error = desired - current;
  error.z() = wrapAngle(error.z());
  return velocity + gain * error;
}

bool walkingTerminated(const TerminationFlags& flags, const TerminationLimits& limits) {
  return flags.selfCollision || flags.nonFootContact || flags.baseTilt > limits.maxTilt;
}

bool dribblingTerminated(const TerminationFlags& flags, const TerminationLimits& limits) {
  return walkingTerminated(flags, limits) || flags.robotBallDistance > limits.maxDistance ||
         flags.ballTargetDistance > limits.maxDistance;
}

}  // namespace skillforge
