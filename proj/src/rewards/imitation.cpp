#include "skillforge/rewards/imitation.h"

#include <cmath>

#include "skillforge/common/error.h"

namespace skillforge {

RobotRefState measureState(
    const KinematicTree& tree,
    const Pose& pose,
    const Eigen::VectorXd& qVel,
    const Eigen::VectorXd& currents) {
  const auto fk = forwardKinematics(tree, pose);
  RobotRefState s;
  for (const auto& b : fk.bodies) {
    s.bodyPositions.push_back(b.position);
    s.bodyOrientations.push_back(b.orientation);
    s.com += b.position;
  }
  s.com /= static_cast<double>(fk.bodies.size());
  s.q = pose.q;
  s.qVel = qVel.size() == 0 ? Eigen::VectorXd::Zero(pose.q.size()) : qVel;
  s.endEffectors = fk.endEffectors;
  s.currents = currents.size() == 0 ? Eigen::VectorXd::Zero(pose.q.size()) : currents;
  return s;
}

ImitationRewardConfig ImitationRewardConfig::anymal() {
  return {};
}

ImitationRewardConfig ImitationRewardConfig::op3() {
  ImitationRewardConfig c;
  c.comScale = 40.0;
  c.appScale = 160.0;
  c.currentPenalty = 0.0;
  return c;
}

void ImitationRewardConfig::validate() const {
  for (double s : {truncScale, comScale, velScale, appScale, quatScale}) {
    throwIf(!(s > 0.0) || !std::isfinite(s), "imitation reward: scales must be finite and > 0");
  }
  throwIf(
      !(terminationThreshold > 0.0 && terminationThreshold <= truncScale),
      "imitation reward: termination threshold must lie in (0, truncation scale]");
  throwIf(!(currentPenalty >= 0.0), "imitation reward: current penalty must be >= 0");
}

namespace {

void checkPair(const RobotRefState& a, const RobotRefState& b) {
  throwIf(a.bodyPositions.empty(), "tracking deviation: body set is empty");
  throwIf(a.q.size() == 0, "tracking deviation: joint set is empty");
  throwIf(
      a.bodyPositions.size() != b.bodyPositions.size() || a.q.size() != b.q.size(),
      "tracking deviation: state and reference index sets differ");
}

bool finite(const RobotRefState& s) {
  for (const auto& p : s.bodyPositions) {
    if (!p.allFinite()) return false;
  }
  for (const auto& p : s.endEffectors) {
    if (!p.allFinite()) return false;
  }
  for (const auto& q : s.bodyOrientations) {
    if (!std::isfinite(q.w + q.x + q.y + q.z)) return false;
  }
  return s.q.allFinite() && s.qVel.allFinite() && s.com.allFinite() && s.currents.allFinite();
}

}  // namespace

double trackingDeviation(const RobotRefState& state, const RobotRefState& ref) {
  checkPair(state, ref);
  double bodies = 0.0;
  for (size_t i = 0; i < state.bodyPositions.size(); ++i) {
    bodies += (state.bodyPositions[i] - ref.bodyPositions[i]).lpNorm<1>();
  }
  const double joints = (state.q - ref.q).lpNorm<1>();
  return bodies / (3.0 * static_cast<double>(state.bodyPositions.size())) +
         joints / static_cast<double>(state.q.size());
}

RewardBreakdown imitationReward(
    const RobotRefState& state,
    const RobotRefState& ref,
    const ImitationRewardConfig& config) {
  config.validate();
  throwIf(!finite(state) || !finite(ref), "imitation reward: non-finite input");
  checkPair(state, ref);
  throwIf(
      state.qVel.size() != ref.qVel.size() || state.endEffectors.size() != ref.endEffectors.size() ||
          state.bodyOrientations.size() != ref.bodyOrientations.size(),
      "imitation reward: state and reference index sets differ");

  RewardBreakdown r;
  r.deviation = trackingDeviation(state, ref);
  r.terminated = trackingTerminated(r.deviation, config.terminationThreshold);
  r.trunc = 1.0 - r.deviation / config.truncScale;
  if (r.trunc < 0.0) {
    r.trunc = 0.0;
    r.truncClamped = true;
  }
  r.com = std::exp(-config.comScale * (state.com - ref.com).squaredNorm());
  r.vel = std::exp(-config.velScale * (state.qVel - ref.qVel).squaredNorm());
  double app = 0.0;
  for (size_t i = 0; i < state.endEffectors.size(); ++i) {
    app += (state.endEffectors[i] - ref.endEffectors[i]).squaredNorm();
  }
  r.app = std::exp(-config.appScale * app);
  double quat = 0.0;
  for (size_t i = 0; i < state.bodyOrientations.size(); ++i) {
    quat += quatDifference(state.bodyOrientations[i], ref.bodyOrientations[i]).squaredNorm();
  }
  r.quat = std::exp(-config.quatScale * quat);
  if (config.currentPenalty > 0.0) r.amp = -config.currentPenalty * currentEnergy(state.currents);
  r.total = 0.5 * r.trunc +
            0.5 * (config.comWeight * r.com + r.vel + config.appWeight * r.app + config.quatWeight * r.quat) +
            r.amp;
  return r;
}

double currentEnergy(const Eigen::VectorXd& currents) {
  return currents.squaredNorm();
}

}  // namespace skillforge
