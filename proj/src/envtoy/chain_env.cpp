#include "skillforge/envtoy/chain_env.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "skillforge/common/error.h"

namespace skillforge {

void ChainWalkerConfig::validate() const {
  throwIf(!(controlRate > 0.0) || !std::isfinite(controlRate), "chain env: control rate must be > 0");
  throwIf(!(velocityLimit >= 0.0), "chain env: velocity limit must be >= 0");
}

ChainWalkerEnv::ChainWalkerEnv(KinematicTree tree, ChainWalkerConfig config)
    : tree_(std::move(tree)), config_(config) {
  config_.validate();
  throwIf(tree_.jointCount() == 0, "chain env: tree has no joints");
  const Eigen::VectorXd limits = config_.velocityLimit > 0.0
                                     ? Eigen::VectorXd::Constant(tree_.jointCount(), config_.velocityLimit)
                                     : tree_.velocityLimits();
  stepLimit_ = limits / config_.controlRate;
}

ChainState ChainWalkerEnv::reset(const MotionFrame& frame) const {
  throwIf(frame.q.size() != actionSize(), "chain env: frame joint count differs from tree");
  return {{frame.root, frame.q}, frame.q};
}

ChainState ChainWalkerEnv::step(const ChainState& state, const Eigen::VectorXd& action, const Transform& root) const {
  throwIf(action.size() != actionSize(), "chain env: action size differs from joint count");
  throwIf(!action.allFinite(), "chain env: non-finite action");
  ChainState next;
  next.pose.root = root;
  next.pose.q = action;
  for (Eigen::Index j = 0; j < action.size(); ++j) {
    const double change = action[j] - state.pose.q[j];
    // Reachable setpoints are taken verbatim so replayed clips match bit for bit.
    if (std::abs(change) > stepLimit_[j]) next.pose.q[j] = state.pose.q[j] + std::copysign(stepLimit_[j], change);
  }
  next.lastAction = action;
  return next;
}

BodyTrack clipBodyTransforms(const KinematicTree& tree, const MotionClip& clip) {
  BodyTrack out(clip.frameCount());
  for (size_t t = 0; t < clip.frameCount(); ++t) {
    out[t] = forwardKinematics(tree, {clip.frames[t].root, clip.frames[t].q}).bodies;
  }
  return out;
}

Eigen::VectorXd referenceContext(
    const BodyTrack& reference,
    size_t t,
    const Transform& currentRoot,
    const std::vector<Transform>& currentBodies) {
  throwIf(
      t + kContextFrames >= reference.size(),
      "reference context: not enough future frames after step " + std::to_string(t));
  const size_t nb = currentBodies.size();
  const Quaternion toRoot = currentRoot.orientation.conjugate();
  Eigen::VectorXd x(kContextFrames * static_cast<Eigen::Index>(nb) * 7);
  double* out = x.data();
  for (int k = 1; k <= kContextFrames; ++k) {
    const auto& ref = reference[t + k];
    throwIf(ref.size() != nb, "reference context: body count differs from the reference");
    for (size_t b = 0; b < nb; ++b) {
      const Vec3 offset = toRoot.rotate(ref[b].position - currentBodies[b].position);
      Quaternion q = currentBodies[b].orientation.conjugate() * ref[b].orientation;
      if (q.w < 0.0) q = Quaternion{-q.w, -q.x, -q.y, -q.z};
      out[0] = offset.x();
      out[1] = offset.y();
      out[2] = offset.z();
      out[3] = q.w;
      out[4] = q.x;
      out[5] = q.y;
      out[6] = q.z;
      out += 7;
    }
  }
  return x;
}

Eigen::VectorXd referenceContext(const KinematicTree& tree, const MotionClip& clip, size_t t, const Pose& current) {
  throwIf(t + kContextFrames >= clip.frameCount(), "reference context: not enough future frames after step " + std::to_string(t));
  BodyTrack window(t + kContextFrames + 1);
  for (size_t k = t + 1; k < window.size(); ++k) {
    window[k] = forwardKinematics(tree, {clip.frames[k].root, clip.frames[k].q}).bodies;
  }
  return referenceContext(window, t, current.root, forwardKinematics(tree, current).bodies);
}

int contextSize(const KinematicTree& tree) {
  return kContextFrames * static_cast<int>(tree.bodies.size()) * 7;
}

double clipSpeed(const MotionClip& clip) {
  clip.validate();
  double total = 0.0;
  for (size_t t = 1; t < clip.frameCount(); ++t) {
    total += (clip.frames[t].root.position - clip.frames[t - 1].root.position).head<2>().norm();
  }
  return total / clip.duration();
}

ClipSampler::ClipSampler(const std::vector<double>& speeds, const std::vector<size_t>& frameCounts, int bins, int excludeLast)
    : frameCounts_(frameCounts), excludeLast_(excludeLast) {
  throwIf(speeds.empty(), "clip sampler: no clips");
  throwIf(speeds.size() != frameCounts.size(), "clip sampler: speed and length lists differ");
  throwIf(bins < 1 || excludeLast < 0, "clip sampler: bins must be >= 1 and excluded frames >= 0");
  for (size_t n : frameCounts) {
    throwIf(n <= static_cast<size_t>(excludeLast_), "clip sampler: clip shorter than the excluded tail");
  }
  const auto [lo, hi] = std::minmax_element(speeds.begin(), speeds.end());
  const double width = (*hi - *lo) / bins;
  std::vector<std::vector<size_t>> all(bins);
  for (size_t i = 0; i < speeds.size(); ++i) {
    int b = width > 0.0 ? static_cast<int>((speeds[i] - *lo) / width) : 0;
    all[std::min(b, bins - 1)].push_back(i);
  }
  for (auto& b : all) {
    if (!b.empty()) bins_.push_back(std::move(b));
  }
}

size_t ClipSampler::sampleClip(Rng& rng) const {
  const auto& bin = bins_[std::uniform_int_distribution<size_t>(0, bins_.size() - 1)(rng)];
  return bin[std::uniform_int_distribution<size_t>(0, bin.size() - 1)(rng)];
}

size_t ClipSampler::sampleStart(size_t clip, Rng& rng) const {
  return std::uniform_int_distribution<size_t>(0, frameCounts_.at(clip) - 1 - excludeLast_)(rng);
}

ClipDataset makeSyntheticChainClips(const KinematicTree& tree, int count, double rate, double duration, uint64_t seed) {
  throwIf(count < 1 || !(rate > 0.0) || !(duration > 0.0), "synthetic clips: count, rate and duration must be positive");
  const int joints = static_cast<int>(tree.jointCount());
  const auto frames = static_cast<size_t>(std::lround(duration * rate)) + 1;
  ClipDataset out;
  uint64_t state = seed;
  for (int c = 0; c < count; ++c) {
    Rng rng(splitmix64(state));
    const double speed = 0.1 + 0.9 * (count > 1 ? static_cast<double>(c) / (count - 1) : 0.0);
    const double freq = uniform(rng, 0.3, 0.8);
    Eigen::VectorXd amp(joints), phase(joints), offset(joints);
    for (int j = 0; j < joints; ++j) {
      amp[j] = uniform(rng, 0.2, 0.6);
      phase[j] = uniform(rng, -std::numbers::pi, std::numbers::pi);
      offset[j] = uniform(rng, -0.2, 0.2);
    }
    MotionClip clip;
    clip.name = "synthetic_" + std::string(c < 10 ? "0" : "") + std::to_string(c);
    clip.rate = rate;
    clip.metadata["source"] = "synthetic";
    for (size_t i = 0; i < frames; ++i) {
      const double t = static_cast<double>(i) / rate;
      MotionFrame f;
      f.root.position = Vec3(speed * t, 0.0, 0.5);
      f.q = offset + (amp.array() * (2.0 * std::numbers::pi * freq * t + phase.array()).sin()).matrix();
      clip.frames.push_back(std::move(f));
    }
    out.clips.push_back(std::move(clip));
  }
  return out;
}

}  // namespace skillforge
