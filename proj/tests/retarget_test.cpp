#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "skillforge/common/error.h"
#include "skillforge/retarget/retarget.h"

namespace skillforge {
namespace {

std::vector<Vec3> treeOffsets(const KinematicTree& tree) {
  std::vector<Vec3> out;
  for (const auto& m : tree.markers) out.push_back(m.offset);
  return out;
}

// Offsets the generator uses as ground truth: tips moved off the link axis.
std::vector<Vec3> trueChainOffsets(const KinematicTree& tree) {
  auto offsets = treeOffsets(tree);
  for (size_t m = 0; m < tree.markers.size(); ++m) {
    if (!tree.markers[m].fixed) offsets[m] += Vec3(-0.03, 0.0, 0.04);
  }
  return offsets;
}

Eigen::VectorXd smoothJoints(double t, size_t n) {
  Eigen::VectorXd q(n);
  for (size_t j = 0; j < n; ++j) q[j] = 0.8 * std::sin(1.3 * t + 0.7 * j) + 0.2 * std::cos(2.1 * t);
  return q;
}

Transform smoothRoot(double t) {
  return {Vec3(0.4 * t, 0.05 * std::sin(t), 0.5 + 0.05 * std::cos(2 * t)),
          Quaternion::fromAxisAngle(Vec3(0.3, 1.0, 0.2).normalized(), 0.3 * std::sin(0.8 * t))};
}

MotionClip markerClip(const KinematicTree& tree, const std::vector<Vec3>& offsets, size_t frames, double scale = 1.0) {
  MotionClip clip;
  clip.name = "reference";
  clip.rate = 50.0;
  for (size_t i = 0; i < frames; ++i) {
    const double t = static_cast<double>(i) / clip.rate;
    MotionFrame f;
    f.root = smoothRoot(t);
    f.q = smoothJoints(t, tree.jointCount());
    f.markers = forwardKinematics(tree, Pose{f.root, f.q}, offsets).markers;
    for (auto& m : f.markers) m *= scale;
    clip.frames.push_back(f);
  }
  return clip;
}

TEST(FrameIk, ExactTargetsAreAFixedPoint) {
  const auto tree = makePlanarChain(3);
  const auto offsets = treeOffsets(tree);
  const Pose pose{smoothRoot(0.3), smoothJoints(0.3, 3)};
  const auto targets = forwardKinematics(tree, pose, offsets).markers;
  const auto r = solveFrameIk(tree, offsets, targets, pose, 0.0, Eigen::VectorXd::Zero(3));
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LT(r.residual, 1e-12);
  EXPECT_EQ(r.pose.q, pose.q);
}

TEST(FrameIk, RecoversChainPoseFromZeros) {
  const auto tree = makePlanarChain(3);
  const auto offsets = treeOffsets(tree);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose truth{Transform::identity(), Eigen::Vector3d(u(rng), u(rng), u(rng))};
    const auto targets = forwardKinematics(tree, truth, offsets).markers;
    const Pose init{Transform::identity(), Eigen::VectorXd::Zero(3)};
    const auto r = solveFrameIk(tree, offsets, targets, init, 0.0, Eigen::VectorXd::Zero(3));
    EXPECT_LT((r.pose.q - truth.q).cwiseAbs().maxCoeff(), 1e-3) << "trial " << trial;
    EXPECT_LT(r.residual, 1e-12);
  }
}

TEST(FrameIk, LargeRegularizerPinsReferencePose) {
  const auto tree = makePlanarChain(3);
  const auto offsets = treeOffsets(tree);
  const Pose truth{Transform::identity(), Eigen::Vector3d(1.0, -0.8, 0.6)};
  const auto targets = forwardKinematics(tree, truth, offsets).markers;
  const Eigen::Vector3d qRef(0.2, 0.1, -0.3);
  const auto r = solveFrameIk(tree, offsets, targets, Pose{Transform::identity(), Eigen::VectorXd::Zero(3)}, 1e6, qRef);
  EXPECT_LT((r.pose.q - qRef).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(FrameIk, RespectsJointLimits) {
  auto tree = makePlanarChain(2);
  const auto offsets = treeOffsets(tree);
  const Pose truth{Transform::identity(), Eigen::Vector2d(0.0, 2.4)};
  const auto targets = forwardKinematics(tree, truth, offsets).markers;
  tree.joints[1].upper = 1.0;
  tree.finalize();
  const auto r = solveFrameIk(tree, offsets, targets, Pose{Transform::identity(), Eigen::VectorXd::Zero(2)}, 0.0, Eigen::VectorXd::Zero(2));
  EXPECT_LE(r.pose.q[1], 1.0);
}

TEST(FrameIk, IgnoresMissingMarkers) {
  const auto tree = makePlanarChain(3);
  const auto offsets = treeOffsets(tree);
  const Pose truth{Transform::identity(), Eigen::Vector3d(0.3, 0.4, -0.2)};
  auto targets = forwardKinematics(tree, truth, offsets).markers;
  targets[4] = Vec3::Constant(std::nan(""));
  const auto r = solveFrameIk(tree, offsets, targets, Pose{Transform::identity(), Eigen::VectorXd::Zero(3)}, 0.0, Eigen::VectorXd::Zero(3));
  EXPECT_LT((r.pose.q - truth.q).norm(), 1e-6);
}

TEST(FrameIk, RejectsNonFiniteInput) {
  const auto tree = makePlanarChain(2);
  const auto offsets = treeOffsets(tree);
  std::vector<Vec3> targets(tree.markers.size(), Vec3::Zero());
  targets[0] = Vec3::Constant(INFINITY);
  EXPECT_THROW(
      solveFrameIk(tree, offsets, targets, Pose{Transform::identity(), Eigen::VectorXd::Zero(2)}, 0.0, Eigen::VectorXd::Zero(2)),
      InvalidInput);
}

TEST(Markers, RecoveredFromExactPoses) {
  const auto tree = makePlanarChain(3);
  const auto truth = trueChainOffsets(tree);
  const auto clip = markerClip(tree, truth, 30);
  std::vector<Pose> poses;
  std::vector<std::vector<Vec3>> targets;
  for (const auto& f : clip.frames) {
    poses.push_back({f.root, f.q});
    targets.push_back(f.markers);
  }
  const auto fit = optimizeMarkers(tree, poses, targets, treeOffsets(tree));
  for (size_t m = 0; m < truth.size(); ++m) {
    EXPECT_LT((fit.offsets[m] - truth[m]).norm(), 1e-9) << tree.markers[m].name;
    EXPECT_FALSE(fit.unobservable[m]);
  }
}

TEST(Markers, SingleFrameRootMarkerIsBodyFrameTarget) {
  auto tree = makePlanarChain(1);
  tree.symmetry.lateral.reset();
  for (auto& m : tree.markers) m.fixed = false;
  const Pose pose{smoothRoot(0.7), Eigen::VectorXd::Constant(1, 0.4)};
  std::vector<Vec3> targets = forwardKinematics(tree, pose, treeOffsets(tree)).markers;
  targets[0] = Vec3(1.0, 2.0, 3.0);
  const auto fit = optimizeMarkers(tree, std::vector<Pose>{pose}, std::vector<std::vector<Vec3>>{targets}, treeOffsets(tree));
  const Vec3 expected = pose.root.inverse().apply(targets[0]);
  EXPECT_LT((fit.offsets[0] - expected).norm(), 1e-12);
}

TEST(Markers, SymmetricResultOnQuadruped) {
  const auto tree = loadTree(std::string(SKILLFORGE_DATA_DIR) + "/trees/anymal.json");
  // asymmetric truth: the least-squares fit must still come out symmetric
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.02);
  auto truth = treeOffsets(tree);
  for (auto& o : truth) o += Vec3(n(rng), n(rng), n(rng));
  std::vector<Pose> poses;
  std::vector<std::vector<Vec3>> targets;
  for (int i = 0; i < 10; ++i) {
    Pose p{smoothRoot(0.1 * i), smoothJoints(0.1 * i, tree.jointCount()) * 0.3};
    poses.push_back(p);
    targets.push_back(forwardKinematics(tree, p, truth).markers);
  }
  const auto fit = optimizeMarkers(tree, poses, targets, treeOffsets(tree));
  for (const auto* sym : {&*tree.symmetry.lateral, &*tree.symmetry.longitudinal}) {
    for (size_t m = 0; m < tree.markers.size(); ++m) {
      Vec3 mirrored = fit.offsets[sym->markers[m]];
      mirrored[sym->axis] = -mirrored[sym->axis];
      EXPECT_EQ(fit.offsets[m], mirrored) << tree.markers[m].name;
    }
  }
}

TEST(Markers, UnobservedMarkerFlaggedAndKept) {
  const auto tree = makePlanarChain(2);
  const auto initial = treeOffsets(tree);
  const Pose pose{Transform::identity(), Eigen::Vector2d(0.1, 0.2)};
  auto targets = forwardKinematics(tree, pose, initial).markers;
  const int tip = tree.markerIndex("tip2");
  targets[tip] = Vec3::Constant(std::nan(""));
  const auto fit = optimizeMarkers(tree, std::vector<Pose>{pose}, std::vector<std::vector<Vec3>>{targets}, initial);
  EXPECT_TRUE(fit.unobservable[tip]);
  EXPECT_EQ(fit.offsets[tip], initial[tip]);
  EXPECT_FALSE(fit.unobservable[tree.markerIndex("tip1")]);
}

RetargetProblem chainProblem(const KinematicTree& tree, size_t frames, double scale = 1.0) {
  RetargetProblem p;
  p.tree = tree;
  p.reference = markerClip(tree, trueChainOffsets(tree), frames, scale);
  p.correspondence = identityCorrespondence(tree);
  p.beta = 0.0;
  return p;
}

void expectNonIncreasing(const std::vector<double>& objective) {
  for (size_t k = 1; k < objective.size(); ++k) {
    EXPECT_LE(objective[k], objective[k - 1]) << "alternation " << k;
  }
}

TEST(Retarget, SelfRetargetingRecoversTruth) {
  const auto tree = makePlanarChain(3);
  const auto problem = chainProblem(tree, 200);
  const auto result = retargetClip(problem, 200);
  expectNonIncreasing(result.objective);
  EXPECT_LT(result.objective.back(), 1e-10);
  const auto truth = trueChainOffsets(tree);
  for (size_t m = 0; m < truth.size(); ++m) {
    EXPECT_LT((result.markerOffsets[m] - truth[m]).norm(), 1e-6) << tree.markers[m].name;
  }
  double sq = 0.0;
  for (size_t t = 0; t < result.clip.frames.size(); ++t) {
    sq += (result.clip.frames[t].q - problem.reference.frames[t].q).squaredNorm();
  }
  EXPECT_LT(std::sqrt(sq / (200.0 * 3.0)), 1e-3);
  EXPECT_TRUE(result.discontinuities.empty());
}

TEST(Retarget, ZeroAlternationsKeepsInitialOffsets) {
  const auto tree = makePlanarChain(3);
  const auto result = retargetClip(chainProblem(tree, 20), 0);
  EXPECT_EQ(result.alternations, 0);
  ASSERT_EQ(result.objective.size(), 1u);
  EXPECT_EQ(result.markerOffsets, treeOffsets(tree));
  EXPECT_EQ(result.clip.frames.size(), 20u);
}

TEST(Retarget, ScaledReferenceIsMonotone) {
  const auto tree = makePlanarChain(3);
  auto problem = chainProblem(tree, 60, 1.3);
  problem.beta = 0.01;
  const auto result = retargetClip(problem, 30);
  EXPECT_GT(result.objective.back(), 0.0);
  expectNonIncreasing(result.objective);
  EXPECT_GT(result.objective.size(), 1u);
}

TEST(Retarget, QuadrupedMonotoneWithRegularizer) {
  const auto tree = loadTree(std::string(SKILLFORGE_DATA_DIR) + "/trees/anymal.json");
  RetargetProblem p;
  p.tree = tree;
  MotionClip ref;
  ref.rate = 50.0;
  ref.name = "trot";
  for (int i = 0; i < 25; ++i) {
    const double t = i / 50.0;
    Pose pose{smoothRoot(t), tree.referencePose() + 0.2 * smoothJoints(t, tree.jointCount())};
    auto markers = forwardKinematics(tree, pose).markers;
    for (auto& m : markers) m *= 1.2;
    ref.frames.push_back({pose.root, pose.q, {}, markers});
  }
  p.reference = ref;
  p.correspondence = identityCorrespondence(tree);
  const auto result = retargetClip(p, 10);
  expectNonIncreasing(result.objective);
}

TEST(Retarget, RejectsBadCorrespondence) {
  const auto tree = makePlanarChain(2);
  auto p = chainProblem(tree, 5);
  p.correspondence.referenceIndex[1] = p.correspondence.referenceIndex[0];
  EXPECT_THROW(retargetClip(p, 1), InvalidInput);
  auto empty = chainProblem(tree, 5);
  empty.reference.frames.clear();
  EXPECT_THROW(retargetClip(empty, 1), InvalidInput);
}

}  // namespace
}  // namespace skillforge
