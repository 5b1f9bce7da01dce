#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "skillforge/common/error.h"
#include "skillforge/kinematics/kinematic_tree.h"

namespace skillforge {
namespace {

constexpr double kPi = std::numbers::pi;

Vec3 randomUnit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

Quaternion randomRotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized();
}

// Random tree: up to two joints per body, parents drawn from earlier bodies.
KinematicTree randomTree(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(2, 7);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  KinematicTree tree;
  const int nb = count(rng);
  for (int b = 0; b < nb; ++b) {
    Body body;
    body.name = "b" + std::to_string(b);
    body.parent = b == 0 ? -1 : std::uniform_int_distribution<int>(0, b - 1)(rng);
    body.offset.position = Vec3(u(rng), u(rng), u(rng));
    body.offset.orientation = randomRotation(rng);
    tree.bodies.push_back(body);
    const int nj = b == 0 ? 0 : std::uniform_int_distribution<int>(1, 2)(rng);
    for (int k = 0; k < nj; ++k) {
      HingeJoint j;
      j.name = "j" + std::to_string(tree.joints.size());
      j.body = b;
      j.axis = randomUnit(rng);
      tree.joints.push_back(j);
    }
    tree.markers.push_back({"m" + std::to_string(b), b, Vec3(u(rng), u(rng), u(rng)), false});
  }
  tree.finalize();
  return tree;
}

Pose randomPose(const KinematicTree& tree, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Pose pose;
  pose.root.position = Vec3(u(rng), u(rng), u(rng));
  pose.root.orientation = randomRotation(rng);
  pose.q = Eigen::VectorXd(tree.jointCount());
  for (Eigen::Index i = 0; i < pose.q.size(); ++i) pose.q[i] = u(rng);
  return pose;
}

KinematicTree singleHinge(const Vec3& axis) {
  KinematicTree tree;
  tree.bodies.push_back({"root", -1, Transform::identity()});
  Body link{"link", 0, Transform::identity()};
  tree.bodies.push_back(link);
  tree.bodies.push_back({"tip", 1, {Vec3(1.0, 0.0, 0.0), Quaternion::identity()}});
  HingeJoint j;
  j.name = "hinge";
  j.body = 1;
  j.axis = axis;
  tree.joints.push_back(j);
  tree.markers.push_back({"on_root", 0, Vec3(0.2, 0.3, 0.1), false});
  tree.markers.push_back({"on_tip", 2, Vec3(0.0, 0.0, 0.0), false});
  tree.endEffectors.push_back(2);
  tree.finalize();
  return tree;
}

TEST(Quaternion, DifferenceOfIdenticalIsZero) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto q = randomRotation(rng);
    EXPECT_LT(quatDifference(q, q).norm(), 1e-12);
  }
}

TEST(Quaternion, DifferenceQuarterTurnAboutZ) {
  const auto qz = Quaternion::fromAxisAngle(Vec3::UnitZ(), kPi / 2);
  const Vec3 d = quatDifference(Quaternion::identity(), qz);
  EXPECT_NEAR(d.x(), 0.0, 1e-9);
  EXPECT_NEAR(d.y(), 0.0, 1e-9);
  EXPECT_NEAR(d.z(), kPi / 2, 1e-9);
}

TEST(Quaternion, DifferenceIgnoresDoubleCover) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto a = randomRotation(rng);
    const auto b = randomRotation(rng);
    const Vec3 d1 = quatDifference(a, b);
    const Vec3 d2 = quatDifference(-a, b);
    const Vec3 d3 = quatDifference(a, -b);
    EXPECT_LT((d1 - d2).norm(), 1e-12);
    EXPECT_LT((d1 - d3).norm(), 1e-12);
    EXPECT_LE(d1.norm(), kPi + 1e-12);
  }
}

TEST(Quaternion, DifferenceMagnitudeIsGeodesicAngle) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const auto a = randomRotation(rng);
    const auto b = randomRotation(rng);
    // independent oracle: angle from the trace of the relative rotation matrix
    const Mat3 rel = a.toMatrix().transpose() * b.toMatrix();
    const double angle = std::acos(std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0));
    EXPECT_NEAR(quatDifference(a, b).norm(), angle, 1e-7);
    EXPECT_NEAR(quatDifference(a, b).norm(), quatDifference(b, a).norm(), 1e-12);
    EXPECT_NEAR(geodesicAngle(a, b), angle, 1e-7);
  }
}

TEST(Quaternion, DifferenceRejectsNonUnit) {
  EXPECT_THROW(quatDifference({2.0, 0.0, 0.0, 0.0}, Quaternion::identity()), InvalidInput);
}

TEST(Quaternion, RotateMatchesMatrix) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto q = randomRotation(rng);
    const Vec3 v = randomUnit(rng) * 3.0;
    EXPECT_LT((q.rotate(v) - q.toMatrix() * v).norm(), 1e-12);
  }
}

TEST(Quaternion, ProductStaysUnit) {
  std::mt19937_64 rng(12);
  Quaternion q;
  for (int i = 0; i < 10000; ++i) q = q * randomRotation(rng);
  EXPECT_NEAR(q.norm(), 1.0, 1e-9);
}

TEST(Quaternion, RotationVectorRoundTrip) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 50; ++i) {
    const Vec3 v = randomUnit(rng) * std::uniform_real_distribution<double>(0.0, 3.1)(rng);
    EXPECT_LT((Quaternion::fromRotationVector(v).toRotationVector() - v).norm(), 1e-12);
  }
}

TEST(Quaternion, SlerpEndpointsExact) {
  std::mt19937_64 rng(14);
  const auto a = randomRotation(rng);
  const auto b = randomRotation(rng);
  EXPECT_EQ(slerp(a, b, 0.0), a);
  const auto end = slerp(a, b, 1.0);
  EXPECT_LT(geodesicAngle(end, b), 1e-12);
}

TEST(Transform, ComposeIsAssociativeAndInvertible) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Transform a{Vec3(u(rng), u(rng), u(rng)), randomRotation(rng)};
    Transform b{Vec3(u(rng), u(rng), u(rng)), randomRotation(rng)};
    Transform c{Vec3(u(rng), u(rng), u(rng)), randomRotation(rng)};
    const Transform l = (a * b) * c;
    const Transform r = a * (b * c);
    EXPECT_LT((l.position - r.position).norm(), 1e-9);
    EXPECT_LT(geodesicAngle(l.orientation, r.orientation), 1e-9);
    const Transform id = a.inverse() * a;
    EXPECT_LT(id.position.norm(), 1e-9);
    EXPECT_LT(geodesicAngle(id.orientation, Quaternion::identity()), 1e-9);
  }
}

TEST(ForwardKinematics, ZeroPoseIsOffsetChain) {
  std::mt19937_64 rng(21);
  const auto tree = randomTree(rng);
  Pose pose{Transform::identity(), Eigen::VectorXd::Zero(tree.jointCount())};
  const auto fk = forwardKinematics(tree, pose);
  for (size_t b = 0; b < tree.bodies.size(); ++b) {
    Transform expected = tree.bodies[b].offset;
    for (int p = tree.bodies[b].parent; p >= 0; p = tree.bodies[p].parent) {
      expected = tree.bodies[p].offset * expected;
    }
    EXPECT_LT((fk.bodies[b].position - expected.position).norm(), 1e-12);
    EXPECT_LT(geodesicAngle(fk.bodies[b].orientation, expected.orientation), 1e-9);
  }
}

TEST(ForwardKinematics, QuarterTurnHinge) {
  const auto tree = singleHinge(Vec3::UnitZ());
  Pose pose{Transform::identity(), Eigen::VectorXd::Constant(1, kPi / 2)};
  const auto fk = forwardKinematics(tree, pose);
  EXPECT_NEAR(fk.bodies[2].position.x(), 0.0, 1e-9);
  EXPECT_NEAR(fk.bodies[2].position.y(), 1.0, 1e-9);
  EXPECT_NEAR(fk.bodies[2].position.z(), 0.0, 1e-9);
  ASSERT_EQ(fk.endEffectors.size(), 1u);
  EXPECT_NEAR(fk.endEffectors[0].y(), 1.0, 1e-9);
}

TEST(ForwardKinematics, RootTranslationEquivariance) {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 20; ++i) {
    const auto tree = randomTree(rng);
    const auto pose = randomPose(tree, rng);
    Pose moved = pose;
    const Vec3 t(1.5, -2.0, 0.25);
    moved.root.position += t;
    const auto a = forwardKinematics(tree, pose);
    const auto b = forwardKinematics(tree, moved);
    for (size_t m = 0; m < a.markers.size(); ++m) {
      EXPECT_LT((b.markers[m] - a.markers[m] - t).norm(), 1e-9);
    }
  }
}

TEST(ForwardKinematics, RootRotationEquivariance) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 20; ++i) {
    const auto tree = randomTree(rng);
    const auto pose = randomPose(tree, rng);
    const Transform g{Vec3(0.3, 0.1, -0.7), randomRotation(rng)};
    Pose moved = pose;
    moved.root = g * pose.root;
    const auto a = forwardKinematics(tree, pose);
    const auto b = forwardKinematics(tree, moved);
    for (size_t m = 0; m < a.markers.size(); ++m) {
      EXPECT_LT((b.markers[m] - g.apply(a.markers[m])).norm(), 1e-9);
    }
  }
}

TEST(ForwardKinematics, RejectsWrongJointCount) {
  const auto tree = singleHinge(Vec3::UnitZ());
  Pose pose{Transform::identity(), Eigen::VectorXd::Zero(3)};
  EXPECT_THROW(forwardKinematics(tree, pose), InvalidInput);
}

TEST(MarkerJacobian, RootMarkerRowsAreZero) {
  const auto tree = singleHinge(Vec3::UnitZ());
  Pose pose{Transform::identity(), Eigen::VectorXd::Constant(1, 0.4)};
  const std::vector<int> idx = {0};
  EXPECT_TRUE(markerJacobian(tree, pose, idx).isZero(0.0));
}

TEST(MarkerJacobian, SingleJointIsAxisCrossLever) {
  const Vec3 axis = Vec3(1.0, 2.0, 2.0).normalized();
  const auto tree = singleHinge(axis);
  Pose pose{Transform::identity(), Eigen::VectorXd::Zero(1)};
  const std::vector<int> idx = {1};
  const Eigen::MatrixXd jac = markerJacobian(tree, pose, idx);
  // joint origin at the world origin, marker at (1, 0, 0)
  const Vec3 expected = axis.cross(Vec3(1.0, 0.0, 0.0));
  EXPECT_LT((jac.col(0) - expected).norm(), 1e-12);
}

double relativeError(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1e-12, std::max(a.norm(), b.norm()));
}

TEST(MarkerJacobian, MatchesFiniteDifferencesOnRandomTrees) {
  std::mt19937_64 rng(31);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const auto tree = randomTree(rng);
    const auto pose = randomPose(tree, rng);
    std::vector<int> idx(tree.markers.size());
    for (size_t m = 0; m < idx.size(); ++m) idx[m] = static_cast<int>(m);
    const Eigen::MatrixXd jac = markerJacobian(tree, pose, idx);
    Eigen::MatrixXd fd(jac.rows(), jac.cols());
    for (Eigen::Index j = 0; j < jac.cols(); ++j) {
      Pose plus = pose;
      Pose minus = pose;
      plus.q[j] += h;
      minus.q[j] -= h;
      const auto a = forwardKinematics(tree, plus).markers;
      const auto b = forwardKinematics(tree, minus).markers;
      for (size_t m = 0; m < idx.size(); ++m) {
        fd.block<3, 1>(3 * m, j) = (a[m] - b[m]) / (2 * h);
      }
    }
    EXPECT_LT(relativeError(jac, fd), 1e-5) << "trial " << trial;
  }
}

TEST(MarkerJacobian, RootColumnsMatchFiniteDifferences) {
  std::mt19937_64 rng(32);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const auto tree = randomTree(rng);
    const auto pose = randomPose(tree, rng);
    std::vector<int> idx(tree.markers.size());
    for (size_t m = 0; m < idx.size(); ++m) idx[m] = static_cast<int>(m);
    const Eigen::MatrixXd jac = markerJacobianWithRoot(tree, pose, idx);
    for (int c = 0; c < 6; ++c) {
      Pose plus = pose;
      Pose minus = pose;
      if (c < 3) {
        plus.root.position[c] += h;
        minus.root.position[c] -= h;
      } else {
        const Vec3 w = Vec3::Unit(c - 3) * h;
        plus.root.orientation = Quaternion::fromRotationVector(w) * pose.root.orientation;
        minus.root.orientation = Quaternion::fromRotationVector(-w) * pose.root.orientation;
      }
      const auto a = forwardKinematics(tree, plus).markers;
      const auto b = forwardKinematics(tree, minus).markers;
      Eigen::VectorXd fd(jac.rows());
      for (size_t m = 0; m < idx.size(); ++m) fd.segment<3>(3 * m) = (a[m] - b[m]) / (2 * h);
      EXPECT_LT(relativeError(jac.col(c), fd), 1e-5) << "trial " << trial << " col " << c;
    }
  }
}

TEST(KinematicTree, RejectsChildBeforeParent) {
  KinematicTree tree;
  tree.bodies.push_back({"root", -1, {}});
  tree.bodies.push_back({"a", 2, {}});
  tree.bodies.push_back({"b", 0, {}});
  EXPECT_THROW(tree.finalize(), InvalidInput);
}

TEST(KinematicTree, RejectsSecondRoot) {
  KinematicTree tree;
  tree.bodies.push_back({"root", -1, {}});
  tree.bodies.push_back({"other", -1, {}});
  EXPECT_THROW(tree.finalize(), InvalidInput);
}

TEST(KinematicTree, RejectsNonInvolutiveSymmetry) {
  auto tree = makePlanarChain(3);
  tree.symmetry.lateral->joints = {1, 2, 0};
  EXPECT_THROW(tree.finalize(), InvalidInput);
}

TEST(KinematicTree, RejectsNonHingeJoint) {
  nlohmann::json doc = treeToJson(makePlanarChain(1));
  doc["joints"][0]["type"] = "slide";
  EXPECT_THROW(parseTree(doc), InvalidInput);
}

TEST(KinematicTree, JsonRoundTrip) {
  const auto tree = makePlanarChain(3);
  const auto back = parseTree(treeToJson(tree));
  EXPECT_EQ(treeToJson(back), treeToJson(tree));
  ASSERT_TRUE(back.symmetry.lateral.has_value());
}

TEST(KinematicTree, ShippedTreesLoad) {
  for (const char* name : {"anymal", "op3", "chain3"}) {
    const auto tree = loadTree(std::string(SKILLFORGE_DATA_DIR) + "/trees/" + name + ".json");
    EXPECT_GT(tree.jointCount(), 0u) << name;
    EXPECT_FALSE(tree.endEffectors.empty()) << name;
  }
}

TEST(KinematicTree, ShippedChainMatchesGenerator) {
  const auto shipped = loadTree(std::string(SKILLFORGE_DATA_DIR) + "/trees/chain3.json");
  EXPECT_EQ(treeToJson(shipped), treeToJson(makePlanarChain(3)));
}

}  // namespace
}  // namespace skillforge
